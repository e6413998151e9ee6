"""Why the conservative form of the law matters: the mean drifts otherwise."""

# %%
import numpy as np

from fwat.graph import build_laplacian, fig1a_graphs, periodic_schedule
from fwat.protocol import FwatParams, fwat_single_input, pal_input
from fwat.sim import integrate_single

# %% [markdown]
# Both laws share the same exponential shaping, but only one is written as
# L times something. That factor makes 1^T u = 0, so the mean is invariant.
# In fact the conservative law is exactly L applied to the other one.

# %%
L = build_laplacian(fig1a_graphs()[0])
params = FwatParams(eta=4.0, t0=0.0, tf=4.0)
x = np.array([0.1, 0.9, 0.4, 0.3])
print("sum of fwat input:", fwat_single_input(x, L, params, 1.0).sum())
print("sum of pal input: ", pal_input(x, L, params, 1.0).sum())
print("L @ pal == fwat:  ", np.allclose(L.entries @ pal_input(x, L, params, 1.0),
                                        fwat_single_input(x, L, params, 1.0)))

# %%
schedule = periodic_schedule(fig1a_graphs(), 0.5, 0.0, 4.0)
x0 = np.random.default_rng(0).uniform(0.0, 1.0, 4)
for law in ("fwat", "pal"):
    tr = integrate_single(x0, schedule, params, law=law)
    print(f"{law:>4}: final states {np.round(tr.x[-1], 4)}, max mean drift {tr.avg_drift.max():.2e}")
