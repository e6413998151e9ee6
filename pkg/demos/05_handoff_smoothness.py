"""How smooth is the control when the tracking phase ends at t1?"""

# %%
import numpy as np

from fwat.graph import ring_graph
from fwat.protocol import FwatParams, SecondOrderState
from fwat.sim import IntegratorConfig, integrate_double

# %% [markdown]
# The tracking correction behaves like eta2 * c * (t1 - t)**(eta2 - 1) as
# t -> t1. It is continuous for any eta2 > 1, but its slope only vanishes at
# t1 when eta2 > 2. With eta2 = 2 the control has a kink of size about
# 2|c| per agent.

# %%
hs = (1e-3, 1e-4, 1e-5)


def slopes(eta2):
    rng = np.random.default_rng(0)
    state = SecondOrderState(rng.uniform(0, 1, 4), rng.uniform(0, 0.5, 4))
    params = FwatParams(eta=2.0, t0=0.0, tf=6.0, eta2=eta2, t1=3.0)
    lands = [3.0 - h for h in hs] + [3.0 + h for h in hs]
    tr = integrate_double(state, ring_graph(4), params,
                          IntegratorConfig(eps_guard=1e-7, rel_tol=1e-12, abs_tol=1e-14), lands)
    u = {t: tr.u[np.flatnonzero(tr.times == t)[-1]] for t in [3.0, *lands]}
    h = hs[-1]
    return (u[3.0] - u[3.0 - h]) / h, (u[3.0 + h] - u[3.0]) / h


for eta2 in (2.0, 2.5, 3.0):
    left, right = slopes(eta2)
    print(f"eta2 = {eta2}: left slope {np.round(left, 4)}, right slope {np.round(right, 4)}, "
          f"gap {np.abs(left - right).max():.2e}")
