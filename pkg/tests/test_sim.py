import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_connected
from fwat.graph import fig1a_graphs, path_graph, periodic_schedule, ring_graph
from fwat.protocol import FwatParams, SecondOrderState, phi1
from fwat.sim import (
    IntegratorConfig,
    NonFiniteStateError,
    Segment,
    Trajectory,
    consensus_delta,
    integrate_double,
    integrate_pure_tracking,
    integrate_segments,
    integrate_single,
)


def two_agent_gap(d0, eta, t0, tf, t):
    """Exact gap x1 - x2 for two agents on one edge."""
    return 2 * np.arctanh(np.tanh(d0 / 2) * ((tf - t) / (tf - t0)) ** (4 * eta))


EX1 = periodic_schedule(fig1a_graphs(), 0.5, 0.0, 4.0)
EX1_PARAMS = FwatParams(eta=4.0, t0=0.0, tf=4.0)
EX2_PARAMS = FwatParams(eta=2.0, t0=0.0, tf=6.0, eta2=2.0, t1=3.0)


class TestConfig:
    def test_default_guard(self):
        cfg = IntegratorConfig()
        assert cfg.guard(0.0, 4.0) == 4e-3
        assert cfg.guard(0.0, 0.5) == 1e-3
        assert IntegratorConfig(eps_guard=0.01).guard(0, 1) == 0.01

    @pytest.mark.parametrize("kw", [{"method": "euler"}, {"dt_base": 0}, {"rel_tol": 0}, {"kappa": 1.5},
                                    {"coast": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)

    def test_guard_must_fit(self):
        with pytest.raises(ValueError):
            IntegratorConfig(eps_guard=2.0).guard(0, 1)


class TestTwoAgentClosedForm:
    @pytest.mark.parametrize("method", ["rk45_adaptive", "rk4_fixed"])
    def test_gap_matches_exact_solution(self, method):
        params = FwatParams(eta=1.0, t0=0.0, tf=2.0)
        traj = integrate_single([1.0, 0.0], path_graph(2), params, IntegratorConfig(method=method, dt_base=1e-3))
        gap = traj.x[:, 0] - traj.x[:, 1]
        exact = two_agent_gap(1.0, 1.0, 0.0, 2.0, traj.times)
        np.testing.assert_allclose(gap, exact, atol=1e-7)
        assert abs(gap[-1]) < 1e-3
        assert np.max(np.abs(traj.avg - 0.5)) < 1e-9
        assert traj.times[-1] == 2.0 - 2e-3

    def test_equilibrium_stays_put(self):
        traj = integrate_single(np.full(4, 0.3), ring_graph(4), EX1_PARAMS)
        assert np.all(traj.x == 0.3)
        assert np.all(traj.V == 0)


@pytest.fixture(scope="module")
def ex1_traj():
    x0 = np.random.default_rng(0).uniform(0, 1, 4)
    return integrate_single(x0, EX1, EX1_PARAMS)


class TestExample1:
    @pytest.fixture
    def traj(self, ex1_traj):
        return ex1_traj

    def test_consensus_and_average(self, traj):
        assert np.max(np.abs(consensus_delta(traj.x[-1]))) < 1e-3
        assert np.max(traj.avg_drift) < 1e-8
        np.testing.assert_allclose(traj.x[-1], traj.avg[0], atol=1e-3)

    def test_switch_times_are_samples(self, traj):
        for t in EX1.switch_times[1:]:
            assert t in traj.times
        assert traj.times[-1] == 4.0 - 4e-3

    def test_recorded_input_uses_active_graph(self, traj):
        from fwat.graph import active_laplacian
        from fwat.protocol import fwat_single_input

        for k in range(0, traj.times.size, 7):
            t = traj.times[k]
            np.testing.assert_array_equal(traj.u[k], fwat_single_input(traj.x[k], active_laplacian(EX1, t),
                                                                         EX1_PARAMS, t))

    def test_methods_agree(self, traj):
        x0 = np.random.default_rng(0).uniform(0, 1, 4)
        # kappa * eta * lambda_max^2 = 0.02 * 4 * 11.7 keeps RK4 stable up to tf
        rk4 = integrate_single(x0, EX1, EX1_PARAMS, IntegratorConfig(method="rk4_fixed", dt_base=2e-3, kappa=0.02))
        np.testing.assert_allclose(rk4.x[-1], traj.x[-1], atol=1e-6)

    def test_refinement_converges(self):
        x0 = np.random.default_rng(1).uniform(0, 1, 4)
        coarse = integrate_single(x0, EX1, EX1_PARAMS, IntegratorConfig(rel_tol=1e-6, abs_tol=1e-8),
                                  landings=[1.234])
        fine = integrate_single(x0, EX1, EX1_PARAMS, IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13),
                                landings=[1.234])
        k_c, k_f = np.flatnonzero(coarse.times == 1.234)[0], np.flatnonzero(fine.times == 1.234)[0]
        assert np.max(np.abs(coarse.x[k_c] - fine.x[k_f])) < 1e-5

    def test_deterministic(self, traj):
        x0 = np.random.default_rng(0).uniform(0, 1, 4)
        again = integrate_single(x0, EX1, EX1_PARAMS)
        np.testing.assert_array_equal(again.x, traj.x)
        np.testing.assert_array_equal(again.times, traj.times)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.floats(-100, 100))
def test_translation_invariance(seed, c):
    rng = np.random.default_rng(seed)
    top = random_connected(int(rng.integers(2, 6)), 0.5, rng)
    x0 = rng.uniform(-1, 1, top.n)
    params = FwatParams(eta=3.0, t0=0.0, tf=1.0)
    cfg = IntegratorConfig(method="rk4_fixed", dt_base=2e-4, kappa=0.005)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        a = integrate_single(x0, top, params, cfg)
        b = integrate_single(x0 + c, top, params, cfg)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_allclose(b.x - c, a.x, atol=1e-9 * (1 + abs(c)))


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_average_conserved_on_random_graphs(seed):
    rng = np.random.default_rng(seed)
    top = random_connected(int(rng.integers(2, 9)), 0.3, rng)
    traj = integrate_single(rng.uniform(-3, 3, top.n), top, FwatParams(eta=20.0, t0=0.0, tf=1.0))
    assert np.max(traj.avg_drift) < 1e-8 * (1 + abs(traj.avg[0]))


def test_rk4_stiffness_warning():
    # the flagged configuration really does blow up
    with pytest.warns(RuntimeWarning, match="unstable"), pytest.raises(NonFiniteStateError):
        integrate_single([1.0, 0.0, 0.0, 0.0], EX1, EX1_PARAMS, IntegratorConfig(method="rk4_fixed", kappa=0.1))


def test_pal_law_drifts():
    x0 = np.random.default_rng(0).uniform(0, 1, 4)
    traj = integrate_single(x0, EX1, EX1_PARAMS, law="pal")
    assert np.max(traj.avg_drift) > 1e-3
    assert traj.meta["law"] == "pal"


def test_coast_holds_state():
    traj = integrate_single([1.0, 0.0], path_graph(2), FwatParams(1.0, 0.0, 2.0), IntegratorConfig(coast=1.0))
    assert traj.times[-2:].tolist() == [2.0, 3.0]
    np.testing.assert_array_equal(traj.x[-1], traj.x[-3])
    np.testing.assert_array_equal(traj.u[-1], [0.0, 0.0])


def test_landings_are_exact():
    traj = integrate_single([1.0, 0.0], path_graph(2), FwatParams(1.0, 0.0, 2.0), landings=[0.3, 1.7])
    assert 0.3 in traj.times and 1.7 in traj.times


def test_non_finite_state_raises():
    seg = Segment(0.0, 1.0, lambda t, y: np.array([np.nan]) if t > 0.5 else -y, 2.0, lambda t, y, s: y)
    with pytest.raises(NonFiniteStateError) as info:
        integrate_segments([seg], np.array([1.0]), IntegratorConfig())
    assert 0.0 <= info.value.last_good_time <= 0.5
    with pytest.raises(NonFiniteStateError):
        integrate_segments([seg], np.array([1.0]), IntegratorConfig(method="rk4_fixed"))


@pytest.mark.parametrize("method", ["rk45_adaptive", "rk4_fixed"])
def test_diverged_state_raises(method):
    # finite but so large that V = x^T x overflows
    seg = Segment(0.0, 1.0, lambda t, y: 1e6 * y * y, 2.0, lambda t, y, s: y)
    with pytest.raises(NonFiniteStateError), np.errstate(over="ignore"):
        integrate_segments([seg], np.array([1.0]), IntegratorConfig(method=method))


def test_step_budget():
    seg = Segment(0.0, 1.0, lambda t, y: -y, 2.0, lambda t, y, s: y)
    with pytest.raises(RuntimeError):
        integrate_segments([seg], np.array([1.0]), IntegratorConfig(method="rk4_fixed", max_steps=5))


def test_csv_round_trip(tmp_path):
    x0 = np.random.default_rng(2).uniform(0, 1, 4)
    traj = integrate_double(SecondOrderState(x0, np.zeros(4)), ring_graph(4), EX2_PARAMS)
    traj.to_csv(tmp_path / "t.csv")
    back = Trajectory.from_csv(tmp_path / "t.csv", mode="double")
    for name in ("times", "x", "v", "u", "V", "avg", "sat_count"):
        np.testing.assert_array_equal(getattr(back, name), getattr(traj, name))
    np.testing.assert_array_equal(back.z_norm, traj.z_norm)


class TestDouble:
    def test_example2(self):
        rng = np.random.default_rng(0)
        traj = integrate_double(SecondOrderState(rng.uniform(0, 1, 4), rng.uniform(0, 0.5, 4)), ring_graph(4),
                                EX2_PARAMS)
        k1 = np.flatnonzero(traj.times == 3.0 - 6e-3)[0]
        assert traj.z_norm[k1] < 1e-3
        assert np.max(np.abs(consensus_delta(traj.x[-1]))) < 1e-3
        assert np.max(np.abs(traj.v[-1])) < 1e-2
        for t in (3.0 - 6e-3, 3.0, 6.0 - 6e-3):
            assert t in traj.times

    def test_starts_on_manifold(self):
        x0 = np.random.default_rng(3).uniform(0, 1, 4)
        from fwat.graph import build_laplacian

        v0 = -phi1(x0, build_laplacian(ring_graph(4)), EX2_PARAMS, 0.0)
        traj = integrate_double(SecondOrderState(x0, v0), ring_graph(4), EX2_PARAMS)
        assert np.nanmax(traj.z_norm[traj.times <= 3.0]) < 1e-6

    def test_rest_at_consensus(self):
        traj = integrate_double(SecondOrderState(np.full(4, 0.2), np.zeros(4)), ring_graph(4), EX2_PARAMS)
        assert np.all(traj.x == 0.2) and np.all(traj.v == 0)

    def test_coast_drifts_linearly(self):
        rng = np.random.default_rng(0)
        traj = integrate_double(SecondOrderState(rng.uniform(0, 1, 4), rng.uniform(0, 0.5, 4)), ring_graph(4),
                                EX2_PARAMS, IntegratorConfig(coast=2.0))
        np.testing.assert_allclose(traj.x[-1] - traj.x[-2], 2.0 * traj.v[-1], atol=1e-15)

    def test_guard_must_leave_room(self):
        with pytest.raises(ValueError):
            integrate_double(SecondOrderState(np.zeros(4), np.zeros(4)), ring_graph(4), EX2_PARAMS,
                             IntegratorConfig(eps_guard=3.5))


class TestPureTracking:
    def test_reference_value(self):
        traj = integrate_pure_tracking([1.0], 2.0, 0.0, 1.0, landings=[0.5])
        k = np.flatnonzero(traj.times == 0.5)[0]
        assert traj.x[k, 0] == pytest.approx(math.log(1 + (math.e - 1) * 0.25), abs=1e-8)
        assert traj.x[k, 0] == pytest.approx(0.35737401951, abs=1e-8)

    def test_negative_start(self):
        traj = integrate_pure_tracking([-0.5], 2.0, 0.0, 1.0)
        c = math.expm1(-0.5)
        exact = np.log1p(c * (1.0 - traj.times) ** 2)
        np.testing.assert_allclose(traj.x[:, 0], exact, atol=1e-6)

    def test_zero_stays_zero(self):
        traj = integrate_pure_tracking(np.zeros(3), 3.0, 0.0, 2.0)
        assert np.all(traj.x == 0)

    def test_eta2_must_exceed_one(self):
        with pytest.raises(ValueError):
            integrate_pure_tracking([1.0], 1.0, 0.0, 1.0)
