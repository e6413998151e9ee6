import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fwat.formation import (
    DEFAULT_HAND_OFFSET,
    FormationSpec,
    UnicycleState,
    coriolis_term,
    displacement_error,
    feedback_linearize,
    formation_input,
    hand_acceleration,
    hand_position,
    hand_velocity,
    integrate_formation,
    read_fleet,
    read_formation_spec,
    square_spec,
)
from fwat.graph import Topology, build_laplacian, path_graph, ring_graph
from fwat.protocol import FwatParams
from fwat.sim import IntegratorConfig

finite = st.floats(-5, 5, allow_nan=False)


def unicycles():
    return st.builds(
        UnicycleState,
        p=st.tuples(finite, finite).map(np.array),
        theta=st.floats(-math.pi, math.pi),
        v=finite,
        omega=finite,
        offset=st.floats(0.05, 2.0),
    )


def _flow(s: UnicycleState, vdot: float, wdot: float, t: float) -> UnicycleState:
    """Unicycle state after time ``t`` under constant (v', w'), by fine RK4."""
    y = np.array([s.p[0], s.p[1], s.theta, s.v, s.omega])

    def f(y):
        return np.array([y[3] * math.cos(y[2]), y[3] * math.sin(y[2]), y[4], vdot, wdot])

    steps = 200
    h = t / steps
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + h / 2 * k1)
        k3 = f(y + h / 2 * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return UnicycleState(p=y[:2], theta=y[2], v=y[3], omega=y[4], offset=s.offset)


class TestKinematics:
    def test_hand_position(self):
        np.testing.assert_allclose(hand_position(UnicycleState([0, 0], 0.0, offset=1.0)), [1, 0])
        np.testing.assert_allclose(hand_position(UnicycleState([1, 1], math.pi / 2, offset=0.5)), [1, 1.5],
                                   atol=1e-15)
        np.testing.assert_allclose(hand_position(UnicycleState([0, 0], math.pi / 3, offset=1.0)),
                                   [0.5, math.sqrt(3) / 2], atol=1e-15)

    def test_hand_velocity(self):
        np.testing.assert_allclose(hand_velocity(UnicycleState([0, 0], 0.0, v=1.0, offset=1.0)), [1, 0])
        np.testing.assert_allclose(hand_velocity(UnicycleState([0, 0], 0.0, omega=1.0, offset=1.0)), [0, 1])

    def test_coriolis(self):
        assert not coriolis_term(UnicycleState([0, 0], 0.7, v=3.0, omega=0.0)).any()
        np.testing.assert_allclose(coriolis_term(UnicycleState([0, 0], 0.0, v=1.0, omega=1.0, offset=1.0)),
                                   [-1, 1])
        np.testing.assert_allclose(
            coriolis_term(UnicycleState([0, 0], math.pi / 2, v=2.0, omega=1.0, offset=0.5)), [-2, -0.5],
            atol=1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            UnicycleState([0, 0], 0.0, offset=0.0)
        with pytest.raises(ValueError):
            UnicycleState([0, np.inf], 0.0)
        with pytest.raises(ValueError):
            UnicycleState([0, 0, 0], 0.0)
        assert UnicycleState([0, 0], 0.0).offset == DEFAULT_HAND_OFFSET

    @pytest.mark.parametrize("state", [
        UnicycleState([0.3, -0.2], math.pi / 4, v=1.0, omega=0.5, offset=0.8),
        UnicycleState([1.0, 2.0], -2.0, v=-0.4, omega=1.3, offset=0.2),
    ])
    def test_derivatives_match_finite_differences(self, state):
        vdot, wdot = 0.7, -0.3
        h = 1e-4
        fwd, back = _flow(state, vdot, wdot, h), _flow(state, vdot, wdot, -h)
        hp, h0, hm = hand_position(fwd), hand_position(state), hand_position(back)
        vel = (hp - hm) / (2 * h)
        acc = (hp - 2 * h0 + hm) / h**2
        np.testing.assert_allclose(hand_velocity(state), vel, rtol=1e-4, atol=1e-8)
        np.testing.assert_allclose(hand_acceleration(state, vdot, wdot), acc, rtol=1e-4, atol=1e-6)


class TestFeedbackLinearization:
    def test_cancellation(self):
        s = UnicycleState([0, 0], 0.4, v=1.2, omega=-0.7, offset=0.3)
        vdot, wdot = feedback_linearize(coriolis_term(s), s)
        assert vdot == pytest.approx(0, abs=1e-15) and wdot == pytest.approx(0, abs=1e-15)

    def test_aligned(self):
        assert feedback_linearize([1.0, 0.0], UnicycleState([0, 0], 0.0, offset=1.0)) == (1.0, 0.0)

    @given(unicycles(), finite, finite)
    def test_round_trip(self, s, ux, uy):
        vdot, wdot = feedback_linearize([ux, uy], s)
        np.testing.assert_allclose(hand_acceleration(s, vdot, wdot), [ux, uy], atol=1e-10 * (1 + abs(s.omega)) ** 2
                                   / min(1.0, s.offset))


class TestSpec:
    def test_square_targets(self):
        spec = square_spec()
        np.testing.assert_array_equal(spec.targets, [[0, 0], [1, 0], [1, -1], [0, -1]])
        np.testing.assert_array_equal(spec.displacement(1, 2), [1, 0])
        np.testing.assert_array_equal(spec.displacement(4, 3), [1, 0])
        np.testing.assert_array_equal(spec.displacement(4, 1), [0, 1])
        np.testing.assert_array_equal(spec.displacement(3, 2), [0, 1])
        spec.check_edges(ring_graph(4))

    def test_ring_cycle_sums_to_zero(self):
        spec = square_spec(2.5)
        total = sum(spec.displacement(i, i % 4 + 1) for i in range(1, 5))
        np.testing.assert_array_equal(total, [0, 0])

    def test_inconsistent_cycle(self):
        with pytest.raises(ValueError):
            FormationSpec(3, {(1, 2): [1, 0], (2, 3): [0, 1], (3, 1): [0, 0]})

    def test_missing_edge(self):
        spec = FormationSpec(4, {(1, 2): [1, 0], (2, 3): [1, 0], (3, 4): [1, 0]})
        with pytest.raises(ValueError):
            spec.check_edges(ring_graph(4))

    def test_bad_pairs(self):
        with pytest.raises(ValueError):
            FormationSpec(2, {(1, 1): [0, 0]})
        with pytest.raises(ValueError):
            FormationSpec(2, {(1, 2): [1, 0], (2, 1): [-1, 0]})

    def test_files(self, tmp_path):
        sp = tmp_path / "spec.txt"
        sp.write_text("# i j dx dy\n1 2 1 0\n4 3 1 0\n4 1 0 1\n3 2 0 1\n")
        np.testing.assert_array_equal(read_formation_spec(sp, 4).targets, square_spec().targets)
        fl = tmp_path / "fleet.txt"
        fl.write_text("0 0 0 0.2\n1 1 1.5707963267948966 0.3\n")
        fleet = read_fleet(fl)
        assert len(fleet) == 2 and fleet[1].offset == 0.3 and fleet[1].v == 0.0


PARAMS = FwatParams(eta=2.0, t0=0.0, tf=8.0, eta2=2.0, t1=4.0)
RING = ring_graph(4)


def _fleet_at(hands, theta, off=0.2):
    return [UnicycleState(p=h - off * np.array([math.cos(th), math.sin(th)]), theta=th, offset=off)
            for h, th in zip(hands, theta)]


class TestControl:
    def test_zero_at_formation(self):
        theta = [0.0, 1.0, 2.0, 3.0]
        fleet = _fleet_at(square_spec().targets + np.array([3.0, -1.0]), theta)
        for t in (0.0, 5.0):
            u = formation_input(fleet, square_spec(), build_laplacian(RING), PARAMS, t)
            np.testing.assert_allclose(u, 0.0, atol=1e-12)

    def test_common_shift_invariance(self, rng):
        spec = square_spec()
        theta = rng.uniform(-3, 3, 4)
        hands = rng.uniform(0, 3, (4, 2))
        L = build_laplacian(RING)
        a = formation_input(_fleet_at(hands, theta), spec, L, PARAMS, 1.0)
        b = formation_input(_fleet_at(hands + [5.0, -2.0], theta), spec, L, PARAMS, 1.0)
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_displacement_error(self):
        spec = square_spec()
        assert displacement_error(spec.targets, spec, RING) == 0.0
        shifted = spec.targets.copy()
        shifted[0] += [0.1, 0.0]
        assert displacement_error(shifted, spec, RING) == pytest.approx(0.2)


GUARD = IntegratorConfig(eps_guard=1e-3)


@pytest.fixture(scope="module")
def formation_run():
    rng = np.random.default_rng(0)
    fleet = [UnicycleState(p=rng.uniform(0, 3, 2), theta=th) for th in (0.0, math.pi / 2, math.pi / 3, math.pi / 6)]
    return fleet, integrate_formation(fleet, square_spec(), RING, PARAMS, GUARD)


class TestIntegrate:
    def test_already_in_formation(self):
        fleet = _fleet_at(square_spec().targets, [0.0, 0.5, 1.0, 1.5])
        traj = integrate_formation(fleet, square_spec(), RING, PARAMS)
        assert np.max(traj.extras["disp_err"]) < 1e-12
        assert np.max(np.abs(traj.v)) < 1e-12

    def test_two_robots(self):
        spec = FormationSpec(2, {(1, 2): [1.0, 0.0]})
        fleet = [UnicycleState([0.0, 0.0], 0.3), UnicycleState([0.2, 0.5], -1.0)]
        params = FwatParams(eta=2.0, t0=0.0, tf=4.0, eta2=2.0, t1=2.0)
        traj = integrate_formation(fleet, spec, path_graph(2), params)
        rel = np.array([traj.extras["hx_2"][-1] - traj.extras["hx_1"][-1],
                        traj.extras["hy_2"][-1] - traj.extras["hy_1"][-1]])
        np.testing.assert_allclose(rel, [1.0, 0.0], atol=1e-3)

    @pytest.fixture
    def square_run(self, formation_run):
        return formation_run

    def test_square_reached(self, square_run):
        _, traj = square_run
        assert traj.extras["disp_err"][-1] < 1e-2
        assert traj.times[-1] == 8.0 - 1e-3
        assert traj.dim == 2

    def test_hand_columns_consistent(self, square_run):
        _, traj = square_run
        k = traj.times.size // 2
        for i in range(1, 5):
            s = UnicycleState([traj.extras[f"px_{i}"][k], traj.extras[f"py_{i}"][k]], traj.extras[f"theta_{i}"][k])
            np.testing.assert_allclose(hand_position(s), [traj.extras[f"hx_{i}"][k], traj.extras[f"hy_{i}"][k]])

    def test_translation_invariance(self, square_run):
        fleet, traj = square_run
        shift = np.array([10.0, -4.0])
        moved = [UnicycleState(p=s.p + shift, theta=s.theta) for s in fleet]
        traj2 = integrate_formation(moved, square_spec(), RING, PARAMS, GUARD)
        for i in range(1, 5):
            assert traj2.extras[f"hx_{i}"][-1] - shift[0] == pytest.approx(traj.extras[f"hx_{i}"][-1], abs=1e-4)
            assert traj2.extras[f"hy_{i}"][-1] - shift[1] == pytest.approx(traj.extras[f"hy_{i}"][-1], abs=1e-4)

    def test_spec_graph_mismatch(self):
        fleet = _fleet_at(square_spec().targets, [0.0] * 4)
        with pytest.raises(ValueError):
            integrate_formation(fleet, square_spec(), Topology(4, [(1, 3), (2, 4), (1, 2)]), PARAMS)
