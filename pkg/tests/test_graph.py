import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_connected
from fwat.graph import (
    CONNECTIVITY_TOL,
    SwitchingSchedule,
    Topology,
    active_laplacian,
    algebraic_connectivity,
    build_laplacian,
    complete_graph,
    empty_graph,
    fig1a_graphs,
    is_connected,
    min_lambda2,
    path_graph,
    periodic_schedule,
    read_edge_list,
    read_schedule,
    resolve_graph,
    ring_graph,
    write_edge_list,
)


def test_topology_validation():
    with pytest.raises(ValueError):
        Topology(3, [(1, 1)])
    with pytest.raises(ValueError):
        Topology(3, [(1, 4)])
    with pytest.raises(ValueError):
        Topology(3, [(1, 2), (2, 1)])
    t = Topology(3, [(2, 1), (3, 2)])
    assert t.neighbors(2) == [1, 3]
    assert t.degree(1) == 1
    assert t.sorted_edges() == [(1, 2), (2, 3)]


def test_ring4_laplacian_entries():
    L = build_laplacian(ring_graph(4))
    expected = np.array([[2, -1, 0, -1], [-1, 2, -1, 0], [0, -1, 2, -1], [-1, 0, -1, 2]], dtype=float)
    np.testing.assert_array_equal(L.entries, expected)
    assert L.lambda2 == pytest.approx(2.0, abs=1e-12)
    assert not L.entries.flags.writeable


def test_two_node_path():
    L = build_laplacian(path_graph(2))
    np.testing.assert_array_equal(L.entries, [[1, -1], [-1, 1]])
    assert L.lambda2 == pytest.approx(2.0, abs=1e-14)


def test_disconnected_lambda2_is_zero():
    L = build_laplacian(Topology(4, [(1, 2), (3, 4)]))
    assert L.lambda2 == 0.0
    assert not is_connected(Topology(4, [(1, 2), (3, 4)]))


def test_single_node_rejected():
    with pytest.raises(ValueError):
        build_laplacian(Topology(1, []))


@pytest.mark.parametrize("n", [2, 3, 5, 8, 13, 30, 60])
def test_closed_form_spectra(n):
    assert build_laplacian(path_graph(n)).lambda2 == pytest.approx(2 - 2 * math.cos(math.pi / n), abs=1e-12)
    if n >= 3:
        assert build_laplacian(ring_graph(n)).lambda2 == pytest.approx(2 - 2 * math.cos(2 * math.pi / n), abs=1e-12)
    assert build_laplacian(complete_graph(n)).lambda2 == pytest.approx(n, abs=1e-10)


def test_fig1a_graphs_are_paths():
    for top in fig1a_graphs():
        assert is_connected(top)
        assert build_laplacian(top).lambda2 == pytest.approx(2 - math.sqrt(2), abs=1e-14)
        assert sorted(top.degree(i) for i in range(1, 5)) == [1, 1, 2, 2]


@given(st.integers(2, 12), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_laplacian_properties(n, p, seed):
    top = random_connected(n, p, np.random.default_rng(seed))
    L = build_laplacian(top)
    m = L.entries
    np.testing.assert_array_equal(m, m.T)
    np.testing.assert_array_equal(m @ np.ones(n), np.zeros(n))
    assert np.all(m[~np.eye(n, dtype=bool)] <= 0)
    ev = np.linalg.eigvalsh(m)
    assert ev[0] > -1e-12
    assert L.lambda2 == pytest.approx(ev[1], abs=1e-10)
    assert L.lambda2 > CONNECTIVITY_TOL


def test_algebraic_connectivity_of_plain_array():
    assert algebraic_connectivity(np.array([[1.0, -1.0], [-1.0, 1.0]])) == pytest.approx(2.0)


def test_relabeling_invariance(rng):
    top = random_connected(7, 0.3, rng)
    perm = rng.permutation(7) + 1
    relabeled = Topology(7, [(int(perm[i - 1]), int(perm[j - 1])) for i, j in top.edges])
    assert build_laplacian(relabeled).lambda2 == pytest.approx(build_laplacian(top).lambda2, abs=1e-12)


def test_edge_list_round_trip(tmp_path, rng):
    top = random_connected(6, 0.4, rng)
    path = tmp_path / "g.txt"
    write_edge_list(top, path)
    back = read_edge_list(path)
    assert back.n == top.n and back.sorted_edges() == top.sorted_edges()


def test_edge_list_header_required(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("1 2\n")
    with pytest.raises(ValueError):
        read_edge_list(path)


class TestSchedule:
    def test_fig1a_periodic(self):
        sched = periodic_schedule(fig1a_graphs(), 0.5, 0.0, 4.0)
        assert sched.switch_times == tuple(0.5 * k for k in range(8))
        assert sched.indices == (1, 2, 3, 1, 2, 3, 1, 2)
        assert min_lambda2(sched) == pytest.approx(2 - math.sqrt(2), abs=1e-14)

    def test_closed_left_intervals(self):
        sched = periodic_schedule(fig1a_graphs(), 0.5, 0.0, 4.0)
        assert sched.active_index(0.0) == 1
        assert sched.active_index(0.4999) == 1
        assert sched.active_index(0.5) == 2
        assert active_laplacian(sched, 1.0).entries is sched.laplacians[2].entries
        with pytest.raises(ValueError):
            sched.active_index(-0.1)

    def test_dwell_violation(self):
        tops = fig1a_graphs()
        with pytest.raises(ValueError):
            SwitchingSchedule(tops, (0.0, 0.1), (1, 2), min_dwell=0.25)

    def test_disconnected_needs_holiday_flag(self):
        tops = (ring_graph(4), empty_graph(4))
        with pytest.raises(ValueError):
            SwitchingSchedule(tops, (0.0, 1.0), (1, 2), min_dwell=0.5)
        sched = SwitchingSchedule(tops, (0.0, 1.0), (1, 2), min_dwell=0.5, holidays={2})
        assert min_lambda2(sched) == pytest.approx(2.0)

    def test_all_holiday_rejected(self):
        sched = SwitchingSchedule((empty_graph(3),), (0.0,), (1,), min_dwell=1.0, holidays={1})
        with pytest.raises(ValueError):
            min_lambda2(sched)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            SwitchingSchedule(fig1a_graphs(), (0.0,), (4,), min_dwell=1.0)

    def test_event_times(self):
        sched = periodic_schedule(fig1a_graphs(), 0.5, 0.0, 4.0)
        assert sched.event_times(0.0, 1.6) == [0.5, 1.0, 1.5]

    def test_read_schedule(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("# t index\n0 1\n0.5 2\n1.0 3\ndwell 0.25\n")
        sched = read_schedule(path, fig1a_graphs())
        assert sched.indices == (1, 2, 3) and sched.min_dwell == 0.25
        path.write_text("0 1\n")
        with pytest.raises(ValueError):
            read_schedule(path, fig1a_graphs())


def test_resolve_graph():
    top = ring_graph(5)
    assert resolve_graph(top).lambda2 == pytest.approx(2 - 2 * math.cos(2 * math.pi / 5))
    with pytest.raises(TypeError):
        resolve_graph("ring")
