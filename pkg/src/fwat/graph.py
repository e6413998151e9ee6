"""Undirected interaction graphs, Laplacians and switching schedules.

Node labels are 1-based (``1..n``) everywhere a node is named: edge lists,
neighbor maps, text files.  Array positions are ``label - 1``.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .linalg import symmetric_eigvalsh

__all__ = [
    "CONNECTIVITY_TOL",
    "Topology",
    "LaplacianMatrix",
    "SwitchingSchedule",
    "build_laplacian",
    "algebraic_connectivity",
    "is_connected",
    "min_lambda2",
    "active_laplacian",
    "path_graph",
    "ring_graph",
    "complete_graph",
    "empty_graph",
    "fig1a_graphs",
    "periodic_schedule",
    "read_edge_list",
    "write_edge_list",
    "read_schedule",
    "GraphSource",
    "resolve_graph",
]

# lambda2 above this counts as connected in the eigenvalue cross-check
CONNECTIVITY_TOL = 1e-9


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph on nodes ``1..n``.

    Edges are stored as sorted pairs ``(i, j)`` with ``i < j``, so ``(2, 1)``
    and ``(1, 2)`` name the same edge.
    """

    n: int
    edges: frozenset[tuple[int, int]] = frozenset()

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = ()):
        n = int(n)
        if n < 1:
            raise ValueError(f"node count must be positive, got {n}")
        canon = set()
        for e in edges:
            i, j = (int(k) for k in e)
            if i == j:
                raise ValueError(f"self-loop ({i}, {i}) not allowed")
            if not (1 <= i <= n and 1 <= j <= n):
                raise ValueError(f"edge ({i}, {j}) has an endpoint outside 1..{n}")
            pair = (min(i, j), max(i, j))
            if pair in canon:
                raise ValueError(f"duplicate edge {pair}")
            canon.add(pair)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", frozenset(canon))

    def neighbors(self, i: int) -> list[int]:
        """Sorted neighbor labels of node ``i``."""
        out = [b for a, b in self.edges if a == i] + [a for a, b in self.edges if b == i]
        return sorted(out)

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class LaplacianMatrix:
    """Graph Laplacian with its algebraic connectivity cached.

    ``entries`` is a read-only array.  The unweighted Laplacian has integer
    entries, so row sums are exactly zero in floating point.
    """

    entries: np.ndarray
    lambda2: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def build_laplacian(topology: Topology) -> LaplacianMatrix:
    """Laplacian ``D - A`` of an undirected graph, with lambda2 cached."""
    n = topology.n
    if n < 2:
        raise ValueError("a Laplacian needs at least 2 nodes")
    m = np.zeros((n, n))
    for i, j in topology.edges:
        m[i - 1, j - 1] = -1.0
        m[j - 1, i - 1] = -1.0
        m[i - 1, i - 1] += 1.0
        m[j - 1, j - 1] += 1.0
    m.setflags(write=False)
    return LaplacianMatrix(entries=m, lambda2=_lambda2(m))


def _lambda2(m: np.ndarray) -> float:
    ev = symmetric_eigvalsh(m)
    # lambda_1 is zero analytically; clamp round-off so disconnection reads as 0
    lam = float(ev[1])
    return lam if lam > CONNECTIVITY_TOL else 0.0


def algebraic_connectivity(L: LaplacianMatrix | np.ndarray) -> float:
    """Second-smallest Laplacian eigenvalue; 0 for disconnected graphs."""
    if isinstance(L, LaplacianMatrix):
        return L.lambda2
    return _lambda2(np.asarray(L, dtype=float))


def is_connected(topology: Topology) -> bool:
    """Breadth-first reachability from node 1."""
    n = topology.n
    adj: dict[int, list[int]] = {k: [] for k in range(1, n + 1)}
    for i, j in topology.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {1}
    queue = deque([1])
    while queue:
        k = queue.popleft()
        for j in adj[k]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


# ---------------------------------------------------------------------------
# named families


def path_graph(n: int) -> Topology:
    return Topology(n, [(k, k + 1) for k in range(1, n)])


def ring_graph(n: int) -> Topology:
    if n < 3:
        raise ValueError("a ring needs at least 3 nodes")
    return Topology(n, [(k, k + 1) for k in range(1, n)] + [(n, 1)])


def complete_graph(n: int) -> Topology:
    return Topology(n, [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)])


def empty_graph(n: int) -> Topology:
    return Topology(n, [])


def fig1a_graphs() -> tuple[Topology, Topology, Topology]:
    """The three 4-node switching topologies used in the Example 1 scenario."""
    return (
        Topology(4, [(1, 2), (1, 4), (2, 3)]),
        Topology(4, [(1, 4), (2, 3), (3, 4)]),
        Topology(4, [(1, 2), (1, 4), (3, 4)]),
    )


# ---------------------------------------------------------------------------
# switching


@dataclass(frozen=True)
class SwitchingSchedule:
    """Piecewise-constant topology signal.

    Interval ``k`` is ``[switch_times[k], switch_times[k+1])`` and uses
    ``topologies[indices[k] - 1]``; the last interval is open-ended.
    Topology indices are 1-based.  A topology listed in ``holidays`` must be
    edgeless and is excluded from ``min_lambda2``; every other topology must be
    connected.
    """

    topologies: tuple[Topology, ...]
    switch_times: tuple[float, ...]
    indices: tuple[int, ...]
    min_dwell: float
    holidays: frozenset[int] = frozenset()
    laplacians: tuple[LaplacianMatrix, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tops = tuple(self.topologies)
        times = tuple(float(t) for t in self.switch_times)
        idx = tuple(int(k) for k in self.indices)
        holidays = frozenset(int(k) for k in self.holidays)
        object.__setattr__(self, "topologies", tops)
        object.__setattr__(self, "switch_times", times)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "holidays", holidays)

        if not tops:
            raise ValueError("schedule needs at least one topology")
        if len({t.n for t in tops}) != 1:
            raise ValueError("all topologies must share the same node count")
        if not times or len(times) != len(idx):
            raise ValueError("switch_times and indices must be non-empty and equal length")
        if not self.min_dwell > 0:
            raise ValueError("min_dwell must be positive")
        for a, b in zip(times, times[1:]):
            if not b - a > self.min_dwell:
                raise ValueError(
                    f"switch times {a} -> {b} violate the minimum dwell {self.min_dwell}"
                )
        rho = len(tops)
        for k in idx:
            if not 1 <= k <= rho:
                raise ValueError(f"topology index {k} outside 1..{rho}")
        for k in holidays:
            if not 1 <= k <= rho:
                raise ValueError(f"holiday index {k} outside 1..{rho}")
            if tops[k - 1].edges:
                raise ValueError(f"holiday topology {k} must be edgeless")
        for k, top in enumerate(tops, start=1):
            if k not in holidays and not is_connected(top):
                raise ValueError(f"topology {k} is not connected and is not flagged as a holiday")
        object.__setattr__(self, "laplacians", tuple(build_laplacian(t) for t in tops))

    @classmethod
    def constant(cls, topology: Topology, t0: float = 0.0) -> "SwitchingSchedule":
        """A schedule that never switches."""
        return cls((topology,), (t0,), (1,), min_dwell=1.0)

    @property
    def n(self) -> int:
        return self.topologies[0].n

    def active_index(self, t: float) -> int:
        """1-based topology index active at time ``t`` (closed-left intervals)."""
        if t < self.switch_times[0]:
            raise ValueError(f"t={t} precedes the first switch time {self.switch_times[0]}")
        k = bisect.bisect_right(self.switch_times, t) - 1
        return self.indices[k]

    def event_times(self, t_start: float, t_end: float) -> list[float]:
        """Switch times strictly inside ``(t_start, t_end)``."""
        return [t for t in self.switch_times if t_start < t < t_end]


def min_lambda2(schedule: SwitchingSchedule) -> float:
    """Smallest lambda2 over the non-holiday topologies of a schedule."""
    used = {k for k in schedule.indices if k not in schedule.holidays}
    if not used:
        raise ValueError("every interval of the schedule is a holiday")
    return min(schedule.laplacians[k - 1].lambda2 for k in used)


def active_laplacian(schedule: SwitchingSchedule, t: float) -> LaplacianMatrix:
    return schedule.laplacians[schedule.active_index(t) - 1]


def periodic_schedule(
    topologies: Sequence[Topology],
    period: float,
    t0: float,
    tf: float,
    min_dwell: float | None = None,
) -> SwitchingSchedule:
    """Cycle through ``topologies`` in order, switching every ``period`` seconds."""
    if period <= 0:
        raise ValueError("period must be positive")
    count = int(np.ceil((tf - t0) / period - 1e-12))
    times = [t0 + k * period for k in range(max(count, 1))]
    idx = [k % len(topologies) + 1 for k in range(len(times))]
    return SwitchingSchedule(
        tuple(topologies), tuple(times), tuple(idx),
        min_dwell=period / 2 if min_dwell is None else min_dwell,
    )


GraphSource = Union[Topology, LaplacianMatrix, SwitchingSchedule]


def resolve_graph(source: GraphSource) -> SwitchingSchedule | LaplacianMatrix:
    """Normalize a graph argument: topologies become their Laplacian."""
    if isinstance(source, Topology):
        return build_laplacian(source)
    if isinstance(source, (LaplacianMatrix, SwitchingSchedule)):
        return source
    raise TypeError(f"unsupported graph source {type(source).__name__}")


# ---------------------------------------------------------------------------
# text formats


def _content_lines(text: str) -> list[list[str]]:
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    return rows


def read_edge_list(path: str | Path) -> Topology:
    """Parse ``n <count>`` followed by one ``i j`` edge per line."""
    rows = _content_lines(Path(path).read_text())
    if not rows or rows[0][0] != "n" or len(rows[0]) != 2:
        raise ValueError(f"{path}: first line must be 'n <count>'")
    n = int(rows[0][1])
    edges = []
    for row in rows[1:]:
        if len(row) != 2:
            raise ValueError(f"{path}: bad edge line {' '.join(row)!r}")
        edges.append((int(row[0]), int(row[1])))
    return Topology(n, edges)


def write_edge_list(topology: Topology, path: str | Path) -> None:
    lines = [f"n {topology.n}"] + [f"{i} {j}" for i, j in topology.sorted_edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_schedule(
    path: str | Path,
    topologies: Sequence[Topology],
    holidays: Iterable[int] = (),
) -> SwitchingSchedule:
    """Parse ``t_k topology_index`` lines plus one ``dwell <tau_s>`` line."""
    rows = _content_lines(Path(path).read_text())
    times, idx, dwell = [], [], None
    for row in rows:
        if row[0] == "dwell":
            dwell = float(row[1])
        elif len(row) == 2:
            times.append(float(row[0]))
            idx.append(int(row[1]))
        else:
            raise ValueError(f"{path}: bad schedule line {' '.join(row)!r}")
    if dwell is None:
        raise ValueError(f"{path}: missing 'dwell' line")
    return SwitchingSchedule(tuple(topologies), tuple(times), tuple(idx), dwell, frozenset(holidays))
