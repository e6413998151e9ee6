import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("fwat", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fwat")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_connected(n: int, p: float, rng: np.random.Generator):
    """Random spanning tree plus extra edges with probability ``p``."""
    from fwat.graph import Topology

    order = rng.permutation(n) + 1
    edges = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, n)}
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if rng.random() < p:
                edges.add((i, j))
    return Topology(n, sorted(edges))


# filled by test_acceptance.py, one (criterion, passed, detail) per criterion
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
