import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mpc_emst.geometry import PointSet

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class DSU:
    """Plain union-find used as an oracle in tests."""

    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.p[rb] = ra
        return True


def is_spanning_tree(n, edges):
    if len(edges) != max(n - 1, 0):
        return False
    dsu = DSU(n)
    return all(dsu.union(u, v) for u, v in edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(n, d, seed):
    return PointSet(np.random.default_rng([seed, 77]).random((n, d)))


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
