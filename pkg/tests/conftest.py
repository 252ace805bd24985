import numpy as np
import pytest

from cycdr import geometry as g

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS, key=lambda c: int(c[1:])):
        ok, detail = ACCEPTANCE_RESULTS[cid]
        terminalreporter.write_line(f"{cid}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_convex_set(rng, n):
    """One of the convex catalogue entries with random parameters."""
    kind = rng.integers(6)
    if kind == 0:
        return g.Ball(rng.uniform(-3, 3, n), rng.uniform(0.5, 3))
    if kind == 1:
        return g.Hyperplane(rng.standard_normal(n), rng.uniform(-2, 2))
    if kind == 2:
        return g.HalfSpace(rng.standard_normal(n), rng.uniform(-2, 2))
    if kind == 3:
        k = rng.integers(0, n)
        return g.AffineSubspace(rng.uniform(-2, 2, n), rng.standard_normal((k, n)))
    if kind == 4:
        lo = rng.uniform(-3, 1, n)
        return g.Box(lo, lo + rng.uniform(0, 3, n))
    return g.Singleton(rng.uniform(-2, 2, n))


def random_subspace(rng, n, k, anchor=None):
    anchor = np.zeros(n) if anchor is None else anchor
    return g.AffineSubspace(anchor, rng.standard_normal((k, n)))
