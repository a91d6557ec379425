import numpy as np
import pytest

from lqnash.game import GameInstance
from lqnash.io import g1_preset, generate_instance

ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail=""):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scalar_gare_oracle(a, b1, b2, q, r1, r2):
    """Stabilizing root of the scalar game Riccati equation by bisection.

    With ``t = b1^2/r1 - b2^2/r2`` the equation reads ``x = q + a^2 x / (1 + t x)``.
    The stabilizing root is the one with closed loop ``|a / (1 + t x)| < 1``.
    """
    t = b1 * b1 / r1 - b2 * b2 / r2

    def h(x):
        return q + a * a * x / (1.0 + t * x) - x

    # on x > 0 with t > 0, h(0) = q > 0 and h -> -inf, single sign change
    hi = 1.0
    while h(hi) > 0:
        hi *= 2.0
    x = bisect(h, 0.0, hi)
    assert abs(a / (1.0 + t * x)) < 1.0
    return x


def scalar_dare_oracle(a, b, q, r):
    """Stabilizing root of ``x = q + a^2 x - a^2 b^2 x^2 / (r + b^2 x)`` by bisection."""

    def h(x):
        return q + a * a * x - (a * b * x) ** 2 / (r + b * b * x) - x

    lo = -r / (b * b) * (1 - 1e-12)
    hi = 1.0
    while h(hi) > 0:
        hi *= 2.0
    # the stabilizing root is the larger one: move lo up to where h turns positive
    grid = np.linspace(lo, hi, 20001)
    vals = [h(x) for x in grid]
    idx = max(i for i in range(len(grid) - 1) if vals[i] > 0 >= vals[i + 1])
    return bisect(h, grid[idx], grid[idx + 1])


def lyapunov_series(A, Q, terms=4000):
    """``sum_t (A^T)^t Q A^t`` by direct summation."""
    X = np.zeros_like(Q, dtype=float)
    P = np.eye(A.shape[0])
    for _ in range(terms):
        X += P.T @ Q @ P
        P = P @ A
    return X


G1_X_STAR = scalar_gare_oracle(1.2, 1.0, 0.5, 1.0, 1.0, 5.0)


@pytest.fixture(scope="session")
def g1():
    return g1_preset()


@pytest.fixture(scope="session")
def random_games():
    """Twenty seeded instances, n <= 6 and m1, m2 <= 3, solvable from L0 = 0."""
    return [generate_instance(1 + s % 6, 1 + s % 3, 1 + (s // 3) % 3, s) for s in range(20)]


@pytest.fixture(scope="session")
def indefinite_games():
    return [generate_instance(3, 1 + s % 2, 1 + s % 3, 100 + s, indefinite_at_ne=True) for s in range(10)]


def random_stable(rng, n, radius=0.9):
    A = rng.standard_normal((n, n))
    return A * (radius / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12))


def small_game(seed=0, n=3, m1=2, m2=1):
    rng = np.random.default_rng(seed)
    return GameInstance(
        random_stable(rng, n, 0.8),
        rng.standard_normal((n, m1)),
        rng.standard_normal((n, m2)),
        np.eye(n),
        np.eye(m1),
        10.0 * np.eye(m2),
    )
