import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import G1_X_STAR, small_game
from lqnash import linalg
from lqnash.diagnostics import (
    comparison2_residual,
    comparison_residual,
    cost_gaps,
    fd_gradient_check,
    geometric_ratio,
    hessian_g_action,
    hessian_probe,
    leader_value,
    nash_certificate,
    quadratic_rate,
    sublinear_certificate,
    tail_log_slope,
)
from lqnash.errors import StabilityError
from lqnash.game import (
    Assumption,
    closed_loop,
    natural_gradients,
    o_matrix,
    riccati_map,
    value_certificate,
)
from lqnash.inner import inner_solve
from lqnash.outer import ng_outer, qn_outer

K_STAR = 1.2 * G1_X_STAR / (1.0 + 0.95 * G1_X_STAR)
L_STAR = -0.1 * K_STAR


def _random_pair(g, rng, scale):
    while True:
        K = scale * rng.standard_normal((g.m1, g.n))
        L = scale * rng.standard_normal((g.m2, g.n))
        if linalg.is_schur(closed_loop(g, K, L)):
            return K, L


def test_comparison_identity_trivial_on_equal_pairs():
    g = small_game(0)
    p = _random_pair(g, np.random.default_rng(0), 0.1)
    assert comparison_residual(g, p, p, "A") == 0.0
    assert comparison_residual(g, p, p, "B") == 0.0


def test_comparison_identity_on_g1_pairs(g1):
    rng = np.random.default_rng(1)
    for _ in range(10):
        p1 = (np.array([[K_STAR + 0.3 * rng.standard_normal()]]), np.array([[L_STAR + 0.1 * rng.standard_normal()]]))
        p2 = (np.array([[K_STAR + 0.3 * rng.standard_normal()]]), np.array([[L_STAR + 0.1 * rng.standard_normal()]]))
        if not all(linalg.is_schur(closed_loop(g1, *p)) for p in (p1, p2)):
            continue
        assert comparison_residual(g1, p1, p2, "A") <= 1e-10
        assert comparison_residual(g1, p1, p2, "B") <= 1e-10


def test_comparison_rejects_unknown_form(g1):
    p = ([[K_STAR]], [[L_STAR]])
    with pytest.raises(ValueError):
        comparison_residual(g1, p, p, "C")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), form=st.sampled_from("AB"))
def test_comparison_identity_is_exact(seed, form):
    g = small_game(seed % 4)
    rng = np.random.default_rng(seed)
    p1, p2 = _random_pair(g, rng, 0.2), _random_pair(g, rng, 0.2)
    scale = max(np.linalg.norm(value_certificate(g, *p).X) for p in (p1, p2))
    assert comparison_residual(g, p1, p2, form) <= 1e-9 * max(1.0, scale)


def test_comparison2_trivial_and_near_equilibrium(g1):
    assert comparison2_residual(g1, [[L_STAR]], [[L_STAR]]) == pytest.approx((0.0, 0.0), abs=1e-12)
    r1, r2 = comparison2_residual(g1, [[L_STAR + 0.01]], [[L_STAR]])
    assert r1 <= 1e-9 and r2 <= 1e-9


def test_riccati_map_after_a_leader_step_is_psd(random_games):
    """With ``L = Lt + 2 eta V`` the follower Riccati map equals ``V'(4 eta - 4 eta^2 O)V``."""
    g = random_games[5]
    Lt = np.zeros((g.m2, g.n))
    rep = inner_solve(g, Lt, tol=1e-13)
    Xt = rep.X_plus
    _, V = natural_gradients(g, rep.K_opt, Lt, Xt)
    O = o_matrix(g, Xt)
    lam = linalg.lambda_max(O)
    for eta in (0.25 / lam, 0.5 / lam, 1.0 / lam):
        L = Lt + 2 * eta * V
        Rm = riccati_map(g.A - g.B2 @ L, g.B1, g.Q - L.T @ g.R2 @ L, g.R1, Xt)
        expected = V.T @ (4 * eta * np.eye(g.m2) - 4 * eta**2 * O) @ V
        np.testing.assert_allclose(Rm, expected, atol=1e-9 * max(1.0, np.linalg.norm(Xt)))
        assert linalg.lambda_min(Rm) >= -1e-9


def test_hessian_zero_direction(g1):
    assert hessian_g_action(g1, [[0.0]], [[0.0]]) == 0.0


def test_hessian_matches_second_difference(random_games):
    rng = np.random.default_rng(3)
    for g in random_games[1:4]:
        Ls = qn_outer(g, tol=1e-12).L_star
        for _ in range(3):
            L = Ls + 0.01 * rng.standard_normal(Ls.shape)
            p = hessian_probe(g, L, rng.standard_normal(Ls.shape))
            assert abs(p.value - p.fd_value) <= 1e-4 * max(1.0, abs(p.fd_value))


def test_hessian_at_equilibrium_simplifies(random_games):
    """At L* the form is ``-2 <O E, E Y>`` and the factor 2 agrees with finite differences."""
    rng = np.random.default_rng(4)
    g = random_games[3]
    sol = qn_outer(g, tol=1e-12)
    O = o_matrix(g, sol.X_star)
    Y = linalg.solve_dual_lyapunov(closed_loop(g, sol.K_star, sol.L_star), g.Sigma)
    for _ in range(5):
        E = rng.standard_normal(sol.L_star.shape)
        simple = -2.0 * np.sum((O @ E) * (E @ Y))
        assert hessian_g_action(g, sol.L_star, E) == pytest.approx(simple, rel=1e-7)
        fd = hessian_probe(g, sol.L_star, E).fd_value
        assert fd == pytest.approx(simple, rel=1e-4)
        assert abs(fd - simple / 2) > 0.25 * abs(simple)


def test_leader_value_is_maximized_at_equilibrium(g1):
    top = leader_value(g1, [[L_STAR]])
    assert top == pytest.approx(G1_X_STAR, abs=1e-10)
    for dL in (-0.05, 0.05):
        assert leader_value(g1, [[L_STAR + dL]]) < top


def test_certificate_examples(g1):
    good = nash_certificate(g1, [[K_STAR]], [[L_STAR]])
    assert good.passed and good.assumption is Assumption.BOTH
    off = nash_certificate(g1, [[K_STAR]], [[L_STAR + 0.1]])
    assert not off.passed and off.stationarity_L > 1e-8
    bad = nash_certificate(g1, [[0.0]], [[0.0]])
    assert not bad.passed and bad.rho >= 1.0
    assert bad.to_dict()["pass"] is False


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fd_gradient_check_three_instances(seed):
    g = small_game(seed)
    K, L = _random_pair(g, np.random.default_rng(seed), 0.2)
    assert fd_gradient_check(g, K, L) <= 1e-5


def test_fd_gradient_check_shrinks_near_boundary(g1):
    # closed loop 1.2 - K - 0.5 L sits just inside the unit circle
    K = np.array([[0.2 + 1e-7]])
    L = np.zeros((1, 1))
    assert fd_gradient_check(g1, K, L, step=1e-6) < 1e-2


def test_fd_gradient_check_rejects_inadmissible(g1):
    with pytest.raises(StabilityError):
        fd_gradient_check(g1, [[0.0]], [[0.0]])


def test_rate_helpers_on_synthetic_sequences():
    geo = 0.5 ** np.arange(30)
    assert geometric_ratio(geo) == pytest.approx(0.5)
    assert tail_log_slope([1.0]) is None
    quad = [1e-1, 1e-2, 1e-4, 1e-8]
    q, ok, checked = quadratic_rate(quad, start_below=1.0)
    assert q == pytest.approx(1.0) and ok and checked == 2
    q, ok, _ = quadratic_rate([1e-3, 1e-4, 1e-5, 1e-6], start_below=1.0)
    assert not ok  # linear decay violates the quadratic bound
    np.testing.assert_allclose(cost_gaps([1.0, 3.0, 4.0]), [3.0, 1.0, 0.0])


def test_sublinear_certificate_sides_from_trace(g1):
    tr = ng_outer(g1).trace
    lhs, rhs = sublinear_certificate(tr)
    costs = tr.column("cost")
    eta = min(1.0 / r.lambda_max_O for r in tr.records)
    assert lhs == pytest.approx(sum(r.ng_norm**2 for r in tr.records))
    assert rhs == pytest.approx((costs[-1] - costs[0]) / eta)
