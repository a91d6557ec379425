"""Acceptance criteria 1-10, each printing one PASS/FAIL line.

The summary lines are also collected into the pytest terminal summary under
"acceptance criteria".
"""

import ast
import pathlib
import time

import numpy as np
import pytest

import lqnash
from conftest import G1_X_STAR, record_criterion
from lqnash import linalg
from lqnash.diagnostics import (
    comparison2_residual,
    comparison_residual,
    cost_gaps,
    fd_gradient_check,
    geometric_ratio,
    hessian_g_action,
    hessian_probe,
    quadratic_rate,
    sublinear_certificate,
    tail_log_slope,
)
from lqnash.errors import LQNashError
from lqnash.game import Assumption, closed_loop, gare_residual, value_certificate
from lqnash.inner import inner_solve, solve_lqr
from lqnash.io import generate_instance
from lqnash.outer import Leader, ng_outer, ng_outer_leader_k, qn_outer, validate_init_L
from lqnash.rates import noise_floor

STABILITY_MARGIN = 1e-12


@pytest.fixture(scope="module")
def c1_runs(g1):
    t0 = time.perf_counter()
    runs = {f.__name__: f(g1) for f in (ng_outer, qn_outer, ng_outer_leader_k)}
    return runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def c2_runs(random_games):
    t0 = time.perf_counter()
    runs = [qn_outer(g, tol=1e-10) for g in random_games]
    return runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def c4_runs(g1, random_games):
    return [ng_outer(g, max_iter=5000) for g in [g1, *random_games]]


def _all_runs(c1_runs, c2_runs, c4_runs):
    return [*c1_runs[0].values(), *c2_runs[0], *c4_runs]


def test_criterion_1_scalar_gare_oracle(c1_runs):
    runs, elapsed = c1_runs
    gaps = {name: abs(sol.X_star[0, 0] - G1_X_STAR) for name, sol in runs.items()}
    ok = max(gaps.values()) <= 1e-7 and elapsed < 1.0
    record_criterion(1, ok, f"max |dx| = {max(gaps.values()):.1e}, runtime {elapsed:.3f} s")
    assert ok


def test_criterion_2_gare_residual(random_games, c2_runs):
    runs, elapsed = c2_runs
    for g in random_games:
        validate_init_L(g, np.zeros((g.m2, g.n)))
    res = [np.linalg.norm(gare_residual(g, s.X_star)) for g, s in zip(random_games, runs)]
    passed = [s.certificate.passed for s in runs]
    ok = max(res) <= 1e-7 and all(passed) and elapsed < 30.0 and len(runs) == 20
    record_criterion(2, ok, f"20 instances, max GARE residual {max(res):.1e}, "
                            f"{sum(passed)}/20 certified, {elapsed:.2f} s")
    assert ok


def test_criterion_3_quadratic_rate(c2_runs):
    runs, _ = c2_runs
    worst_rounds, fitted, all_ok = 0, 0, True
    for s in runs:
        costs = np.array(s.trace.column("cost"))
        gaps = cost_gaps(costs)
        q, ok, _ = quadratic_rate(gaps, start_below=1e-2, slack=10.0, floor=noise_floor(costs[-1]))
        fitted += q is not None
        all_ok &= bool(ok)
        worst_rounds = max(worst_rounds, len(s.trace) - 1)
    ok = all_ok and worst_rounds <= 12
    record_criterion(3, ok, f"quadratic bound held on all tails ({fitted}/20 with a fitted q), "
                            f"max {worst_rounds} rounds to 1e-10")
    assert ok


def test_criterion_4_literal_sublinear_bound(g1, random_games, c4_runs):
    """The telescoped bound exactly as stated: sum ||N_g||^2 <= (1/eta)(g_final - g_0).

    It does not hold. The step taken is 1/(2 lambda_max(O_j)) while the bound
    uses eta = min_j 1/lambda_max(O_j), and with N_g = 2V each round gains at
    least (eta/4) lambda_min(Sigma) ||N_g||^2. The provable bound therefore
    carries a factor 4 / lambda_min(Sigma). Runs exceed the literal bound by
    factors between 1.6 and 3.6, all below 4.
    """
    ratios = []
    for s in c4_runs:
        lhs, rhs = sublinear_certificate(s.trace)
        ratios.append(lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf))
    slopes = [tail_log_slope(cost_gaps(s.trace.column("cost")),
                             floor=noise_floor(s.trace.column("cost")[-1])) for s in c4_runs]
    slope_ok = all(sl is not None and sl < 0 for sl in slopes)
    literal_ok = max(ratios) <= 1.0
    corrected_ok = all(r <= 4.0 / linalg.lambda_min(g.Sigma) * (1 + 1e-9)
                       for r, g in zip(ratios, [g1, *random_games]))
    record_criterion(4, literal_ok and slope_ok,
                     f"literal bound {'held' if literal_ok else 'violated'} (max lhs/rhs {max(ratios):.2f}); "
                     f"corrected 4/lambda_min(Sigma) bound {'held' if corrected_ok else 'violated'}; "
                     f"tail slopes {'all negative' if slope_ok else 'not all negative'}")
    if not literal_ok:
        pytest.xfail("stated constant too small by up to a factor 4; see the decisions ledger")
    assert slope_ok


def test_criterion_4_corrected_bound_and_linear_tail(g1, random_games, c4_runs):
    for g, s in zip([g1, *random_games], c4_runs):
        lhs, rhs = sublinear_certificate(s.trace)
        assert lhs <= 4.0 / linalg.lambda_min(g.Sigma) * rhs * (1 + 1e-9) + 1e-15
        costs = s.trace.column("cost")
        slope = tail_log_slope(cost_gaps(costs), floor=noise_floor(costs[-1]))
        assert slope is not None and slope < 0


def _projection_identifiers():
    hits = []
    root = pathlib.Path(lqnash.__file__).parent
    for path in root.glob("*.py"):
        for node in ast.walk(ast.parse(path.read_text())):
            name = None
            if isinstance(node, (ast.FunctionDef, ast.ClassDef)):
                name = node.name
            elif isinstance(node, ast.Name):
                name = node.id
            elif isinstance(node, ast.Attribute):
                name = node.attr
            if name and any(tok in name.lower() for tok in ("proj", "clip")):
                hits.append(f"{path.name}:{name}")
    return hits


def test_criterion_5_stability_without_projection(c1_runs, c2_runs, c4_runs):
    runs = _all_runs(c1_runs, c2_runs, c4_runs)
    n_rec = sum(len(s.trace) for s in runs)
    outer_ok = all(r.rho < 1 - STABILITY_MARGIN for s in runs for r in s.trace.records)
    inner_ok = all(r.inner_rho_max < 1 - STABILITY_MARGIN for s in runs for r in s.trace.records)
    hits = _projection_identifiers()
    ok = outer_ok and inner_ok and not hits
    record_criterion(5, ok, f"{len(runs)} runs, {n_rec} outer records with their inner iterates stable; "
                            f"projection identifiers found: {len(hits)}")
    assert ok, hits


def test_criterion_6_monotone_values_and_curvature(c1_runs, c2_runs, c4_runs):
    runs = [s for s in _all_runs(c1_runs, c2_runs, c4_runs) if s.trace.leader is Leader.L]
    worst_mono, worst_O = np.inf, np.inf
    for s in runs:
        recs = s.trace.records
        worst_O = min(worst_O, min(r.lambda_min_O for r in recs))
        for prev, cur in zip(recs, recs[1:]):
            worst_mono = min(worst_mono, linalg.lambda_min(cur.X - prev.X))
    ok = worst_mono >= -1e-10 and worst_O > 0
    record_criterion(6, ok, f"{len(runs)} L-leader runs, min lambda(X_j - X_j-1) {worst_mono:.1e}, "
                            f"min lambda(O_j) {worst_O:.3g}")
    assert ok


def test_criterion_7_inner_rates_on_indefinite_weights(indefinite_games):
    qn_iters, ratios, ok = [], [], True
    for g in indefinite_games:
        L = qn_outer(g, tol=1e-10).L_star
        Qeff = g.Q - L.T @ g.R2 @ L
        ok &= linalg.lambda_min(Qeff) < 0
        ref = inner_solve(g, L, "qn", tol=1e-13)
        qn = inner_solve(g, L, "qn", tol=1e-12, max_iter=10)
        errs = [np.linalg.norm(K - ref.K_opt) for K in qn.gain_trace]
        _, quad_ok, _ = quadratic_rate(errs, start_below=1e-2, slack=10.0, floor=1e-13)
        ok &= bool(quad_ok) and qn.final_grad_norm <= 1e-12 and qn.iterations <= 10
        qn_iters.append(qn.iterations)
        for method in ("ng", "gradient"):
            rep = inner_solve(g, L, method, tol=1e-9, max_iter=20_000)
            errs = [np.linalg.norm(K - ref.K_opt) for K in rep.gain_trace]
            r = geometric_ratio(errs, floor=1e-12)
            ratios.append(r)
            ok &= r is not None and r < 1.0
            ok &= all(rho < 1.0 for rho in rep.rho_trace)
        ok &= all(rho < 1.0 for rho in qn.rho_trace)
    record_criterion(7, ok, f"10 indefinite instances, quasi-Newton {max(qn_iters)} iterations max to 1e-12, "
                            f"max fitted geometric ratio {max(ratios):.3f}")
    assert ok


def _admissible_pair(g, K0, L0, rng, scale):
    while True:
        K = K0 + scale * rng.standard_normal(K0.shape)
        L = L0 + scale * rng.standard_normal(L0.shape)
        if linalg.is_schur(closed_loop(g, K, L), margin=1e-3):
            return K, L


def _in_domain_L(g, L0, rng, scale):
    while True:
        L = L0 + scale * rng.standard_normal(L0.shape)
        try:
            inner_solve(g, L, tol=1e-13)
            return L
        except LQNashError:
            scale *= 0.5


def test_criterion_8_comparison_identities(g1, random_games):
    rng = np.random.default_rng(8)
    games = [g1, *random_games[1:5]]
    worst, count = 0.0, 0
    for g in games:
        sol = qn_outer(g, tol=1e-10)
        for _ in range(10):
            p1 = _admissible_pair(g, sol.K_star, sol.L_star, rng, 0.1)
            p2 = _admissible_pair(g, sol.K_star, sol.L_star, rng, 0.1)
            scale = max(1.0, *(np.linalg.norm(value_certificate(g, *p).X) for p in (p1, p2)))
            for form in "AB":
                worst = max(worst, comparison_residual(g, p1, p2, form) / scale)
            L = _in_domain_L(g, sol.L_star, rng, 0.05)
            Lt = _in_domain_L(g, sol.L_star, rng, 0.05)
            xs = max(1.0, np.linalg.norm(inner_solve(g, L, tol=1e-13).X_plus))
            worst = max(worst, *(r / xs for r in comparison2_residual(g, L, Lt)))
            count += 1
    ok = worst <= 1e-9 and count == 50
    record_criterion(8, ok, f"{count} pair-pairs on 5 instances, max scaled residual {worst:.1e}")
    assert ok


def test_criterion_9_gradient_and_hessian_arbitration(g1, random_games):
    rng = np.random.default_rng(9)
    games = [g1, *random_games[1:5]]
    grad_err = 0.0
    for k in range(20):
        g = games[k % len(games)]
        sol = qn_outer(g, tol=1e-10)
        K, L = _admissible_pair(g, sol.K_star, sol.L_star, rng, 0.1)
        grad_err = max(grad_err, fd_gradient_check(g, K, L))

    hess_err, neg_count = 0.0, 0
    for g in games:
        sol = qn_outer(g, tol=1e-12)
        for _ in range(2):
            L = sol.L_star + 0.01 * rng.standard_normal(sol.L_star.shape)
            p = hessian_probe(g, L, rng.standard_normal(L.shape))
            hess_err = max(hess_err, abs(p.value - p.fd_value) / max(1.0, abs(p.fd_value)))
    a1_games = [g for g in games if qn_outer(g).certificate.assumption in (Assumption.A1, Assumption.BOTH)]
    for k in range(50):
        g = a1_games[k % len(a1_games)]
        Ls = qn_outer(g, tol=1e-12).L_star
        E = rng.standard_normal(Ls.shape)
        neg_count += hessian_g_action(g, Ls, E) < 0
    ok = grad_err <= 1e-5 and hess_err <= 1e-4 and neg_count == 50
    record_criterion(9, ok, f"gradient rel err {grad_err:.1e} over 20 probes, Hessian rel err {hess_err:.1e}, "
                            f"{neg_count}/50 negative at L*")
    assert ok


def test_criterion_10_leader_symmetry():
    agreements, checked = [], 0
    for s in range(12):
        g = generate_instance(2 + s % 4, 1 + s % 2, 1 + s % 3, 500 + s, r2_margin=4.0)
        sol_l = qn_outer(g, tol=1e-10)
        if sol_l.certificate.assumption is not Assumption.BOTH:
            continue
        K0 = solve_lqr(g.A, g.B1, g.Q, g.R1, g.Sigma).K_opt
        try:
            sol_k = ng_outer_leader_k(g, K0, tol=1e-10, max_iter=5000)
        except LQNashError:
            continue
        if not sol_k.certificate.passed:
            continue
        checked += 1
        agreements.append(max(np.abs(sol_k.K_star - sol_l.K_star).max(),
                               np.abs(sol_k.L_star - sol_l.L_star).max()))
    ok = checked >= 8 and max(agreements) <= 1e-6
    record_criterion(10, ok, f"{checked} instances run with both leaders, max gain gap {max(agreements):.1e}")
    assert ok
