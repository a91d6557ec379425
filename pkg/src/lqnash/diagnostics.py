"""Independent checks: comparison identities, Hessian of the leader value,
Nash certificates, finite-difference arbitration and rate fits.

Hessian constant: at the equilibrium the quadratic form reduces to
``-2 <O E Y, E>``. The factor 2 is the one that agrees with second-order
finite differences of ``g``; the version without it is off by exactly 2.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import SingularityError, StabilityError
from .game import (
    Assumption,
    check_assumption,
    closed_loop,
    gare_residual,
    gradient_bundle,
    is_admissible,
    natural_gradients,
    o_matrix,
    riccati_map,
    value_certificate,
)
from .inner import InnerMethod, inner_solve

HESSIAN_INNER_TOL = 1e-13


@dataclass(frozen=True)
class NashCertificate:
    stationarity_K: float
    stationarity_L: float
    rho: float
    gare_norm: float
    assumption: Assumption
    passed: bool
    tol: float

    def to_dict(self):
        return {
            "stationarity_K": self.stationarity_K,
            "stationarity_L": self.stationarity_L,
            "rho": self.rho,
            "gare_norm": self.gare_norm,
            "assumption": self.assumption.value,
            "pass": self.passed,
            "tol": self.tol,
        }


@dataclass(frozen=True)
class HessianProbe:
    L: np.ndarray
    E: np.ndarray
    value: float
    fd_value: float


def comparison_residual(game, p1, p2, form="A"):
    """Frobenius residual of the natural-gradient comparison identity.

    Form A expands ``X - X^`` around the second pair's closed loop using the
    first pair's ``U, V``; form B around the first pair's closed loop using
    the second pair's ``U, V``.
    """
    K, L, Kh, Lh = (linalg.as_matrix(M) for M in (*p1, *p2))
    X = value_certificate(game, K, L).X
    Xh = value_certificate(game, Kh, Lh).X
    A1, A2 = closed_loop(game, K, L), closed_loop(game, Kh, Lh)
    dK, dL, dA = K - Kh, L - Lh, A1 - A2
    R1, R2 = game.R1, game.R2
    D = X - Xh
    form = form.upper()
    if form == "A":
        U, V = natural_gradients(game, K, L, X)
        rhs = (A2.T @ D @ A2 + dK.T @ U + U.T @ dK - dK.T @ R1 @ dK
               + dL.T @ V + V.T @ dL + dL.T @ R2 @ dL - dA.T @ X @ dA)
    elif form == "B":
        U, V = natural_gradients(game, Kh, Lh, Xh)
        rhs = (A1.T @ D @ A1 + dK.T @ U + U.T @ dK + dK.T @ R1 @ dK
               + dL.T @ V + V.T @ dL - dL.T @ R2 @ dL + dA.T @ Xh @ dA)
    else:
        raise ValueError(f"form must be 'A' or 'B', got {form!r}")
    return float(np.linalg.norm(D - rhs))


def _best_response(game, L, tol=HESSIAN_INNER_TOL, method=InnerMethod.QUASI_NEWTON):
    return inner_solve(game, L, method, None, tol)


def comparison2_residual(game, L, Lt, tol=HESSIAN_INNER_TOL):
    """Residuals of the two identities comparing follower optima at ``L`` and ``Lt``.

    First: ``X - Xt = A'(X - Xt)A + R(Xt) + (EK - F)' E^-1 (EK - F)`` with the
    follower Riccati map ``R`` at ``L``. Second: ``R(Xt) = dL'Vt + Vt'dL - dL' O(Xt) dL``.
    """
    L = linalg.as_matrix(L, "L")
    Lt = linalg.as_matrix(Lt, "Lt")
    rep, rep_t = _best_response(game, L, tol), _best_response(game, Lt, tol)
    K, X = rep.K_opt, rep.X_plus
    Kt, Xt = rep_t.K_opt, rep_t.X_plus
    A_L = game.A - game.B2 @ L
    Qeff = game.Q - L.T @ game.R2 @ L
    Rmap = riccati_map(A_L, game.B1, linalg.sym(Qeff), game.R1, Xt)
    E = game.R1 + game.B1.T @ Xt @ game.B1
    F = game.B1.T @ Xt @ A_L
    Acl = closed_loop(game, K, L)
    G = E @ K - F
    first = X - Xt - (Acl.T @ (X - Xt) @ Acl + Rmap + G.T @ np.linalg.solve(E, G))

    _, Vt = natural_gradients(game, Kt, Lt, Xt)
    dL = L - Lt
    second = Rmap - (dL.T @ Vt + Vt.T @ dL - dL.T @ o_matrix(game, Xt) @ dL)
    return float(np.linalg.norm(first)), float(np.linalg.norm(second))


def leader_value(game, L, tol=HESSIAN_INNER_TOL):
    """``g(L) = min_K f(K, L)`` through the follower oracle."""
    return float(np.trace(_best_response(game, L, tol).X_plus @ game.Sigma))


def hessian_g_action(game, L, E, tol=HESSIAN_INNER_TOL):
    """Quadratic form ``<Hess g(L)[E], E>`` of the leader value.

    Differentiates ``grad g = 2 V Y`` along ``E``: the value, gain and metric
    derivatives ``X'``, ``K'`` and ``Y'`` come from their Lyapunov equations.
    """
    L = linalg.as_matrix(L, "L")
    E = linalg.as_matrix(E, "E")
    rep = _best_response(game, L, tol)
    K, X = rep.K_opt, rep.X_plus
    A, B1, B2, R1, R2 = game.A, game.B1, game.B2, game.R1, game.R2
    A0 = A - B1 @ K - B2 @ L
    Y = linalg.solve_dual_lyapunov(A0, game.Sigma)
    V = -R2 @ L - B2.T @ X @ A0

    dX = linalg.solve_discrete_lyapunov(A0, linalg.sym(E.T @ V + V.T @ E))
    E1 = R1 + B1.T @ X @ B1
    dK = np.linalg.solve(E1, B1.T @ dX @ A0 - B1.T @ X @ B2 @ E)
    dA = -B2 @ E - B1 @ dK
    dY = linalg.solve_dual_lyapunov(A0, linalg.sym(dA @ Y @ A0.T + A0 @ Y @ dA.T))
    dV = -R2 @ E - B2.T @ dX @ A0 - B2.T @ X @ dA
    return float(2.0 * np.sum((dV @ Y + V @ dY) * E))


def hessian_probe(game, L, E, step=1e-4, tol=HESSIAN_INNER_TOL):
    """Analytic Hessian action next to its second-order central difference."""
    L = linalg.as_matrix(L, "L")
    E = linalg.as_matrix(E, "E")
    g0 = leader_value(game, L, tol)
    gp = leader_value(game, L + step * E, tol)
    gm = leader_value(game, L - step * E, tol)
    fd = (gp - 2.0 * g0 + gm) / step**2
    return HessianProbe(L, E, hessian_g_action(game, L, E, tol), fd)


def nash_certificate(game, K, L, tol=1e-8):
    """Check first-order conditions, stability, GARE residual and Assumption 1.

    Never raises on a bad pair; failures are encoded in the fields.
    """
    K = linalg.as_matrix(K, "K")
    L = linalg.as_matrix(L, "L")
    rho = linalg.spectral_radius(closed_loop(game, K, L))
    if not rho < 1.0:
        return NashCertificate(np.inf, np.inf, rho, np.inf, Assumption.NEITHER, False, tol)
    try:
        cert = value_certificate(game, K, L)
    except StabilityError:
        return NashCertificate(np.inf, np.inf, rho, np.inf, Assumption.NEITHER, False, tol)
    U, V = natural_gradients(game, K, L, cert.X)
    try:
        gare = float(np.linalg.norm(gare_residual(game, cert.X)))
    except SingularityError:
        gare = np.inf
    try:
        assumption = check_assumption(game, cert.X)
    except SingularityError:
        assumption = Assumption.NEITHER
    sK, sL = float(np.linalg.norm(U)), float(np.linalg.norm(V))
    passed = sK <= tol and sL <= tol and rho < 1.0 and gare <= tol and assumption is not Assumption.NEITHER
    return NashCertificate(sK, sL, rho, gare, assumption, bool(passed), tol)


def fd_gradient_check(game, K, L, step=1e-6, max_shrink=5):
    """Max relative entrywise gap between ``gradient_bundle`` and central differences.

    Entries are compared relative to ``max(|fd_ij|, 1e-3 * max|fd|)`` so that
    near-zero components do not dominate. A probe leaving the admissible set
    shrinks the step tenfold, at most ``max_shrink`` times.
    """
    K = linalg.as_matrix(K, "K")
    L = linalg.as_matrix(L, "L")
    if not is_admissible(game, K, L):
        raise StabilityError("pair is not admissible")
    bundle = gradient_bundle(game, K, L)
    analytic = np.concatenate([bundle.grad_K.ravel(), bundle.grad_L.ravel()])
    for _ in range(max_shrink + 1):
        try:
            fd = _central_differences(game, K, L, step)
            break
        except StabilityError:
            step *= 0.1
    else:
        raise StabilityError("finite-difference probes leave the admissible set")
    floor = 1e-3 * max(np.max(np.abs(fd)), 1e-300)
    return float(np.max(np.abs(analytic - fd) / np.maximum(np.abs(fd), floor)))


def _central_differences(game, K, L, h):
    theta = np.concatenate([K.ravel(), L.ravel()])
    nk = K.size

    def f(t):
        return value_certificate(game, t[:nk].reshape(K.shape), t[nk:].reshape(L.shape)).cost

    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def sublinear_certificate(trace):
    """Both sides of the telescoped bound ``sum ||N_g||^2 <= (1/eta)(g_final - g_0)``.

    Works in the leader's ascent frame: for a K-leader trace the costs are
    negated. ``eta = min_j 1/lambda_max(O_j)``. Returns ``(lhs, rhs)``.
    """
    sign = 1.0 if trace.leader.value == "L" else -1.0
    costs = sign * np.array(trace.column("cost"))
    ng = np.array(trace.column("ng_norm"))
    eta = min(1.0 / lm for lm in trace.column("lambda_max_O"))
    lhs = float(np.sum(ng**2))
    rhs = float((costs[-1] - costs[0]) / eta)
    return lhs, rhs


def cost_gaps(costs, reference=None):
    """``|reference - cost_j|`` with the last cost as the default reference."""
    costs = np.asarray(costs, dtype=float)
    ref = costs[-1] if reference is None else reference
    return np.abs(ref - costs)


def tail_log_slope(errors, floor=1e-13, window=None):
    """Least-squares slope of ``log10(error)`` against iteration over the tail.

    Errors at or below ``floor`` are dropped. Returns ``None`` with fewer than
    two usable points.
    """
    e = np.asarray(errors, dtype=float)
    idx = np.flatnonzero(e > floor)
    if window is not None:
        idx = idx[-window:]
    if idx.size < 2:
        return None
    return float(np.polyfit(idx, np.log10(e[idx]), 1)[0])


def geometric_ratio(errors, floor=1e-13):
    """Fitted per-step contraction factor ``10**slope``, or ``None``."""
    s = tail_log_slope(errors, floor)
    return None if s is None else 10.0**s


def quadratic_rate(errors, start_below=1e-2, slack=10.0, floor=1e-13):
    """Fit ``e_j <= q e_{j-1}^2`` once the error drops below ``start_below``.

    ``q`` comes from the first qualifying pair; the remaining pairs are checked
    against ``slack * q``. Values at or below ``floor`` sit at rounding level:
    once ``q`` exists, a pair whose new error is at the floor counts as a
    passing check and later pairs are not examined. Returns ``(q, ok, checked_pairs)``; ``q`` is ``None``
    when no pair qualifies.
    """
    e = np.asarray(errors, dtype=float)
    q = None
    ok = True
    checked = 0
    for j in range(1, e.size):
        prev, cur = e[j - 1], e[j]
        if prev >= start_below or prev <= floor:
            continue
        if cur <= floor:
            checked += q is not None
            break
        if q is None:
            q = cur / prev**2
            continue
        checked += 1
        ok = ok and cur <= slack * q * prev**2
    return q, ok, checked
