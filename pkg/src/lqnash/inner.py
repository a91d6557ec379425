"""Follower oracle: policy iterations for LQR with an indefinite state weight.

The minimizer's problem for fixed ``L`` is an LQR on ``(A - B2 L, B1)`` with
state weight ``Q - L'R2 L`` that need not be semidefinite. Three policy
updates are provided (gradient, natural gradient, quasi-Newton); none of them
projects, and every iterate is checked to stay stabilizing.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    DegenerateInputError,
    InfeasibleError,
    InvariantViolation,
    NonConvergenceError,
)
from .game import follower_problem, riccati_map

ETA_CAP = 1e3
C0_FACTOR = 0.99
BOOTSTRAP_TOL = 1e-10
BOOTSTRAP_MAX_ITER = 100_000


class InnerMethod(enum.Enum):
    GRADIENT = "gradient"
    NATURAL_GRADIENT = "ng"
    QUASI_NEWTON = "qn"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"natural_gradient": "ng", "quasi_newton": "qn", "gd": "gradient"}
        return cls(aliases.get(str(value).lower(), str(value).lower()))


@dataclass
class InnerReport:
    K_opt: np.ndarray
    X_plus: np.ndarray
    iterations: int
    final_grad_norm: float
    stepsizes: list = field(default_factory=list)
    rho_trace: list = field(default_factory=list)
    gain_trace: list = field(default_factory=list)
    value_trace: list = field(default_factory=list)
    cost_trace: list = field(default_factory=list)
    grad_norm_trace: list = field(default_factory=list)


@dataclass(frozen=True)
class GradientStepsize:
    mu1: float
    mu2: float
    eta0: float
    beta0: float
    a1: float
    a2: float
    c0: float
    eta: float


def bootstrap_stabilizing_gain(A, B):
    """A gain ``M0`` with ``A - B M0`` Schur, from the auxiliary DARE with unit weights.

    Runs Riccati value iteration from ``X = I``; returns zeros when ``A`` is
    already Schur.
    """
    A = linalg.as_matrix(A, "A")
    B = linalg.as_matrix(B, "B")
    m = B.shape[1]
    if linalg.is_schur(A):
        return np.zeros((m, A.shape[0]))
    if not linalg.is_stabilizable(A, B):
        raise InfeasibleError("(A, B) is not stabilizable")
    n = A.shape[0]
    X = np.eye(n)
    I_m = np.eye(m)
    for _ in range(BOOTSTRAP_MAX_ITER):
        BtXA = B.T @ X @ A
        X_next = linalg.sym(A.T @ X @ A - BtXA.T @ np.linalg.solve(I_m + B.T @ X @ B, BtXA) + np.eye(n))
        done = np.linalg.norm(X_next - X) <= BOOTSTRAP_TOL * max(1.0, np.linalg.norm(X_next))
        X = X_next
        if done:
            break
    else:
        raise NonConvergenceError("bootstrap value iteration did not converge")
    M0 = np.linalg.solve(I_m + B.T @ X @ B, B.T @ X @ A)
    if not linalg.is_schur(A - B @ M0):
        raise NonConvergenceError("bootstrap gain is not stabilizing")
    return M0


def _evaluate(A, B, Q, R, Sigma, M, need_Y):
    Acl = A - B @ M
    X = linalg.solve_discrete_lyapunov(Acl, linalg.sym(Q + M.T @ R @ M))
    U = R @ M - B.T @ X @ Acl
    Y = linalg.solve_dual_lyapunov(Acl, Sigma) if need_Y else None
    return Acl, X, U, Y


def lqr_gradient_stepsize(A, B, R, Sigma, M, X, U, Y):
    """Closed-form stepsize for ``M <- M - eta * 2 U Y``.

    ``eta0`` is taken at half the bound where the Y-perturbation estimate
    degenerates, so ``beta0`` lies in (1, 2]; ``c0`` is 0.99 times the positive
    root of ``a2 c^2 + a1 c = 1``; the result is capped at ``ETA_CAP``.
    """
    norm_U = np.linalg.norm(U, 2)
    if norm_U == 0.0:
        raise DegenerateInputError("gradient vanishes; the iterate is already optimal")
    lam1_sigma = linalg.lambda_min(Sigma)
    norm_Y = np.linalg.norm(Y, 2)
    BUY = np.linalg.norm(B @ U @ Y, 2)
    mu1 = norm_Y * BUY**2 / lam1_sigma
    mu2 = norm_Y * BUY * np.linalg.norm(A, 2) / lam1_sigma
    if mu1 == 0.0:
        raise DegenerateInputError("B1 U Y vanishes; no descent direction")
    # positive root of 4 mu1 t^2 + 4 mu2 t = 1, rationalized
    root = 1.0 / (2.0 * (mu2 + math.sqrt(mu2 * mu2 + mu1)))
    eta0 = 0.5 * root
    beta0 = 1.0 / (1.0 - 4.0 * mu1 * eta0**2 - 4.0 * mu2 * eta0)

    a = linalg.lambda_max(R + B.T @ X @ B)
    lam_Y = linalg.lambda_max(Y)
    a1 = a * beta0 * lam_Y + 4.0 * norm_U * beta0 * lam_Y**2
    a2 = a * 4.0 * norm_U * beta0 * lam_Y**2
    c0 = C0_FACTOR * 2.0 / (a1 + math.sqrt(a1 * a1 + 4.0 * a2))
    eta = min(eta0, c0, ETA_CAP)
    return GradientStepsize(mu1, mu2, eta0, beta0, a1, a2, c0, eta)


def gradient_stepsize(game, L, M, cert=None):
    """Gradient stepsize for the follower at gain ``M`` with ``L`` fixed."""
    A, B, Q, R = follower_problem(game, L)
    M = linalg.as_matrix(M, "M")
    if cert is None:
        _, X, U, Y = _evaluate(A, B, Q, R, game.Sigma, M, need_Y=True)
    else:
        X, Y = cert.X, cert.Y
        U = R @ M - B.T @ X @ (A - B @ M)
    return lqr_gradient_stepsize(A, B, R, game.Sigma, M, X, U, Y)


def solve_lqr(A, B, Q, R, Sigma, method=InnerMethod.QUASI_NEWTON, M0=None, tol=1e-10, max_iter=10_000):
    """Policy iteration for ``min_M Tr(X_M Sigma)`` with possibly indefinite ``Q``.

    Stops once ``||R M - B'X A_M||_F <= tol``. Every iterate must keep
    ``A - B M`` Schur; a violation raises :class:`InvariantViolation`.

    Returns
    -------
    InnerReport
        ``X_plus`` is the stabilizing (hence maximal) solution of the DARE.
    """
    method = InnerMethod.parse(method)
    A = linalg.as_matrix(A, "A")
    B = linalg.as_matrix(B, "B")
    Q = linalg.as_sym(Q, "Q")
    R = linalg.as_sym(R, "R")
    M = bootstrap_stabilizing_gain(A, B) if M0 is None else linalg.as_matrix(M0, "M0").copy()
    if tol <= 0:
        raise ValueError("tol must be positive")
    need_Y = method is InnerMethod.GRADIENT
    report = InnerReport(M, None, 0, math.inf)

    for i in range(max_iter + 1):
        Acl = A - B @ M
        rho = linalg.spectral_radius(Acl)
        if not rho < 1.0:
            raise InvariantViolation(
                f"follower iterate {i} left the stabilizing set (spectral radius {rho:.12g})", trace=report
            )
        Acl, X, U, Y = _evaluate(A, B, Q, R, Sigma, M, need_Y)
        gnorm = float(np.linalg.norm(U))
        report.rho_trace.append(rho)
        report.gain_trace.append(M.copy())
        report.value_trace.append(X)
        report.cost_trace.append(float(np.trace(X @ Sigma)))
        report.grad_norm_trace.append(gnorm)
        report.K_opt, report.X_plus, report.iterations, report.final_grad_norm = M, X, i, gnorm
        if gnorm <= tol:
            break
        if i == max_iter:
            raise NonConvergenceError(
                f"follower did not reach tol {tol:g} in {max_iter} iterations (grad norm {gnorm:.3e})",
                trace=report,
            )

        E = R + B.T @ X @ B
        if method is InnerMethod.QUASI_NEWTON:
            step = 0.5
            M = M - step * 2.0 * np.linalg.solve(E, U)
        elif method is InnerMethod.NATURAL_GRADIENT:
            step = 1.0 / (2.0 * linalg.lambda_max(E))
            M = M - step * 2.0 * U
        else:
            step = lqr_gradient_stepsize(A, B, R, Sigma, M, X, U, Y).eta
            M = M - step * 2.0 * U @ Y
        report.stepsizes.append(step)

    if linalg.lambda_min(R + B.T @ report.X_plus @ B) <= 0.0:
        raise InvariantViolation("R + B'X+B is not positive definite at the follower optimum", trace=report)
    return report


def inner_solve(game, L, method=InnerMethod.QUASI_NEWTON, M0=None, tol=1e-10, max_iter=10_000):
    """Best response ``argmin_K f(K, L)`` for fixed ``L``.

    ``M0`` defaults to a bootstrap gain for ``(A - B2 L, B1)``.
    """
    A, B, Q, R = follower_problem(game, L)
    if M0 is None:
        M0 = bootstrap_stabilizing_gain(A, B)
    return solve_lqr(A, B, Q, R, game.Sigma, method, M0, tol, max_iter)


def argmax_L(game, K, method=InnerMethod.QUASI_NEWTON, L0=None, tol=1e-10, max_iter=10_000):
    """Best response ``argmax_L f(K, L)`` for fixed ``K`` via the sign-flipped DARE.

    Maximizing ``f`` over ``L`` is minimizing ``-f``: an LQR on
    ``(A - B1 K, B2)`` with state weight ``-Q - K'R1 K`` and control weight
    ``R2``. The returned ``X_plus`` is the value matrix of ``f`` itself, i.e.
    the negated stabilizing solution ``-W+`` of the flipped equation.
    """
    K = linalg.as_matrix(K, "K")
    A = game.A - game.B1 @ K
    Q = linalg.sym(-game.Q - K.T @ game.R1 @ K)
    if L0 is None:
        L0 = bootstrap_stabilizing_gain(A, game.B2)
    report = solve_lqr(A, game.B2, Q, game.R2, game.Sigma, method, L0, tol, max_iter)
    report.X_plus = -report.X_plus
    report.value_trace = [-W for W in report.value_trace]
    report.cost_trace = [-c for c in report.cost_trace]
    return report


def dare_residual(game, L, X):
    """Riccati map of the follower problem at ``X``; zero iff ``X`` solves its DARE."""
    return riccati_map(*follower_problem(game, L), X)
