"""Zero-sum LQ game data model and its closed-form quantities.

Dynamics are ``x+ = A x - B1 u1 - B2 u2`` with ``u1 = K x`` (minimizer) and
``u2 = L x`` (maximizer). For an admissible pair the cost is
``f(K, L) = Tr(X Sigma)`` where ``X`` solves the closed-loop Lyapunov equation.
"""

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg
from .errors import DimensionError, InfeasibleError, SingularityError, StabilityError

PD_TOL = 1e-12
ASSUMPTION_MARGIN = 1e-10
COND_LIMIT = 1e13


@dataclass(frozen=True, eq=False)
class GameInstance:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Q: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    Sigma: np.ndarray = None

    def __post_init__(self):
        A = linalg.as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        B1 = linalg.as_matrix(self.B1, "B1")
        B2 = linalg.as_matrix(self.B2, "B2")
        for name, B in (("B1", B1), ("B2", B2)):
            if B.shape[0] != n:
                raise DimensionError(f"{name} has {B.shape[0]} rows, expected {n}")
        Q = linalg.as_sym(self.Q, "Q")
        R1 = linalg.as_sym(self.R1, "R1")
        R2 = linalg.as_sym(self.R2, "R2")
        Sigma = np.eye(n) if self.Sigma is None else linalg.as_sym(self.Sigma, "Sigma")
        expected = {"Q": (Q, n), "R1": (R1, B1.shape[1]), "R2": (R2, B2.shape[1]), "Sigma": (Sigma, n)}
        for name, (M, d) in expected.items():
            if M.shape != (d, d):
                raise DimensionError(f"{name} has shape {M.shape}, expected {(d, d)}")
        for name, M in (("R1", R1), ("R2", R2), ("Sigma", Sigma)):
            if linalg.lambda_min(M) <= PD_TOL:
                raise ValueError(f"{name} is not positive definite")
        for name, M in (("A", A), ("B1", B1), ("B2", B2), ("Q", Q), ("R1", R1), ("R2", R2), ("Sigma", Sigma)):
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        if not linalg.is_stabilizable(A, np.hstack([B1, B2])):
            raise InfeasibleError("(A, [B1 B2]) is not stabilizable")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m1(self):
        return self.B1.shape[1]

    @property
    def m2(self):
        return self.B2.shape[1]

    def mirror(self):
        """The same game seen from the maximizer: players swapped, cost negated.

        Value matrices of the mirror are the negatives of the original ones,
        and its (K, L) is the original (L, K).
        """
        return GameInstance(self.A, self.B2, self.B1, -self.Q, self.R2, self.R1, self.Sigma)


class PolicyPair(NamedTuple):
    K: np.ndarray
    L: np.ndarray


class ValueCertificate(NamedTuple):
    X: np.ndarray
    Y: np.ndarray
    cost: float


class GradientBundle(NamedTuple):
    grad_K: np.ndarray
    grad_L: np.ndarray
    U: np.ndarray
    V: np.ndarray


class Assumption(enum.Enum):
    A1 = "A1"
    A2 = "A2"
    BOTH = "Both"
    NEITHER = "Neither"


def _gains(game, K, L):
    K = linalg.as_matrix(K, "K")
    L = linalg.as_matrix(L, "L")
    if K.shape != (game.m1, game.n):
        raise DimensionError(f"K has shape {K.shape}, expected {(game.m1, game.n)}")
    if L.shape != (game.m2, game.n):
        raise DimensionError(f"L has shape {L.shape}, expected {(game.m2, game.n)}")
    return K, L


def closed_loop(game, K, L):
    K, L = _gains(game, K, L)
    return game.A - game.B1 @ K - game.B2 @ L


def is_admissible(game, K, L):
    return linalg.is_schur(closed_loop(game, K, L))


def stage_cost(game, K, L):
    """``Q + K^T R1 K - L^T R2 L``, the effective state weight under (K, L)."""
    return linalg.sym(game.Q + K.T @ game.R1 @ K - L.T @ game.R2 @ L)


def value_certificate(game, K, L):
    """Value matrix ``X``, metric matrix ``Y`` and cost for an admissible pair.

    Refuses to evaluate outside the admissible set even when the Lyapunov
    system happens to be solvable there; a finite sum is no stability evidence.
    """
    K, L = _gains(game, K, L)
    Acl = game.A - game.B1 @ K - game.B2 @ L
    rho = linalg.spectral_radius(Acl)
    if not rho < 1.0:
        raise StabilityError(f"pair is not admissible: spectral radius {rho:.12g}")
    X = linalg.solve_discrete_lyapunov(Acl, stage_cost(game, K, L))
    Y = linalg.solve_dual_lyapunov(Acl, game.Sigma)
    return ValueCertificate(X, Y, float(np.trace(X @ game.Sigma)))


def cost(game, K, L):
    return value_certificate(game, K, L).cost


def natural_gradients(game, K, L, X):
    """``U = R1 K - B1^T X A_cl`` and ``V = -R2 L - B2^T X A_cl``."""
    Acl = closed_loop(game, K, L)
    U = game.R1 @ K - game.B1.T @ X @ Acl
    V = -game.R2 @ L - game.B2.T @ X @ Acl
    return U, V


def gradient_bundle(game, K, L, cert=None):
    """Euclidean gradients ``2 U Y`` and ``2 V Y`` together with ``U`` and ``V``."""
    K, L = _gains(game, K, L)
    if cert is None:
        cert = value_certificate(game, K, L)
    U, V = natural_gradients(game, K, L, cert.X)
    return GradientBundle(2.0 * U @ cert.Y, 2.0 * V @ cert.Y, U, V)


def _checked_inv(M, what):
    c = np.linalg.cond(M)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularityError(f"{what} is singular", cond=c)
    return np.linalg.inv(M)


def o_matrix(game, X):
    """Curvature of the leader's value: ``R2 - B2'XB2 + B2'XB1 (R1 + B1'XB1)^-1 B1'XB2``."""
    X = linalg.as_sym(X, "X")
    B1, B2 = game.B1, game.B2
    inner = _checked_inv(game.R1 + B1.T @ X @ B1, "R1 + B1'XB1")
    O = game.R2 - B2.T @ X @ B2 + B2.T @ X @ B1 @ inner @ B1.T @ X @ B2
    return linalg.sym(O)


def riccati_map(A, B, Q, R, X):
    """``A'XA + Q - X - A'XB (R + B'XB)^-1 B'XA``; zero exactly on DARE solutions."""
    A = linalg.as_matrix(A, "A")
    B = linalg.as_matrix(B, "B")
    X = linalg.as_sym(X, "X")
    Q = linalg.as_sym(Q, "Q")
    R = linalg.as_sym(R, "R")
    inner = _checked_inv(R + B.T @ X @ B, "R + B'XB")
    out = A.T @ X @ A + Q - X - A.T @ X @ B @ inner @ B.T @ X @ A
    return linalg.sym(out)


def _block(game, X):
    B = np.hstack([game.B1, game.B2])
    D = np.zeros((game.m1 + game.m2,) * 2)
    D[: game.m1, : game.m1] = game.R1
    D[game.m1 :, game.m1 :] = -game.R2
    return B, linalg.sym(D + B.T @ X @ B)


def gare_residual(game, X):
    """Residual of the generalized Riccati equation at ``X``.

    ``A'XA - X + Q - P' M^-1 P`` with ``P = [B1 B2]' X A`` and
    ``M = [[R1 + B1'XB1, B1'XB2], [B2'XB1, -R2 + B2'XB2]]``.
    """
    X = linalg.as_sym(X, "X")
    B, M = _block(game, X)
    P = B.T @ X @ game.A
    Minv = _checked_inv(M, "GARE block matrix")
    return linalg.sym(game.A.T @ X @ game.A - X + game.Q - P.T @ Minv @ P)


def gare_gains(game, X):
    """Feedback pair extracted from ``X`` by zeroing both natural gradients."""
    X = linalg.as_sym(X, "X")
    B, M = _block(game, X)
    _checked_inv(M, "GARE block matrix")
    G = np.linalg.solve(M, B.T @ X @ game.A)
    return PolicyPair(G[: game.m1], G[game.m1 :])


def check_assumption(game, X_star, margin=ASSUMPTION_MARGIN):
    """Report which definiteness condition, (a1) or (a2), holds at ``X_star``.

    (a1): ``R1 + B1'XB1 > 0`` and the O-matrix is positive definite.
    (a2): ``-R2 + B2'XB2 < 0`` and
    ``R1 + B1'XB1 - B1'XB2 (-R2 + B2'XB2)^-1 B2'XB1 > 0``.
    """
    X = linalg.as_sym(X_star, "X_star")
    B1, B2 = game.B1, game.B2
    E1 = game.R1 + B1.T @ X @ B1
    E2 = -game.R2 + B2.T @ X @ B2

    a1 = linalg.lambda_min(E1) > margin and linalg.lambda_min(o_matrix(game, X)) > margin
    a2 = False
    if linalg.lambda_max(E2) < -margin:
        S = E1 - B1.T @ X @ B2 @ _checked_inv(E2, "-R2 + B2'XB2") @ B2.T @ X @ B1
        a2 = linalg.lambda_min(S) > margin
    if a1 and a2:
        return Assumption.BOTH
    if a1:
        return Assumption.A1
    if a2:
        return Assumption.A2
    return Assumption.NEITHER


def follower_problem(game, L):
    """LQR data ``(A - B2 L, B1, Q - L'R2 L, R1)`` faced by the minimizer when L is fixed."""
    L = linalg.as_matrix(L, "L")
    return (
        game.A - game.B2 @ L,
        game.B1,
        linalg.sym(game.Q - L.T @ game.R2 @ L),
        game.R1,
    )
