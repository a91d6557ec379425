"""Dense matrix primitives: spectral radius, discrete Lyapunov solves, PBH tests.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. The
``as_matrix`` / ``as_sym`` helpers are the only constructors; they reject
non-finite entries and enforce symmetry where it is required.
"""

import numpy as np

from .errors import DimensionError, StabilityError

SYM_TOL = 1e-12
MARGINAL_TOL = 1e-10
PBH_RANK_TOL = 1e-9
KRONECKER_MAX_N = 30
LYAP_RESIDUAL_TOL = 1e-10


def as_matrix(M, name="matrix"):
    """Coerce ``M`` to a finite 2-D float array (scalars become 1x1)."""
    M = np.array(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def as_sym(M, name="matrix"):
    """Like :func:`as_matrix` but also checks symmetry and symmetrizes."""
    M = as_matrix(M, name)
    _require_square(M, name)
    scale = max(1.0, np.linalg.norm(M))
    if np.max(np.abs(M - M.T), initial=0.0) > SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return sym(M)


def sym(M):
    return 0.5 * (M + M.T)


def _require_square(M, name="matrix"):
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")


def spectral_radius(M):
    M = as_matrix(M)
    _require_square(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def is_schur(M, margin=0.0):
    """True iff every eigenvalue lies strictly inside the disk of radius ``1 - margin``."""
    return spectral_radius(M) < 1.0 - margin


def schur_status(M):
    """Three-valued stability verdict: ``"stable"``, ``"marginal"`` or ``"unstable"``.

    Radii within ``MARGINAL_TOL`` of 1 are reported as marginal.
    """
    rho = spectral_radius(M)
    if abs(rho - 1.0) <= MARGINAL_TOL:
        return "marginal"
    return "stable" if rho < 1.0 else "unstable"


def lyapunov_residual(A, Q, X):
    """Frobenius norm of ``A^T X A + Q - X``."""
    return float(np.linalg.norm(A.T @ X @ A + Q - X))


def solve_discrete_lyapunov(A, Q):
    """Solve ``A^T X A + Q - X = 0`` for symmetric ``X``.

    ``A`` must be Schur; ``Q`` may be indefinite. For ``n <= 30`` the
    vectorized system ``(I - A^T kron A^T) vec(X) = vec(Q)`` is solved
    directly, otherwise the doubling iteration ``X <- X + A_k^T X A_k``,
    ``A_k <- A_k^2`` is used.

    Raises
    ------
    StabilityError
        If ``A`` is not Schur or the solve misses the residual bound.
    """
    A = as_matrix(A, "A")
    Q = as_sym(Q, "Q")
    _require_square(A, "A")
    n = A.shape[0]
    if Q.shape != (n, n):
        raise DimensionError(f"Q has shape {Q.shape}, expected {(n, n)}")
    rho = spectral_radius(A)
    if not rho < 1.0:
        raise StabilityError(f"Lyapunov solve needs a Schur matrix, spectral radius {rho:.12g}")

    if n <= KRONECKER_MAX_N:
        X = _lyap_kron(A, Q)
        # one refinement sweep on the residual equation
        X = sym(X + _lyap_kron(A, sym(A.T @ X @ A + Q - X)))
    else:
        X = _lyap_doubling(A, Q)

    res = lyapunov_residual(A, Q, X)
    if res > LYAP_RESIDUAL_TOL * max(1.0, np.linalg.norm(Q)):
        raise StabilityError(
            f"Lyapunov residual {res:.3e} too large (spectral radius {rho:.12g}); "
            "system is ill-conditioned"
        )
    return X


def _lyap_kron(A, Q):
    n = A.shape[0]
    At = A.T
    lhs = np.eye(n * n) - np.kron(At, At)
    x = np.linalg.solve(lhs, Q.reshape(-1, order="F"))
    return sym(x.reshape(n, n, order="F"))


def _lyap_doubling(A, Q, max_iter=64):
    X = Q.copy()
    Ak = A.copy()
    for _ in range(max_iter):
        step = Ak.T @ X @ Ak
        X = X + step
        Ak = Ak @ Ak
        if np.linalg.norm(step) <= 1e-17 * max(1.0, np.linalg.norm(X)):
            break
    return sym(X)


def solve_dual_lyapunov(A, Sigma):
    """Solve ``A Y A^T + Sigma = Y``; ``Y`` is positive definite when ``Sigma`` is."""
    return solve_discrete_lyapunov(np.asarray(A, dtype=float).T, Sigma)


def is_stabilizable(A, B):
    """PBH test: ``rank [lambda I - A, B] = n`` for every eigenvalue with ``|lambda| >= 1``.

    Eigenvalues within ``MARGINAL_TOL`` of the unit circle count as unstable.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    _require_square(A, "A")
    n = A.shape[0]
    if B.shape[0] != n:
        raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
    scale = np.linalg.norm(np.hstack([A, B]), 2) if n else 0.0
    thresh = PBH_RANK_TOL * scale
    for lam in np.linalg.eigvals(A):
        if abs(lam) < 1.0 - MARGINAL_TOL:
            continue
        pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        s = np.linalg.svd(pencil, compute_uv=False)
        if np.sum(s > thresh) < n:
            return False
    return True


def is_detectable(C, A):
    """``(C, A)`` is detectable iff ``(A^T, C^T)`` is stabilizable."""
    C = as_matrix(C, "C")
    A = as_matrix(A, "A")
    return is_stabilizable(A.T, C.T)


def sym_eigen_bounds(M):
    """Return ``(smallest, largest)`` eigenvalue of symmetric ``M``."""
    w = np.linalg.eigvalsh(as_sym(M))
    return float(w[0]), float(w[-1])


def lambda_min(M):
    return float(np.linalg.eigvalsh(sym(np.asarray(M, dtype=float)))[0])


def lambda_max(M):
    return float(np.linalg.eigvalsh(sym(np.asarray(M, dtype=float)))[-1])
