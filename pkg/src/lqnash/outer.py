"""Leader loops: natural-gradient and quasi-Newton updates with an exact follower.

The L-leader loop ascends ``g(L) = min_K f(K, L)``; the K-leader loop
descends ``h(K) = max_L f(K, L)`` and is run as the L-leader loop on the
mirrored game (players swapped, cost negated), which turns the sign-flipped
Riccati equation of the maximizer into the ordinary one.
"""

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    ConfigError,
    CurvatureInit,
    InfeasibleError,
    InitializationError,
    InnerOracleInit,
    InvariantViolation,
    LQNashError,
    NonConvergenceError,
    NotStabilizableInit,
    SingularityError,
)
from .game import GameInstance, closed_loop, natural_gradients, o_matrix
from .inner import InnerMethod, bootstrap_stabilizing_gain, inner_solve

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-10
INNER_TOL_FLOOR = 1e-13


class OuterMethod(enum.Enum):
    NATURAL_GRADIENT = "ng"
    QUASI_NEWTON = "qn"


class Leader(enum.Enum):
    L = "L"
    K = "K"


@dataclass
class OuterRecord:
    j: int
    K: np.ndarray
    L: np.ndarray
    X: np.ndarray
    cost: float
    ng_norm: float
    eta: float
    rho: float
    lambda_min_O: float
    lambda_max_O: float
    inner_iterations: int
    inner_rho_max: float
    wall_ms: float


@dataclass
class OuterTrace:
    method: OuterMethod
    leader: Leader
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return [getattr(r, name) for r in self.records]


@dataclass
class NashSolution:
    K_star: np.ndarray
    L_star: np.ndarray
    X_star: np.ndarray
    certificate: object
    trace: OuterTrace


@dataclass
class InitContext:
    L0: np.ndarray
    K0: np.ndarray
    X_plus: np.ndarray


@dataclass
class SolverConfig:
    method: OuterMethod = OuterMethod.QUASI_NEWTON
    leader: Leader = Leader.L
    init: object = "zero"
    tol: float = 1e-8
    max_outer: int = 500
    max_inner: int = 10_000
    inner_method: InnerMethod = InnerMethod.QUASI_NEWTON
    inner_tol: float = 1e-10
    aggressive_stepsize: bool = False
    seed: int = 0

    def __post_init__(self):
        try:
            self.method = OuterMethod(self.method) if not isinstance(self.method, OuterMethod) else self.method
            self.leader = Leader(self.leader) if not isinstance(self.leader, Leader) else self.leader
            self.inner_method = InnerMethod.parse(self.inner_method)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.method is OuterMethod.QUASI_NEWTON and self.leader is Leader.K:
            raise ConfigError("quasi-Newton with K as the leader is not supported")
        if isinstance(self.init, str) and self.init not in ("zero", "bootstrap"):
            raise ConfigError(f"unknown init {self.init!r}")
        if not self.tol > 0 or not self.inner_tol > 0:
            raise ConfigError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ConfigError("iteration caps must be positive")


def validate_init_L(game, L0, inner_method=InnerMethod.QUASI_NEWTON, tol=1e-12, max_iter=10_000):
    """Check that ``L0`` can start the L-leader loop.

    Three checks, each with its own exception: ``(A - B2 L0, B1)``
    stabilizable, the follower oracle converging to a stabilizing DARE
    solution, and ``R1 + B1'X+B1`` positive definite.
    """
    L0 = linalg.as_matrix(L0, "L0")
    A_L = game.A - game.B2 @ L0
    if not linalg.is_stabilizable(A_L, game.B1):
        raise NotStabilizableInit("(A - B2 L0, B1) is not stabilizable")
    try:
        rep = inner_solve(game, L0, inner_method, None, tol, max_iter)
    except (LQNashError, np.linalg.LinAlgError) as exc:
        raise InnerOracleInit(f"follower DARE has no stabilizing solution at L0: {exc}") from exc
    if linalg.lambda_min(game.R1 + game.B1.T @ rep.X_plus @ game.B1) <= 0.0:
        raise CurvatureInit("R1 + B1'X+B1 is not positive definite at L0")
    return InitContext(L0, rep.K_opt, rep.X_plus)


def _follower(game, L, K_prev, inner_method, tol, max_iter, j):
    # warm start from the previous response when it still stabilizes
    A_L = game.A - game.B2 @ L
    M0 = K_prev if K_prev is not None and linalg.is_schur(A_L - game.B1 @ K_prev) else None
    try:
        return inner_solve(game, L, inner_method, M0, tol, max_iter)
    except NonConvergenceError as exc:
        exc.round_index = j
        raise
    except InfeasibleError as exc:
        raise InvariantViolation(f"round {j}: (A - B2 L, B1) lost stabilizability: {exc}") from exc


def _leader_loop(game, L0, method, tol, max_iter, inner_method, inner_tol, max_inner, aggressive):
    trace = OuterTrace(method, Leader.L)
    ctx = validate_init_L(game, L0, inner_method, min(inner_tol, 1e-12), max_inner)
    if method is OuterMethod.QUASI_NEWTON:
        C = linalg.sym(game.Q - ctx.L0.T @ game.R2 @ ctx.L0)
        if not linalg.is_detectable(C, game.A - game.B2 @ ctx.L0):
            msg = "(Q - L0'R2 L0, A - B2 L0) is not detectable"
            logger.warning(msg)
            trace.warnings.append(msg)

    L = ctx.L0.copy()
    K = ctx.K0
    X_prev = None
    v_norm = np.inf
    t0 = time.perf_counter()
    for j in range(max_iter + 1):
        tol_in = max(min(inner_tol, 1e-2 * v_norm), INNER_TOL_FLOOR)
        rep = _follower(game, L, K, inner_method, tol_in, max_inner, j)
        K, X = rep.K_opt, rep.X_plus
        Acl = closed_loop(game, K, L)
        rho = linalg.spectral_radius(Acl)
        _, V = natural_gradients(game, K, L, X)
        v_norm = float(np.linalg.norm(V))
        ng_norm = 2.0 * v_norm
        try:
            O = o_matrix(game, X)
        except SingularityError as exc:
            raise InvariantViolation(f"round {j}: {exc}", trace=trace) from exc
        lam = np.linalg.eigvalsh(O)
        rec = OuterRecord(
            j, K, L.copy(), X, float(np.trace(X @ game.Sigma)), ng_norm, np.nan, rho,
            float(lam[0]), float(lam[-1]), rep.iterations, max(rep.rho_trace),
            1e3 * (time.perf_counter() - t0),
        )
        trace.records.append(rec)

        if not rho < 1.0:
            raise InvariantViolation(f"round {j}: pair is not stabilizing (rho={rho:.12g})", trace=trace)
        if not lam[0] > 0.0:
            raise InvariantViolation(f"round {j}: O-matrix lost definiteness ({lam[0]:.3e})", trace=trace)
        if X_prev is not None and linalg.lambda_min(X - X_prev) < -MONOTONE_TOL * max(1.0, np.linalg.norm(X)):
            raise InvariantViolation(f"round {j}: value matrix decreased", trace=trace)
        X_prev = X

        if ng_norm <= tol:
            return trace
        if j == max_iter:
            raise NonConvergenceError(
                f"leader did not reach tol {tol:g} in {max_iter} rounds (natural gradient {ng_norm:.3e})",
                trace=trace,
                round_index=j,
            )
        if method is OuterMethod.NATURAL_GRADIENT:
            eta = 1.0 / lam[-1] if aggressive else 1.0 / (2.0 * lam[-1])
            L = L + eta * 2.0 * V
        else:
            eta = 0.5
            L = L + eta * np.linalg.solve(O, 2.0 * V)
        rec.eta = eta


def _finish(game, trace, tol):
    from .diagnostics import nash_certificate

    last = trace.records[-1]
    cert = nash_certificate(game, last.K, last.L, tol=tol)
    return NashSolution(last.K, last.L, last.X, cert, trace)


def ng_outer(game, L0=None, tol=1e-8, max_iter=500, inner_method=InnerMethod.QUASI_NEWTON,
             inner_tol=1e-10, max_inner=10_000, aggressive=False):
    """Natural-gradient ascent on ``L`` with an exact follower.

    Each round solves the follower, then steps
    ``L <- L + eta * 2 V`` with ``eta = 1 / (2 lambda_max(O))``
    (``1 / lambda_max(O)`` when ``aggressive``). Stops once ``||2 V||_F <= tol``.

    The aggressive step still keeps every iterate stabilizing, but it sits on
    the boundary where the guaranteed improvement vanishes along the top
    eigenvector of ``O``, and the ascent can stall there.
    """
    L0 = np.zeros((game.m2, game.n)) if L0 is None else L0
    trace = _leader_loop(game, L0, OuterMethod.NATURAL_GRADIENT, tol, max_iter,
                         InnerMethod.parse(inner_method), inner_tol, max_inner, aggressive)
    return _finish(game, trace, tol)


def qn_outer(game, L0=None, tol=1e-8, max_iter=500, inner_method=InnerMethod.QUASI_NEWTON,
             inner_tol=1e-10, max_inner=10_000):
    """Quasi-Newton ascent on ``L``: ``L <- L + (1/2) O^-1 2 V``."""
    L0 = np.zeros((game.m2, game.n)) if L0 is None else L0
    trace = _leader_loop(game, L0, OuterMethod.QUASI_NEWTON, tol, max_iter,
                         InnerMethod.parse(inner_method), inner_tol, max_inner, False)
    return _finish(game, trace, tol)


def _unmirror(trace):
    out = OuterTrace(trace.method, Leader.K, warnings=list(trace.warnings))
    for r in trace.records:
        out.records.append(OuterRecord(
            r.j, r.L, r.K, -r.X, -r.cost, r.ng_norm, r.eta, r.rho, r.lambda_min_O,
            r.lambda_max_O, r.inner_iterations, r.inner_rho_max, r.wall_ms,
        ))
    return out


def ng_outer_leader_k(game, K0=None, tol=1e-8, max_iter=500, inner_method=InnerMethod.QUASI_NEWTON,
                      inner_tol=1e-10, max_inner=10_000, aggressive=False):
    """Natural-gradient descent on ``K`` with an exact maximizing follower.

    Steps ``K <- K - eta * 2 U`` with ``eta = 1 / (2 lambda_max(O))`` and
    ``O = R1 + B1'XB1 + B1'XB2 (R2 - B2'XB2)^-1 B2'XB1``. Trace records carry
    the original game's ``K``, ``L``, ``X`` and cost; ``lambda_*_O`` refer to
    this K-side curvature.

    ``K0`` defaults to the bootstrap stabilizing gain for ``(A, B1)``; the zero
    gain is outside the domain of ``h`` whenever ``A`` is unstable, since the
    maximizer can then keep the state growing.
    """
    K0 = bootstrap_stabilizing_gain(game.A, game.B1) if K0 is None else K0
    mirrored = game.mirror()
    try:
        trace = _leader_loop(mirrored, K0, OuterMethod.NATURAL_GRADIENT, tol, max_iter,
                             InnerMethod.parse(inner_method), inner_tol, max_inner, aggressive)
    except LQNashError as exc:
        if getattr(exc, "trace", None) is not None:
            exc.trace = _unmirror(exc.trace)
        raise
    return _finish(game, _unmirror(trace), tol)


def _initial_gain(game, config):
    leader_B = game.B2 if config.leader is Leader.L else game.B1
    rows = leader_B.shape[1]
    if isinstance(config.init, str):
        if config.init == "zero":
            return np.zeros((rows, game.n))
        return bootstrap_stabilizing_gain(game.A, leader_B)
    G = linalg.as_matrix(config.init, "init")
    if G.shape != (rows, game.n):
        raise ConfigError(f"initial gain has shape {G.shape}, expected {(rows, game.n)}")
    return G


def solve_nash(game, config=None):
    """Run the configured leader loop and attach a Nash certificate.

    With ``init="zero"``, a failed initialization is retried once from the
    bootstrap gain before giving up; the first error is re-raised. The
    bootstrap gain stabilizes the leader's own channel, which rescues starts
    where the follower cannot stabilize alone, but it can also be too large
    for the follower's problem to stay solvable.
    """
    config = config or SolverConfig()
    if not isinstance(game, GameInstance):
        raise TypeError("game must be a GameInstance")
    retry = isinstance(config.init, str) and config.init == "zero"
    inits = [config.init] + (["bootstrap"] if retry else [])
    first_error = None
    for init in inits:
        attempt = SolverConfig(**{**config.__dict__, "init": init})
        G0 = _initial_gain(game, attempt)
        kw = dict(tol=config.tol, max_iter=config.max_outer, inner_method=config.inner_method,
                  inner_tol=config.inner_tol, max_inner=config.max_inner)
        try:
            if config.leader is Leader.K:
                return ng_outer_leader_k(game, G0, aggressive=config.aggressive_stepsize, **kw)
            if config.method is OuterMethod.QUASI_NEWTON:
                return qn_outer(game, G0, **kw)
            return ng_outer(game, G0, aggressive=config.aggressive_stepsize, **kw)
        except InitializationError as exc:
            logger.info("initialization %r rejected: %s", init, exc)
            first_error = first_error or exc
    raise first_error
