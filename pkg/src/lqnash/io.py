"""Instance files, solution and trace export, and seeded instance generation.

Instances and solutions are JSON with matrices as row-major nested lists.
``json`` writes floats with ``repr``, which is the shortest string that
round-trips, so generate -> parse is bit-exact. Traces are CSV.
"""

import csv
import io as _io
import json
import math
import os
import tempfile

import numpy as np

from . import linalg
from .errors import DimensionError, InfeasibleError, LQNashError, NonConvergenceError
from .game import GameInstance

SCHEMA_VERSION = 1
MATRIX_FIELDS = ("A", "B1", "B2", "Q", "R1", "R2", "Sigma")
TRACE_COLUMNS = ("j", "cost", "ng_norm", "eta", "rho", "lambda_min_O", "wall_ms")
GENERATOR_MAX_DRAWS = 100
R2_MAX_DOUBLINGS = 30


class ParseError(LQNashError, ValueError):
    """An instance or policy file is malformed; ``field`` names the culprit."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def g1_preset():
    """Scalar game a=1.2, b1=1, b2=0.5, q=1, r1=1, r2=5, sigma=1."""
    return GameInstance([[1.2]], [[1.0]], [[0.5]], [[1.0]], [[1.0]], [[5.0]], [[1.0]])


PRESETS = {"g1": g1_preset}


def _matrix(doc, key, shape):
    if key not in doc:
        raise ParseError("missing field", key)
    raw = doc[key]
    if not isinstance(raw, list) or not all(isinstance(row, list) for row in raw):
        raise ParseError("expected a list of rows", key)
    try:
        M = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("entries must be numbers with equal-length rows", key) from None
    if M.ndim != 2 or M.shape != shape:
        raise ParseError(f"shape {M.shape} does not match expected {shape}", key)
    if not np.all(np.isfinite(M)):
        raise ParseError("non-finite entry", key)
    return M


def _dim(doc, key):
    v = doc.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ParseError("must be a positive integer", key)
    return v


def game_from_dict(doc):
    """Build a :class:`GameInstance` from a parsed instance document.

    Raises :class:`ParseError` naming the offending field, or
    :class:`InfeasibleError` when the data are well formed but
    ``(A, [B1 B2])`` is not stabilizable.
    """
    if not isinstance(doc, dict):
        raise ParseError("instance must be a JSON object")
    if doc.get("v") != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema version {doc.get('v')!r}", "v")
    n, m1, m2 = _dim(doc, "n"), _dim(doc, "m1"), _dim(doc, "m2")
    shapes = {"A": (n, n), "B1": (n, m1), "B2": (n, m2), "Q": (n, n),
              "R1": (m1, m1), "R2": (m2, m2), "Sigma": (n, n)}
    mats = {k: _matrix(doc, k, shapes[k]) for k in MATRIX_FIELDS}
    for k in ("Q", "R1", "R2", "Sigma"):
        M = mats[k]
        if np.max(np.abs(M - M.T)) > linalg.SYM_TOL * max(1.0, np.linalg.norm(M)):
            raise ParseError("not symmetric", k)
    for k in ("R1", "R2", "Sigma"):
        if linalg.lambda_min(mats[k]) <= 1e-12:
            raise ParseError("not positive definite", k)
    try:
        return GameInstance(**mats)
    except InfeasibleError:
        raise
    except (DimensionError, ValueError) as exc:
        raise ParseError(str(exc)) from None


def game_to_dict(game):
    doc = {"v": SCHEMA_VERSION, "n": game.n, "m1": game.m1, "m2": game.m2}
    for k in MATRIX_FIELDS:
        doc[k] = getattr(game, k).tolist()
    return doc


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc.msg} at line {exc.lineno}") from None


def load_instance(path):
    return game_from_dict(load_json(path))


def load_policy(path, game):
    """Read ``{"K": ..., "L": ...}``; ``K_star``/``L_star`` keys are accepted too."""
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise ParseError("policy must be a JSON object")
    out = []
    for key, rows in (("K", game.m1), ("L", game.m2)):
        name = key if key in doc else f"{key}_star"
        out.append(_matrix(doc, name, (rows, game.n)))
    return tuple(out)


def atomic_write_text(path, text):
    """Write through a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def dumps_json(doc):
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def save_instance(path, game):
    atomic_write_text(path, dumps_json(game_to_dict(game)))


def solution_to_dict(solution):
    cert = {k: (_finite_or_none(v) if isinstance(v, float) else v)
            for k, v in solution.certificate.to_dict().items()}
    return {
        "K_star": solution.K_star.tolist(),
        "L_star": solution.L_star.tolist(),
        "X_star": solution.X_star.tolist(),
        "certificate": cert,
    }


def trace_to_csv(trace, fixed_clock=False):
    """CSV text with one row per outer round.

    ``fixed_clock`` writes ``wall_ms`` as 0 so that reruns are byte-identical.
    """
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace.records:
        row = []
        for c in TRACE_COLUMNS:
            v = getattr(r, c)
            if c == "wall_ms" and fixed_clock:
                v = 0.0
            row.append(v if c == "j" else ("" if not math.isfinite(v) else repr(float(v))))
        w.writerow(row)
    return buf.getvalue()


def _scaled_to_radius(M, rho):
    r = linalg.spectral_radius(M)
    return M if r == 0.0 else M * (rho / r)


def _draw(rng, n, m1, m2, indefinite_at_ne):
    A = _scaled_to_radius(rng.standard_normal((n, n)), rng.uniform(0.5, 1.2))
    B1 = rng.standard_normal((n, m1))
    B2 = rng.standard_normal((n, m2))
    if indefinite_at_ne:
        G = rng.standard_normal((n, max(1, n // 2)))
        Q = G @ G.T
        if n == 1:
            Q = np.zeros((1, 1))
    else:
        G = rng.standard_normal((n, n))
        Q = G @ G.T / n + 0.1 * np.eye(n)
    C = rng.standard_normal((m1, m1))
    R1 = np.eye(m1) + 0.1 * C @ C.T
    return A, B1, B2, linalg.sym(Q), linalg.sym(R1)


def generate_instance(n, m1, m2, seed, indefinite_at_ne=False, r2_margin=1.0):
    """Seeded random game with a certified Nash equilibrium reachable from ``L0 = 0``.

    ``R2 = gamma I`` starts at ``gamma = 1`` and doubles until ``qn_outer``
    from zero returns a passing certificate. With ``indefinite_at_ne`` the
    state weight is rank deficient and the draw is kept only when
    ``Q - L*'R2 L*`` has a negative eigenvalue. Each rejected draw takes fresh
    random data; after ``GENERATOR_MAX_DRAWS`` draws a
    :class:`NonConvergenceError` is raised.

    ``r2_margin > 1`` scales the accepted ``R2`` up once more, which weakens the
    maximizer; the equilibrium is then re-certified.
    """
    from .outer import qn_outer

    if min(n, m1, m2) < 1:
        raise ValueError("n, m1 and m2 must be at least 1")
    rng = np.random.default_rng(seed)
    for _ in range(GENERATOR_MAX_DRAWS):
        A, B1, B2, Q, R1 = _draw(rng, n, m1, m2, indefinite_at_ne)
        if not linalg.is_stabilizable(A, B1):
            continue
        gamma = 1.0
        for _ in range(R2_MAX_DOUBLINGS):
            game = GameInstance(A, B1, B2, Q, R1, gamma * np.eye(m2))
            try:
                sol = qn_outer(game, tol=1e-10, max_iter=50)
            except LQNashError:
                gamma *= 2.0
                continue
            if sol.certificate.passed and r2_margin != 1.0:
                game = GameInstance(A, B1, B2, Q, R1, r2_margin * gamma * np.eye(m2))
                try:
                    sol = qn_outer(game, tol=1e-10, max_iter=50)
                except LQNashError:
                    break
            if sol.certificate.passed:
                break
            gamma *= 2.0
        else:
            continue
        if not sol.certificate.passed:
            continue
        if indefinite_at_ne:
            W = game.Q - sol.L_star.T @ game.R2 @ sol.L_star
            if not linalg.lambda_min(W) < -1e-8:
                continue
        return game
    raise NonConvergenceError(f"no acceptable instance in {GENERATOR_MAX_DRAWS} draws")
