"""Convergence-rate tables for the leader loops.

Errors are cost gaps to the converged value of the same run. Gaps at or below
``NOISE_REL * max(1, |g*|)`` are rounding noise and are excluded from fits.
"""

from dataclasses import dataclass

import numpy as np

from .diagnostics import cost_gaps, quadratic_rate, tail_log_slope
from .errors import NonConvergenceError
from .outer import Leader, OuterMethod, SolverConfig, solve_nash

NOISE_REL = 1e-12
RATE_COLUMNS = ("method", "j", "cost", "error", "ng_norm")


@dataclass
class RateSummary:
    method: str
    converged: bool
    rounds: int
    tail_slope: float = None
    linear: bool = None
    q: float = None
    quadratic: bool = None

    def to_dict(self):
        return dict(self.__dict__)


def noise_floor(g_star):
    return NOISE_REL * max(1.0, abs(g_star))


def summarize(method, costs):
    """Fit both rate models to a converged cost sequence.

    The quadratic coefficient comes from the first pair above the noise floor;
    ``quadratic`` is true when every later pair stays within the x10 slack.
    """
    costs = np.asarray(costs, dtype=float)
    gaps = cost_gaps(costs)
    floor = noise_floor(costs[-1])
    slope = tail_log_slope(gaps, floor=floor)
    q, ok, checked = quadratic_rate(gaps, start_below=np.inf, floor=floor)
    return RateSummary(
        method, True, len(costs) - 1,
        tail_slope=slope,
        linear=None if slope is None else bool(slope < 0),
        q=None if q is None else float(q),
        quadratic=bool(ok and checked > 0) if q is not None else None,
    )


def run_rates(game, methods=("ng", "qn"), tol=1e-10, max_outer=500):
    """Run each leader-L method and return ``(rows, summaries)``.

    A method that hits its iteration cap contributes its partial rows (errors
    against its last cost) and a summary with ``converged=False`` and null fits.
    """
    rows, summaries = [], []
    for name in methods:
        cfg = SolverConfig(method=OuterMethod(name), leader=Leader.L, tol=tol, max_outer=max_outer)
        try:
            trace = solve_nash(game, cfg).trace
            summary = summarize(name, trace.column("cost"))
        except NonConvergenceError as exc:
            trace = exc.trace
            summary = RateSummary(name, False, len(trace) - 1 if trace else 0)
        if trace is not None and len(trace):
            costs = np.array(trace.column("cost"))
            for r, e in zip(trace.records, cost_gaps(costs)):
                rows.append((name, r.j, r.cost, float(e), r.ng_norm))
        summaries.append(summary)
    return rows, summaries
