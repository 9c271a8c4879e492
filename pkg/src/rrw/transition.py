"""Phase-transition thresholds in the family scale u and the initial mass l.

E[delta_inf] is nondecreasing in u and nonincreasing in l (urns start at
(1/2, 2l)), so a CI-aware monotone bisection brackets the crossing of the
target value 1.  An endpoint is assigned a side only when its 99% interval
clears the target; replicas double until it does or the budget caps out.

Sidedness is asymmetric on purpose: truncated estimates underestimate the
drift when f >= 1/2, so "above target" needs no tail allowance while
"below target" includes the fitted sqrt tail band.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .drift import CONVERGENT, Z99, classify_regime, fit_tail_sqrt
from .errors import InvalidParameter, MonotonicityViolation
from .funcs import make_family
from .streams import as_stream
from .utils import ff
from .urn import UrnState, exact_urn_dp, simulate_urn_batch

__all__ = [
    "ThresholdBudget", "ThresholdResult", "BisectionStep", "EndpointEstimate",
    "find_threshold", "sweep", "SweepCurve",
]

BRACKETED = "Bracketed"
NO_CROSSING = "NoCrossing"
BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass(frozen=True)
class ThresholdBudget:
    search_range: tuple
    replicas0: int = 4_000
    replicas_max: int = 64_000
    n_trunc: int = 4_000
    max_evals: int = 40
    seed: int = 0
    confidence_z: float = Z99
    method: str = "mc"  # "mc" | "dp"


@dataclass(frozen=True)
class EndpointEstimate:
    param: float
    mean: float
    stderr: float
    tail_error: float
    n_trunc: int
    replicas: int
    regime: str

    def side(self, target, z):
        """-1 below target with margin, +1 above, 0 unresolved."""
        if self.mean - z * self.stderr > target:
            return 1
        if self.mean + z * self.stderr + self.tail_error < target:
            return -1
        return 0

    def to_json_dict(self):
        return {
            "param": self.param, "mean": self.mean, "stderr": self.stderr,
            "tail_error": self.tail_error, "N_trunc": self.n_trunc,
            "replicas": self.replicas, "regime": self.regime,
        }


@dataclass(frozen=True)
class BisectionStep:
    lo: float
    hi: float
    mid: float
    mid_mean: float
    side: int


@dataclass(frozen=True)
class ThresholdResult:
    axis: str
    lo: float
    hi: float
    est_lo: EndpointEstimate
    est_hi: EndpointEstimate
    status: str
    target: float
    iterations: tuple
    evals: int

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self):
        return self.hi - self.lo

    def to_json_dict(self):
        return {
            "axis": self.axis, "lo": self.lo, "hi": self.hi,
            "est_lo": self.est_lo.to_json_dict() if self.est_lo else None,
            "est_hi": self.est_hi.to_json_dict() if self.est_hi else None,
            "status": self.status,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _instantiate(axis, f_base, param, fixed_other_param):
    if axis == "u":
        f = make_family(f_base, param)
        l = fixed_other_param
    elif axis == "l":
        f = f_base
        l = param
    else:
        raise InvalidParameter(f"axis must be 'u' or 'l', got {axis!r}")
    if l <= 0:
        raise InvalidParameter(f"initial mass scale must be positive, got {l}")
    return f, UrnState(0.5, 2.0 * l)


def _estimate_endpoint(axis, f_base, param, fixed_other_param, budget, replicas, stream):
    """Truncated estimate of E[delta_inf] at one parameter value.

    The sqrt tail band is applied only in the convergent regime; elsewhere
    the truncated value stands alone (a growing curve has no meaningful
    sqrt extrapolation).
    """
    f, init = _instantiate(axis, f_base, param, fixed_other_param)
    try:
        regime, _ = classify_regime(f.analysis())
    except Exception:
        regime = "Unknown"
    n = budget.n_trunc
    cps = np.unique(np.round(np.geomspace(max(2, n // 10), n, 10)).astype(int))
    if budget.method == "dp":
        law = exact_urn_dp(f, init, n, keep_table=False)
        mean = float(law.delta_mean[n])
        stderr = 0.0
        curve = law.delta_mean[cps]
        reps = 0
    else:
        res = simulate_urn_batch(f, init, n, replicas, stream,
                                 checkpoints=cps, collect=("delta",))
        final = res["delta"]
        mean = float(final.mean())
        stderr = float(final.std(ddof=1) / math.sqrt(len(final)))
        curve = res["delta_checkpoints"].mean(axis=1)
        reps = replicas
    tail_error = 0.0
    if regime == CONVERGENT:
        A, c, rms = fit_tail_sqrt(cps, curve)
        corr = A - float(curve[-1])
        tail_error = abs(corr) + 3.0 * rms
    return EndpointEstimate(param=float(param), mean=mean, stderr=stderr,
                            tail_error=tail_error, n_trunc=n, replicas=reps,
                            regime=regime)


def _resolve_side(axis, f_base, param, fixed_other_param, budget, target, stream_key,
                  base_stream):
    """Escalate replicas until the endpoint CI clears the target."""
    replicas = budget.replicas0
    attempt = 0
    est = None
    while True:
        est = _estimate_endpoint(axis, f_base, param, fixed_other_param, budget,
                                 replicas, base_stream.child(stream_key, attempt))
        side = est.side(target, budget.confidence_z)
        if side != 0 or budget.method == "dp" or replicas >= budget.replicas_max:
            return est, side
        replicas = min(2 * replicas, budget.replicas_max)
        attempt += 1


def find_threshold(axis, f_base, fixed_other_param=1.0, target=1.0, tol=0.1,
                   budget=None):
    """Bracket the parameter where E[delta_inf] crosses ``target``.

    ``tol`` is the relative bracket width (width <= tol * midpoint).
    Bisection runs in log space (both axes span decades).  Raises
    MonotonicityViolation when resolved sides contradict the lemma order.
    """
    if budget is None or budget.search_range is None:
        raise InvalidParameter("a ThresholdBudget with search_range is required")
    lo, hi = budget.search_range
    if not (0 < lo < hi):
        raise InvalidParameter(f"need 0 < lo < hi, got {budget.search_range}")
    base = as_stream(budget.seed)
    increasing = axis == "u"  # E is nondecreasing in u, nonincreasing in l

    evals = 0

    def resolve(param, key):
        nonlocal evals
        evals += 1
        return _resolve_side(axis, f_base, param, fixed_other_param, budget,
                             target, key, base)

    est_lo, side_lo = resolve(lo, 0)
    est_hi, side_hi = resolve(hi, 1)
    low_side = -1 if increasing else 1    # side expected at the small-parameter end
    high_side = -low_side

    if side_lo == side_hi and side_lo != 0:
        return ThresholdResult(axis, lo, hi, est_lo, est_hi, NO_CROSSING,
                               target, (), evals)
    if side_lo != low_side or side_hi != high_side:
        if side_lo == 0 or side_hi == 0:
            return ThresholdResult(axis, lo, hi, est_lo, est_hi, BUDGET_EXHAUSTED,
                                   target, (), evals)
        raise MonotonicityViolation(
            f"endpoint sides ({side_lo}, {side_hi}) contradict monotonicity in {axis}")

    iterations = []
    key = 2
    while hi - lo > tol * 0.5 * (hi + lo) and evals < budget.max_evals:
        mid = math.sqrt(lo * hi)
        est_mid, side = resolve(mid, key)
        key += 1
        iterations.append(BisectionStep(lo=lo, hi=hi, mid=mid,
                                        mid_mean=est_mid.mean, side=side))
        if side == 0:
            return ThresholdResult(axis, lo, hi, est_lo, est_hi, BUDGET_EXHAUSTED,
                                   target, tuple(iterations), evals)
        if side == low_side:
            lo, est_lo = mid, est_mid
        else:
            hi, est_hi = mid, est_mid
    status = BRACKETED if hi - lo <= tol * 0.5 * (hi + lo) else BUDGET_EXHAUSTED
    return ThresholdResult(axis, lo, hi, est_lo, est_hi, status,
                           target, tuple(iterations), evals)


@dataclass(frozen=True)
class SweepCurve:
    axis: str
    params: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_replicas: np.ndarray
    n_trunc: np.ndarray
    monotone_flags: tuple  # indices i where (params[i], params[i+1]) violates order

    def to_csv(self, out):
        out.write("param,mean,stderr,n_replicas,N_trunc\n")
        for i in range(len(self.params)):
            out.write(f"{ff(self.params[i])},{ff(self.mean[i])},{ff(self.stderr[i])},"
                      f"{int(self.n_replicas[i])},{int(self.n_trunc[i])}\n")


def sweep(axis, f_base, grid, fixed_other_param=1.0, budget=None):
    """Curve of truncated E[delta_inf] estimates over a sorted parameter grid."""
    grid = list(grid)
    if sorted(grid) != grid:
        raise InvalidParameter("grid must be sorted ascending")
    budget = budget or ThresholdBudget(search_range=(min(grid), max(grid)))
    base = as_stream(budget.seed)
    ests = [
        _estimate_endpoint(axis, f_base, p, fixed_other_param, budget,
                           budget.replicas0, base.child(i))
        for i, p in enumerate(grid)
    ]
    means = np.array([e.mean for e in ests])
    errs = np.array([e.stderr for e in ests])
    flags = []
    sign = 1.0 if axis == "u" else -1.0
    for i in range(len(grid) - 1):
        drop = sign * (means[i] - means[i + 1])
        if drop > 3.0 * math.hypot(errs[i], errs[i + 1]):
            flags.append(i)
    return SweepCurve(axis=axis, params=np.asarray(grid, dtype=float), mean=means,
                      stderr=errs,
                      n_replicas=np.array([e.replicas for e in ests]),
                      n_trunc=np.array([e.n_trunc for e in ests]),
                      monotone_flags=tuple(flags))
