"""Accumulated drift of an urn: the series delta_n = sum_{k<=n} (2 f(alpha_k) - 1),
its positive/negative parts, and regime-aware estimation of E[delta_inf].

Regimes follow the fixed-point shape of f:

  ConvergentFinite   unique fixed point 1/2, f'(1/2) = 0, f''(1/2) = 0
  DivergentPlus      unique fixed point p > 1/2, or p = 1/2 with f'' > 0
  DivergentMinus     mirror cases
  PartsInfinite      unique fixed point 1/2 with f'(1/2) != 0
  Unknown            several fixed points: truncated estimate only

Divergence is reported as an inf sentinel plus the regime tag, never as a
large float.  The tail model for convergent estimates is c * N^(-1/2)
(`tail_model: "sqrt"`), applied over the last decade of the curve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, UnsupportedRegime
from .streams import as_stream
from .utils import ff
from .urn import (DP_HORIZON_GUARD, UrnState, exact_urn_dp, simulate_urn,
                  simulate_urn_batch)

__all__ = [
    "DriftConfig", "DriftSeries", "DriftEstimate", "DriftProfile", "CltReport",
    "drift_series", "estimate_delta_inf", "drift_parts_profile", "clt_check",
    "classify_regime", "fit_tail_sqrt", "fit_tail_exponent", "fit_growth_exponent",
    "Z99",
]

Z99 = 2.5758293035489004

# zero-tolerances for deciding the regime from the analysis report
_P_TOL = 1e-9
_FPRIME_TOL = 1e-7
_FSECOND_TOL = 1e-5

CONVERGENT = "ConvergentFinite"
DIVERGENT_PLUS = "DivergentPlus"
DIVERGENT_MINUS = "DivergentMinus"
PARTS_INFINITE = "PartsInfinite"
UNKNOWN = "Unknown"


@dataclass(frozen=True)
class DriftConfig:
    n_dp: int = 10_000
    n_mc: int = 1_000_000
    replicas: int = 10_000
    seed: int = 0
    method: str = "dp+mc+tail"  # "dp" | "mc" | "dp+mc+tail"
    checkpoints_per_decade: int = 12
    dp_guard: int = DP_HORIZON_GUARD


@dataclass(frozen=True)
class DriftSeries:
    values: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    mode: str  # "path" | "exact"

    def __post_init__(self):
        assert self.mode in ("path", "exact")


def drift_series(f, init, n, stream=0, exact=False):
    """delta_0..delta_n along one trajectory, or its exact expectation curve."""
    if n < 0:
        raise InvalidParameter("n must be >= 0")
    if exact:
        law = exact_urn_dp(f, init, n)
        return DriftSeries(law.delta_mean, law.delta_pos, law.delta_neg, "exact")
    traj = simulate_urn(f, init, n, stream)
    inc = 2.0 * np.asarray(f(traj.alphas), dtype=float) - 1.0
    pos = np.cumsum(np.maximum(inc, 0.0))
    neg = np.cumsum(np.maximum(-inc, 0.0))
    return DriftSeries(pos - neg, pos, neg, "path")


@dataclass(frozen=True)
class DriftEstimate:
    mean: float            # +-inf sentinels in divergent regimes, nan for PartsInfinite
    stderr: float
    N: int                 # truncation horizon backing the estimate
    regime: str
    method: str
    tail_model: str = "none"      # "sqrt" when a tail correction was applied
    tail_correction: float = 0.0
    tail_error: float = 0.0
    tail_exponent: float = float("nan")  # 3-parameter diagnostic fit
    opposite_part: tuple = None   # (mean, error) of the finite part in divergent regimes
    growth: dict = None           # fitted growth exponents in PartsInfinite
    rationale: str = ""

    def ci_halfwidth(self, z=Z99):
        return z * self.stderr + self.tail_error

    def ci(self, z=Z99):
        if math.isinf(self.mean):
            return (self.mean, self.mean)
        h = self.ci_halfwidth(z)
        return (self.mean - h, self.mean + h)

    def to_json_dict(self):
        def enc(v):
            if isinstance(v, float) and math.isinf(v):
                return "+inf" if v > 0 else "-inf"
            if isinstance(v, float) and math.isnan(v):
                return None
            return v

        return {
            "mean": enc(self.mean),
            "stderr": enc(self.stderr),
            "N": self.N,
            "tail": {
                "model": self.tail_model,
                "correction": enc(self.tail_correction),
                "error": enc(self.tail_error),
                "exponent": enc(self.tail_exponent),
            },
            "regime": self.regime,
            "method": self.method,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)


def classify_regime(report):
    """Map a FixedPointReport onto a drift regime with a one-line rationale."""
    if not report.unique:
        return UNKNOWN, f"{len(report.points)} fixed points: no proposition applies"
    p = report.points[0].p
    if p > 0.5 + _P_TOL:
        return DIVERGENT_PLUS, f"unique fixed point p = {p:.6g} > 1/2"
    if p < 0.5 - _P_TOL:
        return DIVERGENT_MINUS, f"unique fixed point p = {p:.6g} < 1/2"
    if abs(report.fprime_half) > _FPRIME_TOL:
        return PARTS_INFINITE, f"f'(1/2) = {report.fprime_half:.6g} != 0"
    if report.fsecond_half > _FSECOND_TOL:
        return DIVERGENT_PLUS, f"f''(1/2) = {report.fsecond_half:.6g} > 0"
    if report.fsecond_half < -_FSECOND_TOL:
        return DIVERGENT_MINUS, f"f''(1/2) = {report.fsecond_half:.6g} < 0"
    return CONVERGENT, "unique fixed point 1/2 with f'(1/2) = f''(1/2) = 0"


def _geometric_checkpoints(lo, hi, count):
    pts = np.unique(np.round(np.geomspace(max(lo, 1), hi, count)).astype(int))
    return pts[pts >= 1]


def fit_tail_sqrt(ns, ys):
    """LSQ fit of y ~ A - c * n^(-1/2); returns (A, c, rms residual)."""
    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    X = np.column_stack([np.ones_like(ns), -(ns ** -0.5)])
    coef, *_ = np.linalg.lstsq(X, ys, rcond=None)
    resid = X @ coef - ys
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return float(coef[0]), float(coef[1]), rms


def fit_tail_exponent(ns, ys, betas=None):
    """3-parameter diagnostic fit y ~ A - c * n^(-beta) over a beta grid."""
    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(ns) < 4 or np.allclose(ys, ys[0]):
        return float("nan")
    if betas is None:
        betas = np.linspace(0.05, 2.5, 491)
    best_beta, best_rss = float("nan"), np.inf
    for beta in betas:
        X = np.column_stack([np.ones_like(ns), -(ns ** -beta)])
        coef, *_ = np.linalg.lstsq(X, ys, rcond=None)
        rss = float(np.sum((X @ coef - ys) ** 2))
        if rss < best_rss:
            best_rss, best_beta = rss, float(beta)
    return best_beta


def fit_growth_exponent(ns, ys):
    """Log-log LSQ slope of a growing positive series; None when degenerate."""
    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    good = ys > 0
    if np.count_nonzero(good) < 3:
        return None
    ns, ys = ns[good], ys[good]
    if ys.max() / ys.min() < 1.05:
        return None
    return float(np.polyfit(np.log(ns), np.log(ys), 1)[0])


def _mc_continuation(f, law, n_mc, replicas, stream, checkpoints, block=8192):
    """Continue replicas past the DP horizon, sampling the start from the DP row.

    Returns (per-replica delta increments at the end, means at checkpoints).
    Replica r consumes stream.child(r): the first uniform selects the DP
    state, the rest drive the continuation steps.
    """
    n0 = law.horizon
    cdf = np.cumsum(law.final_row)
    cdf[-1] = 1.0
    a0l0 = law.init.alpha * law.init.l
    steps = n_mc - n0
    cp = [c - n0 for c in checkpoints]
    final = np.empty(replicas)
    cp_sums = np.zeros(len(cp))
    step_chunk = max(256, (1 << 24) // max(block, 1))

    for start in range(0, replicas, block):
        stop = min(start + block, replicas)
        m = stop - start
        gens = [stream.child(start + r).generator() for r in range(m)]
        u0 = np.array([g.random() for g in gens])
        k = np.searchsorted(cdf, u0, side="right").astype(float)
        red = a0l0 + k
        l = law.init.l + n0
        alpha = red / l
        delta = np.zeros(m)
        fa = f(alpha)
        ci = 0
        done = 0
        while done < steps:
            width = min(step_chunk, steps - done)
            uniforms = np.empty((m, width))
            for r in range(m):
                uniforms[r] = gens[r].random(width)
            for j in range(width):
                red += uniforms[:, j] < fa
                l += 1.0
                alpha = red / l
                fa = f(alpha)
                delta += 2.0 * fa - 1.0
                while ci < len(cp) and cp[ci] == done + j + 1:
                    cp_sums[ci] += delta.sum()
                    ci += 1
            done += width
        final[start:stop] = delta
    return final, cp_sums / replicas


def estimate_delta_inf(f, init, config=None):
    """Estimate E[delta_inf] with the regime policy described in the module docstring."""
    config = config or DriftConfig()
    report = f.analysis()
    regime, rationale = classify_regime(report)
    n_dp = min(config.n_dp, config.dp_guard)
    stream = as_stream(config.seed)

    if regime == CONVERGENT:
        if config.method == "mc":
            n = config.n_mc
            cps = _geometric_checkpoints(max(2, n // 10), n, config.checkpoints_per_decade)
            res = simulate_urn_batch(f, init, n, config.replicas, stream,
                                     checkpoints=cps, collect=("delta",))
            curve = res["delta_checkpoints"].mean(axis=1)
            final = res["delta"]
            mean_n = float(final.mean())
            stderr = float(final.std(ddof=1) / math.sqrt(len(final))) if len(final) > 1 else 0.0
            A, c, rms = fit_tail_sqrt(cps, curve)
            corr = A - mean_n
            tail_err = abs(corr) + 3.0 * rms
            return DriftEstimate(mean=mean_n + corr, stderr=stderr, N=n, regime=regime,
                                 method="mc", tail_model="sqrt", tail_correction=corr,
                                 tail_error=tail_err,
                                 tail_exponent=fit_tail_exponent(cps, curve),
                                 rationale=rationale)
        law = exact_urn_dp(f, init, n_dp, keep_table=False)
        cps = _geometric_checkpoints(max(2, n_dp // 10), n_dp, config.checkpoints_per_decade)
        curve = law.delta_mean[cps]
        A, c, rms = fit_tail_sqrt(cps, curve)
        corr = A - float(law.delta_mean[n_dp])
        tail_err = abs(corr) + 3.0 * rms
        beta = fit_tail_exponent(cps, curve)
        if config.method == "dp":
            return DriftEstimate(mean=A, stderr=0.0, N=n_dp, regime=regime, method="dp",
                                 tail_model="sqrt", tail_correction=corr, tail_error=tail_err,
                                 tail_exponent=beta, rationale=rationale)
        # dp + mc + tail: exact start, Monte Carlo continuation, tail fit at the far end
        n_mc = max(config.n_mc, n_dp + 1)
        cps_mc = [int(c) for c in
                  _geometric_checkpoints(max(n_dp + 1, n_mc // 10), n_mc,
                                         config.checkpoints_per_decade)]
        final, cp_means = _mc_continuation(f, law, n_mc, config.replicas, stream, cps_mc)
        base = float(law.delta_mean[n_dp])
        mean_n = base + float(final.mean())
        stderr = float(final.std(ddof=1) / math.sqrt(len(final))) if len(final) > 1 else 0.0
        curve_mc = base + cp_means
        A, c, rms = fit_tail_sqrt(cps_mc, curve_mc)
        corr = A - mean_n
        tail_err = abs(corr) + 3.0 * rms
        return DriftEstimate(mean=mean_n + corr, stderr=stderr, N=n_mc, regime=regime,
                             method="dp+mc+tail", tail_model="sqrt", tail_correction=corr,
                             tail_error=tail_err,
                             tail_exponent=fit_tail_exponent(cps_mc, curve_mc),
                             rationale=rationale)

    if regime in (DIVERGENT_PLUS, DIVERGENT_MINUS):
        law = exact_urn_dp(f, init, n_dp, keep_table=False)
        fin = law.delta_neg if regime == DIVERGENT_PLUS else law.delta_pos
        est = float(fin[n_dp])
        band = float(abs(fin[n_dp] - fin[max(1, n_dp // 10)]))
        return DriftEstimate(mean=math.inf if regime == DIVERGENT_PLUS else -math.inf,
                             stderr=0.0, N=n_dp, regime=regime, method="dp",
                             opposite_part=(est, band), rationale=rationale)

    if regime == PARTS_INFINITE:
        law = exact_urn_dp(f, init, n_dp, keep_table=False)
        cps = _geometric_checkpoints(max(10, n_dp // 100), n_dp, 2 * config.checkpoints_per_decade)
        growth = {
            "pos": fit_growth_exponent(cps, law.delta_pos[cps]),
            "neg": fit_growth_exponent(cps, law.delta_neg[cps]),
        }
        return DriftEstimate(mean=float("nan"), stderr=0.0, N=n_dp, regime=regime,
                             method="dp", growth=growth, rationale=rationale)

    # Unknown: several fixed points, no proposition applies; truncated value only
    law = exact_urn_dp(f, init, n_dp, keep_table=False)
    return DriftEstimate(mean=float(law.delta_mean[n_dp]), stderr=0.0, N=n_dp,
                         regime=UNKNOWN, method="dp-truncated", rationale=rationale)


@dataclass(frozen=True)
class DriftProfile:
    checkpoints: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    pos_mean: np.ndarray
    pos_stderr: np.ndarray
    neg_mean: np.ndarray
    neg_stderr: np.ndarray
    pos_exponent: float    # None when the part is degenerate/converged
    neg_exponent: float
    tail_exponent: float   # 3-parameter fit on the total-drift curve
    replicas: int
    exact: bool

    def to_csv(self, out):
        out.write("N,mean,stderr,pos_part,neg_part\n")
        for i, n in enumerate(self.checkpoints):
            out.write(f"{n},{ff(self.mean[i])},{ff(self.stderr[i])},"
                      f"{ff(self.pos_mean[i])},{ff(self.neg_mean[i])}\n")


def drift_parts_profile(f, init, N, replicas, stream=0, checkpoints=None, exact=False):
    """Growth report of E[delta_N^+], E[delta_N^-] at geometric checkpoints."""
    if N < 100:
        raise InvalidParameter("profile horizon must be >= 100")
    if checkpoints is None:
        checkpoints = _geometric_checkpoints(max(100, N // 20), N, 12)
    cps = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)

    if exact:
        law = exact_urn_dp(f, init, N, keep_table=False)
        zeros = np.zeros(len(cps))
        mean, pos, neg = law.delta_mean[cps], law.delta_pos[cps], law.delta_neg[cps]
        stderr = pstderr = nstderr = zeros
        replicas_used = 0
    else:
        res = simulate_urn_batch(f, init, N, replicas, as_stream(stream), checkpoints=cps,
                                 collect=("delta", "delta_pos", "delta_neg"))
        sq = math.sqrt(replicas)

        def stats(name):
            m = res[name + "_checkpoints"]
            return m.mean(axis=1), m.std(axis=1, ddof=1) / sq

        mean, stderr = stats("delta")
        pos, pstderr = stats("delta_pos")
        neg, nstderr = stats("delta_neg")
        replicas_used = replicas

    return DriftProfile(
        checkpoints=cps, mean=np.asarray(mean), stderr=np.asarray(stderr),
        pos_mean=np.asarray(pos), pos_stderr=np.asarray(pstderr),
        neg_mean=np.asarray(neg), neg_stderr=np.asarray(nstderr),
        pos_exponent=fit_growth_exponent(cps, pos),
        neg_exponent=fit_growth_exponent(cps, neg),
        tail_exponent=fit_tail_exponent(cps, mean),
        replicas=replicas_used, exact=exact,
    )


@dataclass(frozen=True)
class CltReport:
    empirical_variance: float
    target_variance: float
    ratio: float
    retained: int
    replicas: int
    n: int
    p: float
    a: float

    def to_json_dict(self):
        return {
            "empirical_variance": self.empirical_variance,
            "target_variance": self.target_variance,
            "ratio": self.ratio,
            "retained": self.retained,
            "replicas": self.replicas,
            "n": self.n,
            "p": self.p,
            "a": self.a,
        }


def clt_check(f, p, n, replicas, stream=0, init=None, window=0.1):
    """Empirical variance of sqrt(n)(alpha_n - p) against p(1-p)/(1-2a), a = f'(p).

    Conditioning on convergence to p is approximated by keeping replicas
    with |alpha_n - p| < window.
    """
    if abs(float(f(p)) - p) > 1e-6:
        raise InvalidParameter(f"p = {p} is not a fixed point of {f.source}")
    a = float(f.fprime(p))
    if a >= 0.5:
        raise UnsupportedRegime(f"f'(p) = {a:.6g} >= 1/2: outside the CLT hypothesis")
    init = init or UrnState(0.5, 2.0)
    res = simulate_urn_batch(f, init, n, replicas, as_stream(stream), collect=("alpha",))
    alpha = res["alpha"]
    keep = np.abs(alpha - p) < window
    z = math.sqrt(n) * (alpha[keep] - p)
    if len(z) < 2:
        raise UnsupportedRegime("no replicas retained in the conditioning window")
    emp = float(np.var(z, ddof=1))
    target = p * (1.0 - p) / (1.0 - 2.0 * a)
    return CltReport(empirical_variance=emp, target_variance=target, ratio=emp / target,
                     retained=int(keep.sum()), replicas=replicas, n=n, p=p, a=a)
