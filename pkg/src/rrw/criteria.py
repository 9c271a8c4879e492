"""Recurrence/transience verdicts from the drift criteria.

Decision procedure (each rule carries an explicit hypothesis audit; a
non-Inconclusive verdict requires every hypothesis satisfied and the
deciding inequality to clear its 99% confidence margin):

  1. identity f       -> Solomon's criterion on the limiting environment
  2. unique fixed point p != 1/2                 -> Transient
  3. f >= 1/2 on [0,1]: estimate E[delta^1_inf]; divergence forced
     (a stable fixed point != 1/2, or f''(1/2) > 0 = f'(1/2)) -> Transient;
     else CI entirely <= 1 -> Recurrent, entirely > 1 -> Transient
  4. unique fixed point 1/2 with f'(1/2) = 0: estimated E[delta^1] > 1 or
     E[delta^-1] < -1 (with margin) -> Transient (sufficiency only)
  5. f >= 1/2 on [1/2,1] with all fixed points >= 1/2 and either 1/2 not
     fixed, or fixed-but-not-unique with f'(1/2) = 0 -> Transient
  6. otherwise Inconclusive

Checking the unique off-center fixed point before the f >= 1/2 branch is
outcome-equivalent to running the f >= 1/2 branch first (both force
transience there) and lets the verdict cite the sharper rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

from .drift import Z99, DriftConfig, classify_regime, estimate_delta_inf
from .errors import InvalidParameter, NonIsolatedFixedPoints, NotLinear
from .streams import as_stream
from .urn import UrnState, simulate_urn_batch
from .walk import EnvironmentSpec

__all__ = [
    "ClassificationVerdict", "ClassicalWeights", "ClassifyConfig",
    "classify", "map_classical_weights", "solomon_check", "SolomonReport",
    "RULE_HYPOTHESES",
]

RECURRENT = "Recurrent"
TRANSIENT = "Transient"
INCONCLUSIVE = "Inconclusive"

# hypothesis lists per rule, frozen for the audit snapshot test
RULE_HYPOTHESES = {
    "solomon_linear": (
        "f is the identity",
        "initial urns identical at every site",
    ),
    "theorem2_p_ne_half": (
        "environment homogeneous on each side of the origin",
        "f has a unique fixed point",
        "the fixed point differs from 1/2",
    ),
    "theorem1_recurrence_criterion": (
        "environment homogeneous on x >= 1",
        "f >= 1/2 on [0, 1]",
        "drift estimate E[delta^1] resolved against 1 at 99% confidence",
    ),
    "theorem1_divergent_drift": (
        "environment homogeneous on x >= 1",
        "f >= 1/2 on [0, 1]",
        "a stable fixed point differs from 1/2, or f'(1/2) = 0 with f''(1/2) > 0",
    ),
    "theorem2_sufficient_drift": (
        "environment homogeneous on each side of the origin",
        "f has the unique fixed point 1/2",
        "f'(1/2) = 0",
        "estimated E[delta^1] > 1 or E[delta^-1] < -1 with confidence margin",
    ),
    "corollary_second_derivative": (
        "environment homogeneous on each side of the origin",
        "f has the unique fixed point 1/2",
        "f'(1/2) = 0",
        "f''(1/2) != 0",
    ),
    "corollary_right_half": (
        "environment homogeneous on each side of the origin",
        "f >= 1/2 on [1/2, 1]",
        "all fixed points >= 1/2",
        "1/2 is not fixed, or is fixed but not unique with f'(1/2) = 0",
    ),
}


@dataclass(frozen=True)
class ClassifyConfig:
    drift: DriftConfig = field(default_factory=lambda: DriftConfig(n_dp=4000, method="dp"))
    confidence_z: float = Z99


@dataclass(frozen=True)
class ClassificationVerdict:
    verdict: str
    rule: str
    evidence: dict
    audit: tuple  # of (hypothesis, ok)

    def to_json_dict(self):
        return {
            "verdict": self.verdict,
            "rule": self.rule,
            "evidence": self.evidence,
            "audit": [{"hypothesis": h, "ok": ok} for h, ok in self.audit],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _audit(rule, flags):
    hyps = RULE_HYPOTHESES[rule]
    assert len(hyps) == len(flags)
    return tuple(zip(hyps, flags))


def _estimate_evidence(est):
    d = est.to_json_dict()
    d["rationale"] = est.rationale
    return d


def classify(f, env, budget=None):
    """Produce a ClassificationVerdict for the walk driven by f in env."""
    budget = budget or ClassifyConfig()
    z = budget.confidence_z
    evidence = {}
    failed_audits = []

    # (1) identity: random walk in the i.i.d. Polya environment
    if f.is_identity():
        homogeneous = (env.w0 == env.w_plus and env.w_minus_effective == env.w_plus)
        if homogeneous:
            rep = solomon_check(env.w0, f=f, stream=as_stream(budget.drift.seed))
            evidence["solomon"] = rep.to_json_dict()
            return ClassificationVerdict(
                verdict=rep.verdict, rule="solomon_linear",
                evidence=evidence, audit=_audit("solomon_linear", (True, True)))
        failed_audits.append(("solomon_linear", _audit("solomon_linear", (True, False))))
        return ClassificationVerdict(INCONCLUSIVE, "none", evidence,
                                     failed_audits[0][1])

    try:
        report = f.analysis()
    except NonIsolatedFixedPoints:
        return ClassificationVerdict(
            INCONCLUSIVE, "none",
            {"note": "fixed points of f are not isolated"}, ())
    evidence["fixed_points"] = report.to_json_dict()
    regime, rationale = classify_regime(report)

    # (2) unique fixed point away from 1/2
    if report.unique and abs(report.points[0].p - 0.5) > 1e-9:
        return ClassificationVerdict(
            TRANSIENT, "theorem2_p_ne_half", evidence,
            _audit("theorem2_p_ne_half", (True, True, True)))

    # (3) nonnegative-drift regime
    if report.ge_half:
        stable_off_center = any(
            fp.stable and abs(fp.p - 0.5) > 1e-9 for fp in report.points)
        second_positive = (abs(report.fprime_half) <= 1e-7 and report.fsecond_half > 1e-5)
        if stable_off_center or second_positive:
            return ClassificationVerdict(
                TRANSIENT, "theorem1_divergent_drift", evidence,
                _audit("theorem1_divergent_drift", (True, True, True)))
        est = estimate_delta_inf(f, env.w_plus, budget.drift)
        evidence["delta1"] = _estimate_evidence(est)
        lo, hi = est.ci(z)
        if hi <= 1.0:
            return ClassificationVerdict(
                RECURRENT, "theorem1_recurrence_criterion", evidence,
                _audit("theorem1_recurrence_criterion", (True, True, True)))
        if lo > 1.0:
            return ClassificationVerdict(
                TRANSIENT, "theorem1_recurrence_criterion", evidence,
                _audit("theorem1_recurrence_criterion", (True, True, True)))
        return ClassificationVerdict(
            INCONCLUSIVE, "theorem1_recurrence_criterion", evidence,
            _audit("theorem1_recurrence_criterion", (True, True, False)))

    # (4) unique fixed point 1/2, flat first derivative
    if report.unique and abs(report.fprime_half) <= 1e-7:
        if abs(report.fsecond_half) > 1e-5:
            return ClassificationVerdict(
                TRANSIENT, "corollary_second_derivative", evidence,
                _audit("corollary_second_derivative", (True, True, True, True)))
        est1 = estimate_delta_inf(f, env.w_plus, budget.drift)
        est_m = estimate_delta_inf(f, env.w_minus_effective, budget.drift)
        evidence["delta1"] = _estimate_evidence(est1)
        evidence["delta_minus1"] = _estimate_evidence(est_m)
        lo1, _ = est1.ci(z)
        _, him = est_m.ci(z)
        if lo1 > 1.0 or him < -1.0:
            return ClassificationVerdict(
                TRANSIENT, "theorem2_sufficient_drift", evidence,
                _audit("theorem2_sufficient_drift", (True, True, True, True)))
        return ClassificationVerdict(
            INCONCLUSIVE, "theorem2_sufficient_drift", evidence,
            _audit("theorem2_sufficient_drift", (True, True, True, False)))

    # (5) right-half corollary
    if report.ge_half_right and all(fp.p >= 0.5 - 1e-9 for fp in report.points):
        half_fixed = any(abs(fp.p - 0.5) <= 1e-9 for fp in report.points)
        bullet = (not half_fixed) or (
            not report.unique and abs(report.fprime_half) <= 1e-7)
        if bullet:
            return ClassificationVerdict(
                TRANSIENT, "corollary_right_half", evidence,
                _audit("corollary_right_half", (True, True, True, True)))

    # (6) nothing applies
    audit = []
    for rule in ("theorem1_recurrence_criterion", "theorem2_p_ne_half",
                 "theorem2_sufficient_drift", "corollary_right_half"):
        hyps = RULE_HYPOTHESES[rule]
        flags = _failed_flags(rule, report)
        audit.extend(zip(hyps, flags))
    evidence["regime"] = regime
    evidence["rationale"] = rationale
    return ClassificationVerdict(INCONCLUSIVE, "none", evidence, tuple(audit))


def _failed_flags(rule, report):
    half_fixed = any(abs(fp.p - 0.5) <= 1e-9 for fp in report.points)
    if rule == "theorem1_recurrence_criterion":
        return (True, report.ge_half, False)
    if rule == "theorem2_p_ne_half":
        return (True, report.unique,
                report.unique and abs(report.points[0].p - 0.5) > 1e-9)
    if rule == "theorem2_sufficient_drift":
        return (True, report.unique and half_fixed,
                abs(report.fprime_half) <= 1e-7, False)
    if rule == "corollary_right_half":
        all_right = all(fp.p >= 0.5 - 1e-9 for fp in report.points)
        bullet = (not half_fixed) or (not report.unique and abs(report.fprime_half) <= 1e-7)
        return (True, report.ge_half_right, all_right, bullet)
    raise InvalidParameter(rule)


@dataclass(frozen=True)
class ClassicalWeights:
    """Initial weights of the classical directed/undirected reinforcement."""

    mode: str                 # "directed" | "undirected"
    delta: float              # reinforcement increment
    a_right: float = None     # directed initial weight toward x+1
    a_left: float = None      # directed initial weight toward x-1
    b0: float = None          # undirected initial edge weight

    def __post_init__(self):
        if self.mode not in ("directed", "undirected"):
            raise InvalidParameter(f"unknown mode {self.mode!r}")
        if self.delta <= 0:
            raise InvalidParameter(f"reinforcement increment must be > 0, got {self.delta}")
        if self.mode == "directed":
            if self.a_right is None or self.a_left is None:
                raise InvalidParameter("directed weights need a_right and a_left")
            if self.a_right <= 0 or self.a_left <= 0:
                raise InvalidParameter("weights must be positive")
        else:
            if self.b0 is None or self.b0 <= 0:
                raise InvalidParameter("undirected weights need b0 > 0")


def map_classical_weights(w):
    """Environment equivalent to the classical reinforcement started at 0."""
    if w.mode == "directed":
        total = w.a_left + w.a_right
        st = UrnState(w.a_right / total, total / w.delta)
        return EnvironmentSpec(w0=st, w_plus=st, w_minus=st)
    b0, d = w.b0, w.delta
    w0 = UrnState(0.5, b0 / d)
    l_side = (2.0 * b0 + d) / (2.0 * d)
    plus = UrnState(b0 / (2.0 * b0 + d), l_side)
    minus = UrnState((b0 + d) / (2.0 * b0 + d), l_side)
    return EnvironmentSpec(w0=w0, w_plus=plus, w_minus=minus)


@dataclass(frozen=True)
class SolomonReport:
    criterion: float          # E[ln(alpha/(1-alpha))] under the Beta limit law
    verdict: str
    direction: str            # "right" | "left" | "none"
    beta_a: float
    beta_b: float
    mc_mean: float
    mc_stderr: float

    def to_json_dict(self):
        return {
            "criterion": self.criterion,
            "verdict": self.verdict,
            "direction": self.direction,
            "beta": [self.beta_a, self.beta_b],
            "mc_mean": self.mc_mean,
            "mc_stderr": self.mc_stderr,
        }


def solomon_check(init, f=None, stream=0, mc_horizon=100_000, mc_replicas=1_000,
                  tolerance=1e-9):
    """Recurrence criterion for the identity f: E[ln(alpha/(1-alpha))] = 0.

    ``init`` is an UrnState or a pair of integer ball counts (red, blue).
    The limit law of the site proportion is Beta(l0*alpha0, l0*(1-alpha0)),
    so the criterion equals digamma(a) - digamma(b) in closed form; a Monte
    Carlo run of the urn at a long horizon cross-checks it.
    """
    if f is not None and not f.is_identity():
        raise NotLinear(f"{f.source} is not the identity")
    if isinstance(init, tuple):
        red, blue = init
        if red <= 0 or blue <= 0:
            raise InvalidParameter("ball counts must be positive")
        init = UrnState(red / (red + blue), float(red + blue))
    a = init.alpha * init.l
    b = (1.0 - init.alpha) * init.l
    if a <= 0 or b <= 0:
        raise InvalidParameter("both colors need positive initial mass")
    criterion = float(digamma(a) - digamma(b))

    from .funcs import builtin  # local import to avoid a cycle at module load
    polya = builtin("polya")
    res = simulate_urn_batch(polya, init, mc_horizon, mc_replicas, as_stream(stream),
                             collect=("alpha",))
    vals = np.log(np.clip(res["alpha"], 1e-12, 1 - 1e-12))
    vals -= np.log1p(-np.clip(res["alpha"], 1e-12, 1 - 1e-12))
    mc_mean = float(vals.mean())
    mc_stderr = float(vals.std(ddof=1) / math.sqrt(len(vals)))

    if abs(criterion) <= tolerance:
        verdict, direction = RECURRENT, "none"
    else:
        verdict, direction = TRANSIENT, ("right" if criterion > 0 else "left")
    return SolomonReport(criterion=criterion, verdict=verdict, direction=direction,
                         beta_a=a, beta_b=b, mc_mean=mc_mean, mc_stderr=mc_stderr)
