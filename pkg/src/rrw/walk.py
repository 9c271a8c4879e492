"""Reinforced random walk on the integers, driven by one urn per site.

At site x with past visit count v and past right-moves r, the walk steps
right with probability f((alpha0(x)*l0(x) + r) / (l0(x) + v)) and the site
urn gains the corresponding ball.  One uniform is consumed per step, by
the current site's urn.

Per-site ledgers are sparse (only visited sites materialise); unvisited
sites are implied by the EnvironmentSpec, which is homogeneous away from
the origin: w0 at 0, w_plus on x >= 1, w_minus on x <= -1 (defaulting to
w_plus).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import HorizonTooLarge, InvalidParameter
from .streams import Stream, as_stream
from .utils import ff
from .urn import UrnState

__all__ = [
    "EnvironmentSpec", "WalkStop", "WalkRecord", "HitStats",
    "simulate_walk", "walk_functionals", "FunctionalSeries",
    "exact_walk_oracle", "OracleResult",
    "empirical_regime", "RegimeConfig", "RegimeReport",
    "DEFAULT_CAP",
]

DEFAULT_CAP = 10 ** 8
_ORACLE_MAX_HORIZON = 16


@dataclass(frozen=True)
class EnvironmentSpec:
    w0: UrnState
    w_plus: UrnState
    w_minus: UrnState = None  # defaults to w_plus

    @classmethod
    def homogeneous(cls, state):
        return cls(w0=state, w_plus=state, w_minus=state)

    @property
    def w_minus_effective(self):
        return self.w_minus if self.w_minus is not None else self.w_plus

    def site(self, x):
        if x == 0:
            return self.w0
        return self.w_plus if x > 0 else self.w_minus_effective

    def is_symmetric(self):
        wm = self.w_minus_effective
        return (wm.alpha == self.w_plus.alpha and wm.l == self.w_plus.l)

    def to_json_dict(self):
        d = {
            "w0": {"alpha": self.w0.alpha, "l": self.w0.l},
            "w_plus": {"alpha": self.w_plus.alpha, "l": self.w_plus.l},
        }
        if self.w_minus is not None:
            d["w_minus"] = {"alpha": self.w_minus.alpha, "l": self.w_minus.l}
        return d

    @classmethod
    def from_json_dict(cls, d):
        def st(key):
            v = d[key]
            return UrnState(float(v["alpha"]), float(v["l"]))

        return cls(w0=st("w0"), w_plus=st("w_plus"),
                   w_minus=st("w_minus") if "w_minus" in d else None)


@dataclass(frozen=True)
class WalkStop:
    kind: str            # "horizon" | "hit_level" | "hit_either"
    n: int = None        # horizon length
    a: int = None        # hit target
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.kind == "horizon":
            if self.n is None or self.n < 0:
                raise InvalidParameter("horizon stop needs n >= 0")
        elif self.kind in ("hit_level", "hit_either"):
            if self.a is None or self.a == 0:
                raise InvalidParameter(f"{self.kind} stop needs a nonzero level a")
        else:
            raise InvalidParameter(f"unknown stop kind {self.kind!r}")
        if self.cap <= 0:
            raise InvalidParameter("cap must be positive")

    @property
    def mode(self):
        return {"horizon": K.MODE_HORIZON, "hit_level": K.MODE_HIT_LEVEL,
                "hit_either": K.MODE_HIT_EITHER}[self.kind]

    @property
    def target(self):
        return self.n if self.kind == "horizon" else self.a


@dataclass(frozen=True)
class HitStats:
    T: int
    U: int
    d_plus: float


@dataclass(frozen=True)
class WalkRecord:
    f_source: str
    env: EnvironmentSpec
    stop: WalkStop
    stream: Stream
    steps: int
    status: str          # "stopped" | "cap"
    final_pos: int
    path: np.ndarray     # X_0..X_steps, or None when not recorded
    U: int
    x_plus: int
    d_plus: float
    hits: dict           # level -> HitStats for levels reached
    site_visits: dict
    site_rights: dict
    max_pos: int
    min_pos: int
    last_zero_step: int  # last k >= 1 with X_k = 0; -1 if none
    clamp_count: int

    def to_csv(self, out, f=None):
        """Path export: k,X,site_alpha,site_l (state of the site being left)."""
        if self.path is None:
            raise InvalidParameter("record has no stored path")
        out.write("k,X,site_alpha,site_l\n")
        series = _site_states_along_path(self.path, self.env)
        for k in range(len(self.path) - 1):
            out.write(f"{k},{self.path[k]},{ff(series.alpha[k])},{ff(series.l[k])}\n")
        out.write(f"{len(self.path) - 1},{self.path[-1]},,\n")


_INITIAL_SPAN = 8192
_CHUNK0 = 1024
_CHUNK_MAX = 1 << 17


def simulate_walk(f, env, stop, stream, record_path=None):
    """Run one walk; deterministic in (f, env, stop, stream).

    record_path defaults to True for horizon stops up to 10^7 steps and
    False otherwise (hitting-time runs can touch the 10^8-step cap).
    """
    stream = as_stream(stream)
    if record_path is None:
        record_path = stop.kind == "horizon" and stop.n <= 10 ** 7
    if record_path:
        limit = stop.n if stop.kind == "horizon" else stop.cap
        if limit > 10 ** 7:
            raise InvalidParameter("path recording beyond 1e7 steps; pass record_path=False")
        path = np.zeros(limit + 1, dtype=np.int64)
    else:
        path = np.zeros(1, dtype=np.int64)

    codes, args = f.program()
    w0, wp, wm = env.w0, env.w_plus, env.w_minus_effective
    levels = _hit_levels(stop)
    level_T = np.full(len(levels), -1, dtype=np.int64)
    level_U = np.full(len(levels), -1, dtype=np.int64)
    level_D = np.full(len(levels), np.nan)

    span = _INITIAL_SPAN
    visits = np.zeros(span, dtype=np.int64)
    rights = np.zeros(span, dtype=np.int64)
    touched = np.zeros(span, dtype=np.int64)
    istate = np.zeros(K.ISTATE_LEN, dtype=np.int64)
    fstate = np.zeros(K.FSTATE_LEN)
    gen = stream.generator()
    chunk = _CHUNK0
    leftover = np.empty(0)

    while True:
        uniforms = leftover if len(leftover) else gen.random(chunk)
        status = K.walk_kernel(
            codes, args,
            w0.red_mass, w0.l, wp.red_mass, wp.l, wm.red_mass, wm.l,
            visits, rights, touched, istate, fstate, uniforms,
            stop.mode, stop.target, stop.cap,
            levels, level_T, level_U, level_D,
            path, record_path,
        )
        used = istate[K.I_CONSUMED]
        leftover = uniforms[used:]
        if status == 0:
            chunk = min(chunk * 8, _CHUNK_MAX)
            continue
        if status == 3:
            visits, rights, touched = _grow(visits, rights, touched, istate)
            continue
        break

    steps = int(istate[K.I_NSTEPS])
    hits = {}
    for i, a in enumerate(levels):
        if level_T[i] >= 0:
            hits[int(a)] = HitStats(int(level_T[i]), int(level_U[i]), float(level_D[i]))
    span_k = len(visits) // 2
    tc = int(istate[K.I_TOUCHED])
    site_visits = {}
    site_rights = {}
    for idx in touched[:tc]:
        x = int(idx) - span_k
        site_visits[x] = int(visits[idx])
        site_rights[x] = int(rights[idx])

    return WalkRecord(
        f_source=f.source, env=env, stop=stop, stream=stream,
        steps=steps, status="cap" if status == 2 else "stopped",
        final_pos=int(istate[K.I_POS]),
        path=path[: steps + 1] if record_path else None,
        U=int(istate[K.I_U]), x_plus=int(istate[K.I_XPLUS]),
        d_plus=float(fstate[K.F_DPLUS]),
        hits=hits, site_visits=site_visits, site_rights=site_rights,
        max_pos=int(istate[K.I_MAXPOS]), min_pos=int(istate[K.I_MINPOS]),
        last_zero_step=int(istate[K.I_LASTZERO]) if istate[K.I_LASTZERO] > 0 else -1,
        clamp_count=int(fstate[K.F_CLAMPS]),
    )


def _hit_levels(stop):
    if stop.kind == "hit_level" and stop.a >= 1:
        return np.arange(1, stop.a + 1, dtype=np.int64)
    return np.zeros(0, dtype=np.int64)


def _grow(visits, rights, touched, istate):
    S = len(visits)
    shift = S // 2
    nv = np.zeros(2 * S, dtype=np.int64)
    nr = np.zeros(2 * S, dtype=np.int64)
    nt = np.zeros(2 * S, dtype=np.int64)
    nv[shift: shift + S] = visits
    nr[shift: shift + S] = rights
    tc = int(istate[K.I_TOUCHED])
    nt[:tc] = touched[:tc] + shift
    return nv, nr, nt


@dataclass(frozen=True)
class _SiteSeries:
    alpha: np.ndarray  # site proportion used at each departure
    l: np.ndarray      # site mass at each departure


def _site_states_along_path(path, env):
    """Per-step (alpha, l) of the departing site, replayed vectorised."""
    X = np.asarray(path, dtype=np.int64)
    steps = np.diff(X)
    site = X[:-1]
    n = len(steps)
    if n == 0:
        return _SiteSeries(alpha=np.empty(0), l=np.empty(0))
    order = np.argsort(site, kind="stable")
    s_sorted = site[order]
    r_sorted = (steps[order] == 1).astype(np.int64)
    new_group = np.empty(n, dtype=bool)
    new_group[0] = True
    new_group[1:] = s_sorted[1:] != s_sorted[:-1]
    group_start = np.maximum.accumulate(np.where(new_group, np.arange(n), 0))
    visit_idx = np.arange(n) - group_start
    cum_before = np.cumsum(r_sorted) - r_sorted
    rights_before = cum_before - cum_before[group_start]

    alpha0 = np.empty(n)
    l0 = np.empty(n)
    for cls, st in (("zero", env.w0), ("pos", env.w_plus), ("neg", env.w_minus_effective)):
        mask = s_sorted == 0 if cls == "zero" else (s_sorted > 0 if cls == "pos" else s_sorted < 0)
        alpha0[mask] = st.alpha
        l0[mask] = st.l

    l_here = l0 + visit_idx
    a_here = (alpha0 * l0 + rights_before) / l_here
    alpha = np.empty(n)
    lmass = np.empty(n)
    alpha[order] = a_here
    lmass[order] = l_here
    return _SiteSeries(alpha=alpha, l=lmass)


@dataclass(frozen=True)
class FunctionalSeries:
    """Per-step functional series of a recorded walk.

    x_plus[n] = sum of steps departing from nonnegative sites, d_plus[n] the
    matching drift compensator, m_plus = x_plus - d_plus (a martingale), and
    U[n] the count of 0 -> -1 transitions.  The identity
    x_plus[n] = max(X_n, 0) - U[n] holds at every step.
    """

    X: np.ndarray
    x_plus: np.ndarray
    U: np.ndarray
    d_plus: np.ndarray
    m_plus: np.ndarray
    hits: dict

    def identity_violations(self):
        lhs = self.x_plus
        rhs = np.maximum(self.X, 0) - self.U
        return int(np.count_nonzero(lhs != rhs))

    def to_json_dict(self):
        out = {"hits": {str(a): {"T": h.T, "U": h.U, "Dplus": h.d_plus}
                        for a, h in self.hits.items()}}
        out["m_plus_final"] = float(self.m_plus[-1])
        return out


def walk_functionals(record, f):
    """Replay a recorded path into per-step functional series."""
    if record.path is None:
        raise InvalidParameter("walk_functionals needs a record with a stored path")
    X = record.path
    steps = np.diff(X)
    site = X[:-1]
    series = _site_states_along_path(X, record.env)
    fv = np.clip(np.asarray(f(series.alpha), dtype=float), 0.0, 1.0)
    nonneg = site >= 0
    inc_x = np.where(nonneg, steps, 0)
    inc_d = np.where(nonneg, 2.0 * fv - 1.0, 0.0)
    inc_u = (site == 0) & (steps == -1)
    x_plus = np.concatenate([[0], np.cumsum(inc_x)])
    d_plus = np.concatenate([[0.0], np.cumsum(inc_d)])
    U = np.concatenate([[0], np.cumsum(inc_u)])
    return FunctionalSeries(X=X, x_plus=x_plus, U=U, d_plus=d_plus,
                            m_plus=x_plus - d_plus, hits=record.hits)


@dataclass(frozen=True)
class OracleResult:
    horizon: int
    e_m_plus: np.ndarray        # E[M+_m], m = 0..h
    e_x_plus: np.ndarray
    e_u: np.ndarray
    final_dist: dict            # position -> probability at the horizon
    hit_prob: dict              # level -> P(T_a <= h)
    total_prob: float
    functional_means: dict

    def dist_at(self, j):
        return self.final_dist.get(j, 0.0)


def exact_walk_oracle(f, env, horizon, levels=(), path_functional=None):
    """Brute-force enumeration of all 2^h paths with exact probabilities.

    Evolves every site urn along each path; returns exact expectations of
    M+_m for m <= h, the law of X_h, hitting probabilities for the given
    levels, and optionally the expectation of a caller-supplied functional
    of the complete path (a callable on the int8 step array).
    """
    if horizon > _ORACLE_MAX_HORIZON:
        raise HorizonTooLarge(f"horizon {horizon} > {_ORACLE_MAX_HORIZON}")
    h = int(horizon)
    e_m = np.zeros(h + 1)
    e_x = np.zeros(h + 1)
    e_u = np.zeros(h + 1)
    final_dist = {}
    hit_prob = {int(a): 0.0 for a in levels}
    visits = {}
    rights = {}
    steps = np.zeros(h, dtype=np.int8)
    total = 0.0
    func_mean = 0.0

    def site_alpha(x):
        st = env.site(x)
        v = visits.get(x, 0)
        r = rights.get(x, 0)
        return (st.alpha * st.l + r) / (st.l + v)

    def rec(depth, pos, prob, x_plus, d_plus, u, hit_set):
        nonlocal total, func_mean
        e_m[depth] += prob * (x_plus - d_plus)
        e_x[depth] += prob * x_plus
        e_u[depth] += prob * u
        if depth == h:
            total += prob
            final_dist[pos] = final_dist.get(pos, 0.0) + prob
            if path_functional is not None:
                func_mean += prob * path_functional(steps.copy())
            return
        a = site_alpha(pos)
        fv = min(max(float(f(a)), 0.0), 1.0)
        for right, p_move in ((True, fv), (False, 1.0 - fv)):
            if p_move == 0.0:
                continue
            visits[pos] = visits.get(pos, 0) + 1
            if right:
                rights[pos] = rights.get(pos, 0) + 1
            npos = pos + (1 if right else -1)
            steps[depth] = 1 if right else -1
            nx = x_plus + ((1 if right else -1) if pos >= 0 else 0)
            nd = d_plus + ((2.0 * fv - 1.0) if pos >= 0 else 0.0)
            nu = u + (1 if (pos == 0 and not right) else 0)
            new_hits = hit_set
            if npos in hit_prob and npos not in hit_set:
                hit_prob[npos] += prob * p_move
                new_hits = hit_set | {npos}
            rec(depth + 1, npos, prob * p_move, nx, nd, nu, new_hits)
            visits[pos] -= 1
            if visits[pos] == 0:
                del visits[pos]
            if right:
                rights[pos] -= 1
                if rights[pos] == 0:
                    del rights[pos]

    rec(0, 0, 1.0, 0, 0.0, 0, frozenset())
    return OracleResult(horizon=h, e_m_plus=e_m, e_x_plus=e_x, e_u=e_u,
                        final_dist=final_dist, hit_prob=hit_prob, total_prob=total,
                        functional_means={"path": func_mean} if path_functional else {})


def hit_functionals_batch(f, env, a, replicas, stream, cap=10 ** 6):
    """First-hit functionals (T, U, D+) at levels 1..a over many replicas.

    Replica r consumes stream.child(r).  Buffers are reused across replicas
    with targeted resets, so this is the cheap way to estimate E[U_{T_k}]
    and E[D+_{T_k}].  Returns arrays of shape (a, replicas) plus a per-level
    hit mask; rows stay at the capped values when the cap fired first.
    """
    stream = as_stream(stream)
    codes, args = f.program()
    w0, wp, wm = env.w0, env.w_plus, env.w_minus_effective
    levels = np.arange(1, a + 1, dtype=np.int64)
    span = _INITIAL_SPAN
    visits = np.zeros(span, dtype=np.int64)
    rights = np.zeros(span, dtype=np.int64)
    touched = np.zeros(span, dtype=np.int64)
    path = np.zeros(1, dtype=np.int64)
    out_T = np.full((a, replicas), -1, dtype=np.int64)
    out_U = np.zeros((a, replicas), dtype=np.int64)
    out_D = np.zeros((a, replicas))
    capped = np.zeros(replicas, dtype=bool)
    cap_U = np.zeros(replicas, dtype=np.int64)
    cap_D = np.zeros(replicas)
    cap_X = np.zeros(replicas, dtype=np.int64)
    level_T = np.empty(a, dtype=np.int64)
    level_U = np.empty(a, dtype=np.int64)
    level_D = np.empty(a)

    for r in range(replicas):
        istate = np.zeros(K.ISTATE_LEN, dtype=np.int64)
        fstate = np.zeros(K.FSTATE_LEN)
        level_T.fill(-1)
        level_U.fill(-1)
        level_D.fill(np.nan)
        gen = stream.child(r).generator()
        chunk = _CHUNK0
        leftover = np.empty(0)
        while True:
            uniforms = leftover if len(leftover) else gen.random(chunk)
            status = K.walk_kernel(
                codes, args,
                w0.red_mass, w0.l, wp.red_mass, wp.l, wm.red_mass, wm.l,
                visits, rights, touched, istate, fstate, uniforms,
                K.MODE_HIT_LEVEL, a, cap,
                levels, level_T, level_U, level_D,
                path, False,
            )
            leftover = uniforms[istate[K.I_CONSUMED]:]
            if status == 0:
                chunk = min(chunk * 8, _CHUNK_MAX)
                continue
            if status == 3:
                visits, rights, touched = _grow(visits, rights, touched, istate)
                continue
            break
        hit_mask = level_T >= 0
        out_T[:, r] = level_T
        out_U[hit_mask, r] = level_U[hit_mask]
        out_D[hit_mask, r] = level_D[hit_mask]
        if status == 2:
            capped[r] = True
            cap_U[r] = istate[K.I_U]
            cap_D[r] = fstate[K.F_DPLUS]
            cap_X[r] = istate[K.I_POS]
        # unhit levels report the capped values (monotone truncation of T_a)
        out_U[~hit_mask, r] = istate[K.I_U]
        out_D[~hit_mask, r] = fstate[K.F_DPLUS]
        tc = int(istate[K.I_TOUCHED])
        idxs = touched[:tc]
        visits[idxs] = 0
        rights[idxs] = 0

    return {
        "levels": levels, "T": out_T, "U": out_U, "D": out_D,
        "hit": out_T >= 0, "capped": capped,
        "cap_U": cap_U, "cap_D": cap_D, "cap_X": cap_X,
    }


@dataclass(frozen=True)
class RegimeConfig:
    horizon: int = 100_000
    replicas: int = 1_000
    burn_in: int = 1_000
    seed: int = 0


@dataclass(frozen=True)
class RegimeReport:
    """Heuristic recurrence evidence; summary statistics only, not a proof."""

    returned_fraction: float   # replicas visiting 0 after the burn-in
    escape_fraction: float
    right_fraction: float      # escaped replicas that ended on the right
    mean_max_level: float
    max_level: int
    horizon: int
    replicas: int
    burn_in: int

    def to_json_dict(self):
        return {
            "heuristic": True,
            "returned_fraction": self.returned_fraction,
            "escape_fraction": self.escape_fraction,
            "right_fraction": self.right_fraction,
            "mean_max_level": self.mean_max_level,
            "max_level": self.max_level,
            "horizon": self.horizon,
            "replicas": self.replicas,
            "burn_in": self.burn_in,
        }


def empirical_regime(f, env, config=None):
    """Monte Carlo cross-check of recurrence vs transience (heuristic)."""
    config = config or RegimeConfig()
    base = as_stream(config.seed)
    stop = WalkStop("horizon", n=config.horizon, cap=max(DEFAULT_CAP, config.horizon))
    returned = 0
    escaped_right = 0
    max_levels = np.empty(config.replicas)
    for r in range(config.replicas):
        rec = simulate_walk(f, env, stop, base.child(r), record_path=False)
        came_back = rec.last_zero_step > config.burn_in
        returned += came_back
        if not came_back:
            escaped_right += rec.final_pos > 0
        max_levels[r] = max(rec.max_pos, -rec.min_pos)
    n_escaped = config.replicas - returned
    return RegimeReport(
        returned_fraction=returned / config.replicas,
        escape_fraction=n_escaped / config.replicas,
        right_fraction=(escaped_right / n_escaped) if n_escaped else float("nan"),
        mean_max_level=float(max_levels.mean()),
        max_level=int(max_levels.max()),
        horizon=config.horizon,
        replicas=config.replicas,
        burn_in=config.burn_in,
    )
