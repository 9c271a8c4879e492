"""Two-color urn processes and their exact finite-horizon law.

State (alpha, l): alpha is the red proportion, l the total mass.  One step
adds one ball: red with probability f(alpha) (drawn as ``uniform < f(alpha)``
with uniform in [0,1)), blue otherwise.

``exact_urn_dp`` computes the exact law by dynamic programming over the
number k of red draws: after n steps the state is determined by k since
alpha = (l0*alpha0 + k) / (l0 + n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HorizonTooLarge, InvalidParameter
from .utils import ff
from .streams import Stream, as_stream

__all__ = [
    "UrnState", "UrnTrajectory", "ExactUrnLaw",
    "urn_step", "simulate_urn", "simulate_urn_batch", "exact_urn_dp",
    "DP_HORIZON_GUARD",
]

DP_HORIZON_GUARD = 20_000
_TABLE_KEEP_DEFAULT = 2_048
_ROW_RENORM_TOL = 1e-12


@dataclass(frozen=True)
class UrnState:
    alpha: float
    l: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidParameter(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.l > 0.0:
            raise InvalidParameter(f"mass must be positive, got {self.l}")

    @property
    def red_mass(self):
        return self.alpha * self.l


def urn_step(state, f, uniform):
    """One transition; red iff uniform < f(alpha)."""
    red = uniform < f(state.alpha)
    l1 = state.l + 1.0
    if red:
        return UrnState((state.l * state.alpha + 1.0) / l1, l1)
    return UrnState(state.l * state.alpha / l1, l1)


@dataclass(frozen=True)
class UrnTrajectory:
    initial: UrnState
    alphas: np.ndarray  # length n+1
    ls: np.ndarray      # length n+1
    draws: np.ndarray   # int8, length n; 1 = red
    stream: Stream

    @property
    def n(self):
        return len(self.draws)

    @property
    def states(self):
        return [UrnState(float(a), float(l)) for a, l in zip(self.alphas, self.ls)]

    @property
    def final(self):
        return UrnState(float(self.alphas[-1]), float(self.ls[-1]))

    def to_csv(self, out):
        out.write("n,alpha,l,draw\n")
        out.write(f"0,{ff(self.alphas[0])},{ff(self.ls[0])},\n")
        for i in range(self.n):
            d = "R" if self.draws[i] else "B"
            out.write(f"{i + 1},{ff(self.alphas[i + 1])},{ff(self.ls[i + 1])},{d}\n")


def simulate_urn(f, init, n, stream):
    """One trajectory of n steps; deterministic in (f, init, n, stream)."""
    if n < 0:
        raise InvalidParameter("n must be >= 0")
    stream = as_stream(stream)
    rng = stream.generator()
    uniforms = rng.random(n)
    alphas = np.empty(n + 1)
    ls = np.empty(n + 1)
    draws = np.zeros(n, dtype=np.int8)
    # exact bookkeeping: track red mass, derive alpha
    red = init.red_mass
    l = init.l
    alphas[0], ls[0] = init.alpha, l
    alpha = init.alpha
    for i in range(n):
        if uniforms[i] < f(alpha):
            red += 1.0
            draws[i] = 1
        l += 1.0
        alpha = red / l
        alphas[i + 1] = alpha
        ls[i + 1] = l
    return UrnTrajectory(init, alphas, ls, draws, stream)


def simulate_urn_batch(f, init, n, replicas, stream, block=8192,
                       checkpoints=(), collect=("alpha",)):
    """Vectorised independent replicas; replica r draws from stream.child(r).

    Returns a dict with, per ``collect`` entry, the per-replica value at the
    final step, plus ``{name}_checkpoints`` arrays of shape
    (len(checkpoints), replicas) when checkpoints are requested.
    Supported names: alpha, delta, delta_pos, delta_neg.
    """
    stream = as_stream(stream)
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if checkpoints and checkpoints[-1] > n:
        raise InvalidParameter(f"checkpoint {checkpoints[-1]} beyond horizon {n}")
    want_delta = any(c.startswith("delta") for c in collect)
    out = {name: np.empty(replicas) for name in collect}
    cp_out = {name: np.empty((len(checkpoints), replicas)) for name in collect}
    step_chunk = max(256, (1 << 24) // max(block, 1))  # cap the uniform buffer at ~128 MB

    for start in range(0, replicas, block):
        stop = min(start + block, replicas)
        m = stop - start
        gens = [stream.child(start + r).generator() for r in range(m)]
        red = np.full(m, init.red_mass)
        alpha = np.full(m, init.alpha)
        delta = np.zeros(m)
        dpos = np.zeros(m)
        dneg = np.zeros(m)
        l = init.l
        ci = 0

        def _capture(idx):
            local = {"alpha": alpha, "delta": delta, "delta_pos": dpos, "delta_neg": dneg}
            for name in collect:
                cp_out[name][idx, start:stop] = local[name]

        for chunk_start in range(0, n, step_chunk):
            width = min(step_chunk, n - chunk_start)
            uniforms = np.empty((m, width))
            for r in range(m):
                uniforms[r] = gens[r].random(width)
            for j in range(width):
                k = chunk_start + j
                fa = f(alpha)
                if want_delta:
                    inc = 2.0 * fa - 1.0
                    delta += inc
                    dpos += np.maximum(inc, 0.0)
                    dneg += np.maximum(-inc, 0.0)
                while ci < len(checkpoints) and checkpoints[ci] == k:
                    _capture(ci)
                    ci += 1
                red += uniforms[:, j] < fa
                l += 1.0
                alpha = red / l
        if want_delta:
            fa = f(alpha)
            inc = 2.0 * fa - 1.0
            delta += inc
            dpos += np.maximum(inc, 0.0)
            dneg += np.maximum(-inc, 0.0)
        while ci < len(checkpoints):
            _capture(ci)
            ci += 1
        local = {"alpha": alpha, "delta": delta, "delta_pos": dpos, "delta_neg": dneg}
        for name in collect:
            out[name][start:stop] = local[name]

    for name in collect:
        if checkpoints:
            out[name + "_checkpoints"] = cp_out[name]
    out["checkpoints"] = np.asarray(checkpoints, dtype=np.int64)
    return out


@dataclass
class ExactUrnLaw:
    """Exact law of the urn up to horizon N.

    Per-row curves are always kept; the full triangular table P(n, k) only
    when N <= table_limit (it is O(N^2) doubles).
    """

    horizon: int
    init: UrnState
    f_source: str
    alpha_mean: np.ndarray   # E[alpha_n], n = 0..N
    delta_mean: np.ndarray   # E[delta_n]
    delta_pos: np.ndarray    # E[delta_n^+]
    delta_neg: np.ndarray    # E[delta_n^-]
    final_row: np.ndarray    # P(N, k), k = 0..N
    g_means: dict = field(default_factory=dict)
    table: list = None       # list of rows when kept
    renormalizations: int = 0
    max_row_error: float = 0.0

    def row(self, n):
        if n == self.horizon:
            return self.final_row
        if self.table is None:
            raise InvalidParameter(
                f"row {n} not kept (horizon {self.horizon} exceeds the table limit)")
        return self.table[n]

    def alphas_at(self, n):
        k = np.arange(n + 1)
        return (self.init.l * self.init.alpha + k) / (self.init.l + n)

    def expect(self, g, n=None):
        n = self.horizon if n is None else n
        return float(self.row(n) @ g(self.alphas_at(n)))

    def to_csv(self, out):
        out.write("n,k,prob\n")
        rows = range(self.horizon + 1) if self.table is not None else [self.horizon]
        for n in rows:
            row = self.row(n)
            for k in range(n + 1):
                out.write(f"{n},{k},{ff(row[k])}\n")


def exact_urn_dp(f, init, N, gs=None, keep_table=None, horizon_guard=DP_HORIZON_GUARD):
    """Exact DP law; O(N^2) time. Optionally tracks E[g(alpha_n)] for each g in gs."""
    if N < 0:
        raise InvalidParameter("N must be >= 0")
    if N > horizon_guard:
        raise HorizonTooLarge(f"N = {N} exceeds the DP guard {horizon_guard}")
    gs = dict(gs) if gs else {}
    if keep_table is None:
        keep_table = N <= _TABLE_KEEP_DEFAULT

    a0l0 = init.alpha * init.l
    l0 = init.l
    P = np.array([1.0])
    alpha_mean = np.empty(N + 1)
    delta_mean = np.empty(N + 1)
    delta_pos = np.empty(N + 1)
    delta_neg = np.empty(N + 1)
    g_curves = {name: np.empty(N + 1) for name in gs}
    table = [] if keep_table else None
    acc = accp = accn = 0.0
    renorms = 0
    max_err = 0.0

    for n in range(N + 1):
        k = np.arange(n + 1)
        alpha = (a0l0 + k) / (l0 + n)
        fa = np.clip(np.asarray(f(alpha), dtype=float), 0.0, 1.0)
        inc = 2.0 * fa - 1.0
        alpha_mean[n] = P @ alpha
        acc += P @ inc
        accp += P @ np.maximum(inc, 0.0)
        accn += P @ np.maximum(-inc, 0.0)
        delta_mean[n], delta_pos[n], delta_neg[n] = acc, accp, accn
        for name, g in gs.items():
            g_curves[name][n] = P @ np.asarray(g(alpha), dtype=float)
        if table is not None:
            table.append(P)
        if n < N:
            Pn = np.zeros(n + 2)
            Pn[: n + 1] += P * (1.0 - fa)
            Pn[1:] += P * fa
            s = Pn.sum()
            err = abs(s - 1.0)
            max_err = max(max_err, err)
            if err > _ROW_RENORM_TOL:
                Pn /= s
                renorms += 1
            P = Pn

    return ExactUrnLaw(
        horizon=N, init=init, f_source=f.source,
        alpha_mean=alpha_mean, delta_mean=delta_mean,
        delta_pos=delta_pos, delta_neg=delta_neg,
        final_row=P, g_means=g_curves, table=table,
        renormalizations=renorms, max_row_error=max_err,
    )
