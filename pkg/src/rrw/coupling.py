"""Pathwise couplings of urn pairs on a shared uniform stream.

Three constructions, each verified sample path by sample path:

  FunctionOrder  f <= g pointwise; both urns add red iff the shared uniform
                 is below their own value; then alpha_n <= beta_n surely.
  OffCenter      mirror rule around 1/2; an urn at (alpha, 2l) with
                 2*alpha*l - l integer dominates the centered urn (1/2, 2l)
                 in distance to 1/2.
  MassOrder      same mirror rule; the urn with larger initial mass stays
                 closer to 1/2.

Mirror rule (tie at exactly 1/2 takes the '>= 1/2' branch): when the
proportion x >= 1/2 the urn adds red iff u <= f(x); when x < 1/2 it adds
red iff u >= 1 - f(x).

Dominance is checked on integer ball-count excesses, so the comparisons
are exact, not floating-point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (IntegralityViolation, InvalidParameter,
                     PreconditionOrder, SymmetryViolation)
from .streams import as_stream
from .utils import ff
from .urn import UrnState

__all__ = [
    "CoupledRun", "couple_function_order", "couple_off_center",
    "couple_mass_order", "run_coupling_batch",
]

_ORDER_GRID = 10001
_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class CoupledRun:
    kind: str
    alpha: np.ndarray
    beta: np.ndarray
    alpha_init: UrnState
    beta_init: UrnState
    violations: int
    violation_steps: np.ndarray  # int8 flags, length n+1
    stream: object

    @property
    def n(self):
        return len(self.alpha) - 1

    def to_csv(self, out):
        out.write("n,alpha,beta,violation\n")
        for i in range(len(self.alpha)):
            out.write(f"{i},{ff(self.alpha[i])},{ff(self.beta[i])},{int(self.violation_steps[i])}\n")


def _check_order(f, g):
    grid = np.linspace(0.0, 1.0, _ORDER_GRID)
    fv = np.asarray(f(grid), dtype=float)
    gv = np.asarray(g(grid), dtype=float)
    bad = fv > gv + 1e-12
    if np.any(bad):
        i = int(np.argmax(fv - gv))
        raise PreconditionOrder(
            f"{f.source} > {g.source} at x = {grid[i]:.6g} "
            f"({fv[i]:.6g} > {gv[i]:.6g})")


def _check_symmetry(f):
    t = np.linspace(0.0, 0.5, (_ORDER_GRID + 1) // 2)
    left = np.asarray(f(0.5 - t), dtype=float)
    right = np.asarray(f(0.5 + t), dtype=float)
    if np.max(np.abs(left - right)) > _SYMMETRY_TOL:
        i = int(np.argmax(np.abs(left - right)))
        raise SymmetryViolation(
            f"{f.source} is not symmetric about 1/2: "
            f"f(1/2-{t[i]:.4g}) = {left[i]:.10g} != f(1/2+{t[i]:.4g}) = {right[i]:.10g}")


def couple_function_order(f, g, init, n, stream):
    """Shared-uniform coupling of urns driven by f <= g from the same start."""
    _check_order(f, g)
    stream = as_stream(stream)
    uniforms = stream.generator().random(n)
    l0 = init.l
    red_a = red_b = init.red_mass
    alpha = np.empty(n + 1)
    beta = np.empty(n + 1)
    flags = np.zeros(n + 1, dtype=np.int8)
    alpha[0] = beta[0] = init.alpha
    violations = 0
    for i in range(n):
        l = l0 + i
        a, b = red_a / l, red_b / l
        if uniforms[i] < f(a):
            red_a += 1.0
        if uniforms[i] < g(b):
            red_b += 1.0
        alpha[i + 1] = red_a / (l + 1.0)
        beta[i + 1] = red_b / (l + 1.0)
        # red masses differ by an integer; compare counts exactly
        if red_a - red_b > 0.5:
            violations += 1
            flags[i + 1] = 1
    return CoupledRun("FunctionOrder", alpha, beta, init, init, violations, flags, stream)


def _mirror_red(x, fx, u):
    """The mirror rule; x is the proportion, u the shared uniform."""
    if x >= 0.5:
        return u <= fx
    return u >= 1.0 - fx


def _mirror_pair_run(kind, f, init_a, init_b, n, stream):
    """Run two urns under the mirror rule on one uniform stream.

    Returns trajectories plus the signed excess-red values 2*red - mass,
    which are exact integers whenever the initial excesses are.
    """
    stream = as_stream(stream)
    uniforms = stream.generator().random(n)
    red_a, l_a = init_a.red_mass, init_a.l
    red_b, l_b = init_b.red_mass, init_b.l
    alpha = np.empty(n + 1)
    beta = np.empty(n + 1)
    s_a = np.empty(n + 1)  # 2*red - mass
    s_b = np.empty(n + 1)
    alpha[0], beta[0] = init_a.alpha, init_b.alpha
    s_a[0], s_b[0] = 2.0 * red_a - l_a, 2.0 * red_b - l_b
    for i in range(n):
        u = uniforms[i]
        a, b = red_a / l_a, red_b / l_b
        if _mirror_red(a, f(a), u):
            red_a += 1.0
        if _mirror_red(b, f(b), u):
            red_b += 1.0
        l_a += 1.0
        l_b += 1.0
        alpha[i + 1] = red_a / l_a
        beta[i + 1] = red_b / l_b
        s_a[i + 1] = 2.0 * red_a - l_a
        s_b[i + 1] = 2.0 * red_b - l_b
    return stream, alpha, beta, s_a, s_b


def couple_off_center(f, alpha, l, n, stream):
    """Mirror coupling of (alpha, 2l) against the centered urn (1/2, 2l).

    Requires 2*alpha*l - l integer and f symmetric about 1/2; then the
    centered urn is closer to 1/2 at every step: |beta_n - 1/2| <= |alpha_n - 1/2|.
    """
    excess = 2.0 * alpha * l - l
    if abs(excess - round(excess)) > 1e-9:
        raise IntegralityViolation(f"2*alpha*l - l = {excess:.6g} is not an integer")
    _check_symmetry(f)
    init_a = UrnState(alpha, 2.0 * l)
    init_b = UrnState(0.5, 2.0 * l)
    stream, al, be, s_a, s_b = _mirror_pair_run("OffCenter", f, init_a, init_b, n, stream)
    # |s_b| <= |s_a| is an exact integer comparison (up to fp representation)
    bad = np.abs(s_b) > np.abs(s_a) + 1e-9
    return CoupledRun("OffCenter", al, be, init_a, init_b,
                      int(bad.sum()), bad.astype(np.int8), stream)


def couple_mass_order(f, l0, l1, n, stream):
    """Mirror coupling of (1/2, 2*l1) [alpha] against (1/2, 2*l0) [beta], l0 < l1.

    The heavier urn stays closer to 1/2: |beta_n - 1/2| >= |alpha_n - 1/2|.
    """
    if not 0.0 < l0 < l1:
        raise PreconditionOrder(f"need 0 < l0 < l1, got l0 = {l0}, l1 = {l1}")
    _check_symmetry(f)
    init_a = UrnState(0.5, 2.0 * l1)
    init_b = UrnState(0.5, 2.0 * l0)
    stream, al, be, s_a, s_b = _mirror_pair_run("MassOrder", f, init_a, init_b, n, stream)
    # compare |s_b|/L_b >= |s_a|/L_a by cross-multiplication
    steps = np.arange(n + 1, dtype=float)
    L_a = 2.0 * l1 + steps
    L_b = 2.0 * l0 + steps
    bad = np.abs(s_a) * L_b - np.abs(s_b) * L_a > 1e-9 * L_a
    return CoupledRun("MassOrder", al, be, init_a, init_b,
                      int(bad.sum()), bad.astype(np.int8), stream)


def run_coupling_batch(kind, n, streams, stream_base, **kwargs):
    """Run a coupling over many derived streams, vectorised across streams.

    ``stream_base.child(s)`` seeds run s (so run s is bit-identical to the
    corresponding single run).  Returns the total violation count.
    """
    base = as_stream(stream_base)
    if kind == "order":
        f, g, init = kwargs["f"], kwargs["g"], kwargs["init"]
        _check_order(f, g)
        return _batch_order(f, g, init, n, streams, base)
    if kind == "offcenter":
        f, alpha, l = kwargs["f"], kwargs["alpha"], kwargs["l"]
        excess = 2.0 * alpha * l - l
        if abs(excess - round(excess)) > 1e-9:
            raise IntegralityViolation(f"2*alpha*l - l = {excess:.6g} is not an integer")
        _check_symmetry(f)
        return _batch_mirror(f, UrnState(alpha, 2.0 * l), UrnState(0.5, 2.0 * l),
                             n, streams, base, mode="offcenter")
    if kind == "massorder":
        f, l0, l1 = kwargs["f"], kwargs["l0"], kwargs["l1"]
        if not 0.0 < l0 < l1:
            raise PreconditionOrder(f"need 0 < l0 < l1, got l0 = {l0}, l1 = {l1}")
        _check_symmetry(f)
        return _batch_mirror(f, UrnState(0.5, 2.0 * l1), UrnState(0.5, 2.0 * l0),
                             n, streams, base, mode="massorder")
    raise InvalidParameter(f"unknown coupling kind {kind!r}")


def _stream_uniform_chunks(base, streams, n, step_chunk=4096):
    """Yield (width, uniforms[streams, width]) chunks, row s from base.child(s)."""
    gens = [base.child(s).generator() for s in range(streams)]
    done = 0
    while done < n:
        width = min(step_chunk, n - done)
        u = np.empty((streams, width))
        for s in range(streams):
            u[s] = gens[s].random(width)
        yield u
        done += width


def _batch_order(f, g, init, n, streams, base):
    red_a = np.full(streams, init.red_mass)
    red_b = red_a.copy()
    l = init.l
    violations = 0
    for u in _stream_uniform_chunks(base, streams, n):
        for j in range(u.shape[1]):
            a = red_a / l
            b = red_b / l
            red_a += u[:, j] < f(a)
            red_b += u[:, j] < g(b)
            l += 1.0
            violations += int(np.count_nonzero(red_a - red_b > 0.5))
    return violations


def _batch_mirror(f, init_a, init_b, n, streams, base, mode):
    red_a = np.full(streams, init_a.red_mass)
    red_b = np.full(streams, init_b.red_mass)
    l_a, l_b = init_a.l, init_b.l
    violations = 0
    for u in _stream_uniform_chunks(base, streams, n):
        for j in range(u.shape[1]):
            a = red_a / l_a
            b = red_b / l_b
            fa, fb = f(a), f(b)
            uj = u[:, j]
            red_a += np.where(a >= 0.5, uj <= fa, uj >= 1.0 - fa)
            red_b += np.where(b >= 0.5, uj <= fb, uj >= 1.0 - fb)
            l_a += 1.0
            l_b += 1.0
            s_a = np.abs(2.0 * red_a - l_a)
            s_b = np.abs(2.0 * red_b - l_b)
            if mode == "offcenter":
                violations += int(np.count_nonzero(s_b > s_a + 1e-9))
            else:
                violations += int(np.count_nonzero(s_a * l_b - s_b * l_a > 1e-9 * l_a))
    return violations
