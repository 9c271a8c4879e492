"""Reinforcement functions f: [0,1] -> (0,1] and their analysis.

A function is given either as an arithmetic expression in x or as a
builtin catalog name:

    const(c)      constant c, 0 < c <= 1
    linear(a)     1/2 + a*(x - 1/2), |a| < 1
    polya         x
    quartic(c)    1/2 + c*(x - 1/2)^4, 0 < c <= 8
    mix           1/2 + 1.5*(x - 1/2)^2 - 8*(x - 1/2)^4
    family(f, u)  the rescaled family 2*f_u - 1 = min(u*(2*f - 1), 1)

Values are clamped to [1e-12, 1] at evaluation time (with a counted
warning); systematic range violations make ``analyze`` fail hard.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import (ExpressionSyntaxError, InvalidParameter,
                     NonIsolatedFixedPoints, RangeViolation)

__all__ = [
    "ReinforcementFunction", "FixedPoint", "FixedPointReport",
    "parse_function", "analyze", "make_family", "builtin",
    "CLAMP_LO", "FIXED_POINT_TOL", "DERIV_STEP", "STABILITY_TOL",
]

CLAMP_LO = 1e-12
FIXED_POINT_TOL = 1e-12
DERIV_STEP = 1e-5
STABILITY_TOL = 1e-9
_GRID_POINTS = 10001
_NONISOLATED_FRACTION = 0.01


class ReinforcementFunction:
    """Immutable evaluable map from the red proportion to a probability.

    Callable on scalars and numpy arrays.  ``clamp_count`` tallies how many
    evaluations fell outside [1e-12, 1] and were clamped (a diagnostic
    side-channel; it does not affect semantics or thread-safety).
    """

    def __init__(self, source, tree):
        self.source = source
        self.tree = tree
        self._program = None
        self._analysis = None
        self._clamps = 0
        self._lock = threading.Lock()

    def __repr__(self):
        return f"ReinforcementFunction({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, ReinforcementFunction) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)

    @property
    def clamp_count(self):
        return self._clamps

    def _count_clamps(self, n):
        if n:
            with self._lock:
                self._clamps += int(n)

    def raw(self, x):
        """Unclamped evaluation (used by range scans)."""
        return ex.evaluate(self.tree, x)

    def __call__(self, x):
        v = ex.evaluate(self.tree, x)
        if isinstance(v, np.ndarray):
            bad = np.count_nonzero((v < CLAMP_LO) | (v > 1.0) | ~np.isfinite(v))
            self._count_clamps(bad)
            return np.clip(np.nan_to_num(v, nan=CLAMP_LO), CLAMP_LO, 1.0)
        if not math.isfinite(v):
            self._count_clamps(1)
            return CLAMP_LO
        if v < CLAMP_LO or v > 1.0:
            self._count_clamps(1)
            return min(max(v, CLAMP_LO), 1.0)
        return v

    def program(self):
        """Opcode form (codes, args) for the jit kernels; cached."""
        if self._program is None:
            self._program = ex.compile_program(self.tree)
        return self._program

    def fprime(self, x):
        """Derivative at x via the symbolic tree, finite differences as fallback."""
        d = ex.evaluate(ex.derivative(self.tree), x)
        if np.all(np.isfinite(d)):
            return d
        h = DERIV_STEP
        return (self.raw(x + h) - self.raw(x - h)) / (2 * h)

    def fsecond(self, x):
        d2 = ex.evaluate(ex.derivative(ex.derivative(self.tree)), x)
        if np.all(np.isfinite(d2)):
            return d2
        h = DERIV_STEP
        return (self.raw(x + h) - 2 * self.raw(x) + self.raw(x - h)) / (h * h)

    def is_identity(self, grid=None):
        if self.tree == ex.Var():
            return True
        g = np.linspace(0.0, 1.0, 101) if grid is None else grid
        return bool(np.max(np.abs(self.raw(g) - g)) <= 1e-12)

    def analysis(self):
        """Cached ``analyze(self)``."""
        if self._analysis is None:
            self._analysis = analyze(self)
        return self._analysis


@dataclass(frozen=True)
class FixedPoint:
    p: float
    fprime: float
    stable: bool


@dataclass(frozen=True)
class FixedPointReport:
    points: tuple
    fprime_half: float
    fsecond_half: float
    ge_half: bool
    ge_half_right: bool
    unique: bool
    derivative_method: str = "tree"

    @property
    def unique_fixed_point(self):
        return self.points[0] if self.unique else None

    def to_json_dict(self):
        return {
            "fixed_points": [
                {"p": fp.p, "fprime": fp.fprime, "stable": fp.stable} for fp in self.points
            ],
            "fprime_half": self.fprime_half,
            "fsecond_half": self.fsecond_half,
            "ge_half": self.ge_half,
            "ge_half_right": self.ge_half_right,
            "unique": self.unique,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _number(tok):
    try:
        return float(tok)
    except ValueError:
        raise ExpressionSyntaxError(f"expected a numeric argument, got {tok!r}")


def _split_args(text):
    """Split a builtin argument list on top-level commas."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p.strip() for p in parts]


def builtin(name, *params):
    """Instantiate a catalog function by name and numeric parameters."""
    if name == "polya":
        if params:
            raise InvalidParameter("polya takes no parameters")
        return ReinforcementFunction("polya", ex.Var())
    if name == "mix":
        if params:
            raise InvalidParameter("mix takes no parameters")
        tree = ex.parse_expression("0.5 + 1.5*(x - 0.5)^2 - 8*(x - 0.5)^4")
        return ReinforcementFunction("mix", tree)
    if name == "const":
        (c,) = params
        if not 0.0 < c <= 1.0:
            raise InvalidParameter(f"const(c) needs 0 < c <= 1, got {c}")
        return ReinforcementFunction(f"const({c!r})", ex.Num(float(c)))
    if name == "linear":
        (a,) = params
        if not abs(a) < 1.0:
            raise InvalidParameter(f"linear(a) needs |a| < 1, got {a}")
        tree = ex.parse_expression(f"0.5 + {a!r}*(x - 0.5)")
        return ReinforcementFunction(f"linear({a!r})", tree)
    if name == "quartic":
        (c,) = params
        if not 0.0 < c <= 8.0:
            raise InvalidParameter(f"quartic(c) needs 0 < c <= 8, got {c}")
        tree = ex.parse_expression(f"0.5 + {c!r}*(x - 0.5)^4")
        return ReinforcementFunction(f"quartic({c!r})", tree)
    raise InvalidParameter(f"unknown builtin {name!r}")


_BUILTIN_NAMES = ("const", "linear", "polya", "quartic", "mix", "family")


def parse_function(text):
    """Parse an expression or builtin catalog name into a ReinforcementFunction."""
    t = text.strip()
    head = t.split("(", 1)[0].strip()
    if head in _BUILTIN_NAMES:
        if "(" in t:
            if not t.endswith(")"):
                raise ExpressionSyntaxError(f"unbalanced parentheses in {t!r}")
            inner = t[t.index("(") + 1 : -1]
            args = _split_args(inner) if inner.strip() else []
        else:
            args = []
        if head == "family":
            if len(args) != 2:
                raise ExpressionSyntaxError("family takes (base, u)")
            base = parse_function(args[0])
            return make_family(base, _number(args[1]))
        return builtin(head, *[_number(a) for a in args])
    tree = ex.parse_expression(t)
    return ReinforcementFunction(t, tree)


def make_family(f, u):
    """The rescaled family f_u with 2*f_u - 1 = min(u*(2*f - 1), 1).

    Well defined for any f and u >= 0; whether the result satisfies the
    theorem hypotheses is checked separately by the classifier.
    """
    if isinstance(u, (int, float)) is False:
        raise InvalidParameter(f"u must be a number, got {u!r}")
    if u < 0:
        raise InvalidParameter(f"family parameter u must be >= 0, got {u}")
    u = float(u)
    two_f_minus_1 = ex.BinOp("-", ex.BinOp("*", ex.Num(2.0), f.tree), ex.Num(1.0))
    clipped = ex.Call("min", (ex.BinOp("*", ex.Num(u), two_f_minus_1), ex.Num(1.0)))
    tree = ex.BinOp("+", ex.Num(0.5), ex.BinOp("*", ex.Num(0.5), clipped))
    return ReinforcementFunction(f"family({f.source}, {u!r})", tree)


def _bisect_fixed_point(f, lo, hi, glo, ghi):
    """Bisection on g(x) = f(x) - x down to FIXED_POINT_TOL."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= FIXED_POINT_TOL:
            return mid
        gm = f.raw(mid) - mid
        if gm == 0.0:
            return mid
        if (glo < 0) == (gm < 0):
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
    return 0.5 * (lo + hi)


def analyze(f, grid_points=_GRID_POINTS):
    """Locate fixed points of f, their stability, and the shape at 1/2.

    Raises RangeViolation on systematic range violations and
    NonIsolatedFixedPoints when f(x) - x vanishes on a stretch of the grid.
    """
    grid = np.linspace(0.0, 1.0, grid_points)
    raw = np.asarray(f.raw(grid), dtype=float)
    if raw.shape != grid.shape:
        raw = np.full_like(grid, float(raw))
    if not np.all(np.isfinite(raw)):
        raise RangeViolation(f"{f.source}: non-finite values on [0, 1]")
    g = raw - grid
    near_zero = np.abs(g) <= 1e-9
    if np.count_nonzero(near_zero) > _NONISOLATED_FRACTION * grid_points:
        raise NonIsolatedFixedPoints(
            f"{f.source}: f(x) - x vanishes on {np.count_nonzero(near_zero)} grid points")
    if np.any(raw <= 0.0):
        i = int(np.argmin(raw))
        raise RangeViolation(f"{f.source}: f({grid[i]:.6g}) = {raw[i]:.6g} <= 0")
    if np.any(raw > 1.0 + 1e-9):
        i = int(np.argmax(raw))
        raise RangeViolation(f"{f.source}: f({grid[i]:.6g}) = {raw[i]:.6g} > 1")
    ge_half = bool(np.min(raw) >= 0.5 - 1e-10)
    if np.any(raw >= 1.0 - 1e-12) and not ge_half:
        raise RangeViolation(
            f"{f.source}: reaches 1 while dipping below 1/2 (f = 1 requires f >= 1/2 everywhere)")
    ge_half_right = bool(np.min(raw[grid >= 0.5]) >= 0.5 - 1e-10)

    roots = []
    for i in range(grid_points - 1):
        if g[i] == 0.0:
            roots.append(grid[i])
        elif g[i] * g[i + 1] < 0.0:
            roots.append(_bisect_fixed_point(f, grid[i], grid[i + 1], g[i], g[i + 1]))
    if g[-1] == 0.0 or abs(g[-1]) <= FIXED_POINT_TOL:
        roots.append(grid[-1])
    if abs(g[0]) <= FIXED_POINT_TOL and (not roots or roots[0] > FIXED_POINT_TOL):
        roots.insert(0, grid[0])

    deduped = []
    for r in sorted(roots):
        if not deduped or r - deduped[-1] > 1e-9:
            deduped.append(r)

    method = "tree" if ex.is_polynomial(f.tree) else "tree-piecewise"
    points = []
    for p in deduped:
        fp = float(f.fprime(p))
        points.append(FixedPoint(p=float(p), fprime=fp, stable=bool(fp <= 1.0 + STABILITY_TOL)))

    return FixedPointReport(
        points=tuple(points),
        fprime_half=float(f.fprime(0.5)),
        fsecond_half=float(f.fsecond(0.5)),
        ge_half=ge_half,
        ge_half_right=ge_half_right,
        unique=len(points) == 1,
        derivative_method=method,
    )
