"""Piecewise-constant rates and piecewise-linear curves.

All classes work with either ``float`` or ``fractions.Fraction`` values.  With
floats, breakpoints closer than a relative ``SNAP`` are merged so that curves
built through different arithmetic routes line up; with fractions nothing is
merged and every operation is exact.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

SNAP = 1e-11

INF = math.inf


def is_exact(*values) -> bool:
    """True when no value is a float (ints and Fractions are exact)."""
    return not any(isinstance(v, float) for v in values)


def snap_points(points: Iterable, exact: bool | None = None) -> list:
    pts = sorted(points)
    if not pts:
        return []
    if exact is None:
        exact = is_exact(*pts)
    out = [pts[0]]
    for p in pts[1:]:
        prev = out[-1]
        if p == prev:
            continue
        if not exact and p - prev <= SNAP * max(1.0, abs(prev), abs(p)):
            continue
        out.append(p)
    return out


def _mid(a, b):
    return (a + b) / 2


@dataclass(frozen=True)
class StepFunction:
    """Right-open piecewise-constant function; zero outside its breakpoints.

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k + 1])``.
    """

    breakpoints: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        bp, vals = tuple(self.breakpoints), tuple(self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if not bp:
            if vals:
                raise ValueError("values given without breakpoints")
            return
        if len(bp) != len(vals) + 1:
            raise ValueError("need len(breakpoints) == len(values) + 1")
        for a, b in zip(bp, bp[1:]):
            if not b > a:
                raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls()

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple]) -> "StepFunction":
        """Build from ``(start, end, rate)`` triples; gaps are filled with 0."""
        pieces = sorted(pieces)
        if not pieces:
            return cls()
        bps, vals = [pieces[0][0]], []
        for start, end, rate in pieces:
            if start < bps[-1]:
                raise ValueError("overlapping pieces")
            if start > bps[-1]:
                vals.append(0 * rate)
                bps.append(start)
            if end <= start:
                raise ValueError("empty piece")
            vals.append(rate)
            bps.append(end)
        return cls(tuple(bps), tuple(vals))

    @property
    def exact(self) -> bool:
        return is_exact(*self.breakpoints, *self.values)

    def __bool__(self) -> bool:
        return any(v != 0 for v in self.values)

    def __call__(self, s):
        k = bisect_right(self.breakpoints, s) - 1
        if 0 <= k < len(self.values):
            return self.values[k]
        return 0

    def left_limit(self, s):
        k = bisect_left(self.breakpoints, s) - 1
        if 0 <= k < len(self.values):
            return self.values[k]
        return 0

    def pieces(self):
        return zip(self.breakpoints, self.breakpoints[1:], self.values)

    def integral(self):
        return sum(((b - a) * v for a, b, v in self.pieces()), 0)

    def support(self):
        """(first, last) times where the function is nonzero, or None."""
        nz = [(a, b) for a, b, v in self.pieces() if v != 0]
        if not nz:
            return None
        return nz[0][0], nz[-1][1]

    def min_value(self):
        return min(self.values, default=0)

    def shift(self, delta) -> "StepFunction":
        if not self.breakpoints or delta == 0:
            return self
        return StepFunction(tuple(b + delta for b in self.breakpoints), self.values)

    def simplified(self) -> "StepFunction":
        """Merge equal neighbours and trim zero pieces at both ends."""
        if not self.values:
            return self
        bps, vals = [self.breakpoints[0]], []
        for a, b, v in self.pieces():
            if vals and vals[-1] == v:
                bps[-1] = b
            else:
                vals.append(v)
                bps.append(b)
        while vals and vals[0] == 0:
            vals.pop(0)
            bps.pop(0)
        while vals and vals[-1] == 0:
            vals.pop()
            bps.pop()
        if not vals:
            return StepFunction()
        return StepFunction(tuple(bps), tuple(vals))

    def map_values(self, fn) -> "StepFunction":
        return StepFunction(self.breakpoints, tuple(fn(v) for v in self.values))

    def cumulative(self) -> "CumulativeCurve":
        if not self.breakpoints:
            return CumulativeCurve()
        ys = [0 * self.breakpoints[0]]
        for a, b, v in self.pieces():
            ys.append(ys[-1] + (b - a) * v)
        return CumulativeCurve(self.breakpoints, tuple(ys))

    @staticmethod
    def combine(funcs: Sequence["StepFunction"], coeffs: Sequence | None = None) -> "StepFunction":
        """Linear combination ``sum(c * f)`` on the merged breakpoint grid."""
        if coeffs is None:
            coeffs = [1] * len(funcs)
        pairs = [(f, c) for f, c in zip(funcs, coeffs) if f.breakpoints]
        if not pairs:
            return StepFunction()
        if len(pairs) == 1 and pairs[0][1] == 1:
            return pairs[0][0]
        exact = all(f.exact for f, _ in pairs) and is_exact(*coeffs)
        grid = snap_points((b for f, _ in pairs for b in f.breakpoints), exact)
        vals = []
        for a, b in zip(grid, grid[1:]):
            m = _mid(a, b)
            vals.append(sum((c * f(m) for f, c in pairs), 0))
        return StepFunction(tuple(grid), tuple(vals)).simplified()

    def __add__(self, other: "StepFunction") -> "StepFunction":
        return StepFunction.combine([self, other])

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        return StepFunction.combine([self, other], [1, -1])


@dataclass(frozen=True)
class CumulativeCurve:
    """Continuous nondecreasing piecewise-linear curve, constant outside ``xs``."""

    xs: tuple = ()
    ys: tuple = ()

    def __post_init__(self):
        xs, ys = tuple(self.xs), tuple(self.ys)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if len(xs) != len(ys):
            raise ValueError("xs and ys differ in length")

    @property
    def total(self):
        return self.ys[-1] if self.ys else 0

    def __call__(self, s):
        xs, ys = self.xs, self.ys
        if not xs:
            return 0
        if s <= xs[0]:
            return ys[0]
        if s >= xs[-1]:
            return ys[-1]
        k = bisect_right(xs, s) - 1
        x0, x1 = xs[k], xs[k + 1]
        return ys[k] + (ys[k + 1] - ys[k]) * (s - x0) / (x1 - x0)

    def inverse_right(self, v):
        """Latest time at which the curve is still at most ``v``."""
        xs, ys = self.xs, self.ys
        if not xs or v >= ys[-1]:
            return INF
        if v < ys[0]:
            return -INF
        k = bisect_right(ys, v) - 1
        return xs[k] + (v - ys[k]) * (xs[k + 1] - xs[k]) / (ys[k + 1] - ys[k])

    def inverse_left(self, v):
        """Earliest time at which the curve reaches ``v``."""
        xs, ys = self.xs, self.ys
        if not xs or v <= ys[0]:
            return -INF
        if v > ys[-1]:
            return INF
        k = bisect_left(ys, v)
        return xs[k - 1] + (v - ys[k - 1]) * (xs[k] - xs[k - 1]) / (ys[k] - ys[k - 1])

    def rate(self) -> StepFunction:
        """Derivative as a step function (slope of each segment)."""
        if len(self.xs) < 2:
            return StepFunction()
        vals = tuple(
            (y1 - y0) / (x1 - x0)
            for x0, x1, y0, y1 in zip(self.xs, self.xs[1:], self.ys, self.ys[1:])
        )
        return StepFunction(self.xs, vals)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-affine function that may jump at its breakpoints.

    On interval ``k`` the function runs from ``starts[k]`` (right limit at
    ``ts[k]``) to ``ends[k]`` (left limit at ``ts[k + 1]``).
    """

    ts: tuple
    starts: tuple
    ends: tuple

    def __call__(self, t):
        ts = self.ts
        if t <= ts[0]:
            return self.starts[0] if self.starts else 0
        if t >= ts[-1]:
            return self.ends[-1] if self.ends else 0
        k = bisect_right(ts, t) - 1
        return self.starts[k] + (self.ends[k] - self.starts[k]) * (t - ts[k]) / (ts[k + 1] - ts[k])

    def slopes(self) -> tuple:
        return tuple(
            (e - s) / (b - a)
            for a, b, s, e in zip(self.ts, self.ts[1:], self.starts, self.ends)
        )

    def means(self) -> tuple:
        return tuple(_mid(s, e) for s, e in zip(self.starts, self.ends))

    def integral(self):
        return sum(
            ((b - a) * _mid(s, e) for a, b, s, e in zip(self.ts, self.ts[1:], self.starts, self.ends)),
            0,
        )


def as_number(value, exact: bool):
    """Coerce a JSON scalar (number or ``"p/q"`` string) to the working type."""
    if isinstance(value, str):
        value = Fraction(value.strip())
    if exact:
        if isinstance(value, float):
            return Fraction(repr(value))
        return Fraction(value)
    return float(value)
