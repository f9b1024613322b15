from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from dso_tree.piecewise import CumulativeCurve, PiecewiseLinear, StepFunction, as_number

small = st.fractions(0, 5, max_denominator=6)


@st.composite
def steps(draw, signed=False):
    n = draw(st.integers(1, 5))
    widths = draw(st.lists(st.fractions(F(1, 8), 3, max_denominator=8), min_size=n, max_size=n))
    start = draw(st.fractions(-4, 4, max_denominator=4))
    bps = [start]
    for w in widths:
        bps.append(bps[-1] + w)
    lo = -5 if signed else 0
    vals = draw(st.lists(st.fractions(lo, 5, max_denominator=6), min_size=n, max_size=n))
    return StepFunction(tuple(bps), tuple(vals))


def test_rejects_bad_breakpoints():
    with pytest.raises(ValueError):
        StepFunction((0, 0), (1,))
    with pytest.raises(ValueError):
        StepFunction((0, 1, 2), (1,))


def test_right_open_and_zero_outside():
    f = StepFunction((0, 1, 3), (2, 5))
    assert f(0) == 2 and f(1) == 5 and f(3) == 0 and f(-1) == 0
    assert f.left_limit(1) == 2
    assert f.integral() == 12
    assert f.support() == (0, 3)


def test_from_pieces_fills_gaps():
    f = StepFunction.from_pieces([(2, 3, 1), (0, 1, 4)])
    assert f.breakpoints == (0, 1, 2, 3)
    assert f.values == (4, 0, 1)
    with pytest.raises(ValueError):
        StepFunction.from_pieces([(0, 2, 1), (1, 3, 1)])


def test_simplified_merges_and_trims():
    f = StepFunction((0, 1, 2, 3, 4), (0, 1, 1, 0)).simplified()
    assert f.breakpoints == (1, 3) and f.values == (1,)


@given(steps(signed=True), steps(signed=True), st.fractions(-3, 3, max_denominator=3))
def test_combine_is_pointwise(f, g, c):
    h = StepFunction.combine([f, g], [1, c])
    probes = set(f.breakpoints) | set(g.breakpoints)
    probes |= {a + F(1, 1000) for a in probes} | {a - F(1, 1000) for a in probes}
    for s in probes:
        assert h(s) == f(s) + c * g(s)
    assert h.integral() == f.integral() + c * g.integral()


@given(steps(), st.fractions(-6, 20, max_denominator=7))
def test_cumulative_matches_truncated_integral(f, s):
    cum = f.cumulative()
    truncated = sum(((min(b, s) - a) * v for a, b, v in f.pieces() if a < s), F(0))
    assert cum(s) == truncated


@given(steps(), small)
def test_inverse_right_is_latest_preimage(f, frac):
    cum = f.cumulative()
    if cum.total == 0:
        return
    v = frac / 5 * cum.total
    t = cum.inverse_right(v)
    if v >= cum.total:
        assert t == float("inf")
        return
    assert cum(t) == v
    assert cum(t + F(1, 10**6)) > v


@given(steps(), small)
def test_inverse_left_is_earliest_preimage(f, frac):
    cum = f.cumulative()
    if cum.total == 0:
        return
    v = frac / 5 * cum.total
    t = cum.inverse_left(v)
    if v <= 0:
        assert t == float("-inf")
        return
    assert cum(t) == v
    assert cum(t - F(1, 10**6)) < v


@given(steps())
def test_rate_round_trip(f):
    g = f.cumulative().rate()
    for a, b, v in f.pieces():
        assert g((a + b) / 2) == v


def test_shift():
    f = StepFunction((0, 1), (3,)).shift(F(1, 2))
    assert f.breakpoints == (F(1, 2), F(3, 2))


def test_piecewise_linear_with_jump():
    p = PiecewiseLinear((0, 1, 2), (0, 5), (1, 7))
    assert p(F(1, 2)) == F(1, 2)
    assert p(1) == 5
    assert p.slopes() == (1, 2)
    assert p.integral() == F(1, 2) + 6


def test_cumulative_constant_extension():
    c = CumulativeCurve((0, 2), (1, 3))
    assert c(-5) == 1 and c(9) == 3 and c(1) == 2


@pytest.mark.parametrize("raw,exact,expected", [
    ("1/3", True, F(1, 3)), (0.1, True, F(1, 10)), ("0.25", True, F(1, 4)), (2, False, 2.0),
])
def test_as_number(raw, exact, expected):
    v = as_number(raw, exact)
    assert v == expected and type(v) is type(expected)
