from __future__ import annotations

import pytest
from gmpy2 import mpq as Q
from hypothesis import given, settings
from hypothesis import strategies as st

from homlab.monoid import (CarrierMismatch, InvalidBound, Kind, OrderViolation, UnknownKind,
                           make_monoid, minus, plus, standard_gap)

KINDS = ["q_nonneg", "q_unit_trunc", "q_lex2", "q_ultra"]


def test_truncated_flags():
    m = make_monoid(Kind.TRUNCATED_UNIT)
    assert m.top == 1 and m.metrically_complete and m.standard


def test_rationals_flags():
    m = make_monoid("q_nonneg")
    assert m.top is None and m.metrically_complete and m.standard and not m.ultrametric


def test_ultrametric_flag():
    assert make_monoid("q_ultra").ultrametric


def test_bad_kinds_and_bounds():
    with pytest.raises(UnknownKind):
        make_monoid("reals")
    with pytest.raises(InvalidBound):
        make_monoid("q_unit_trunc", 0)
    with pytest.raises(InvalidBound):
        make_monoid("q_nonneg", 3)


@pytest.mark.parametrize("kind,r,s,want", [
    ("q_nonneg", Q(2), Q(3), Q(5)),
    ("q_unit_trunc", Q(7, 10), Q(6, 10), Q(1)),
    ("q_ultra", Q(3), Q(5), Q(5)),
])
def test_plus_examples(kind, r, s, want):
    assert plus(make_monoid(kind), r, s) == want


def test_plus_rejects_outside_carrier():
    with pytest.raises(CarrierMismatch):
        plus(make_monoid("q_unit_trunc"), Q(2), Q(0))
    with pytest.raises(CarrierMismatch):
        plus(make_monoid("q_nonneg"), Q(-1), Q(0))


def test_minus_examples():
    assert minus(make_monoid("q_nonneg"), Q(5), Q(3)) == 2
    assert minus(make_monoid("q_ultra"), Q(3), Q(3)) == 0


def test_ultrametric_minus_is_least_on_grid():
    m = make_monoid("q_ultra")
    grid = [Q(k, 2) for k in range(11)]
    least = min(t for t in grid if Q(5) <= m.plus(Q(3), t))
    assert minus(m, Q(5), Q(3)) == least == 5


def test_minus_order_violation():
    with pytest.raises(OrderViolation):
        minus(make_monoid("q_nonneg"), Q(1), Q(2))


@pytest.mark.parametrize("kind,r,s,want", [
    ("q_nonneg", Q(1), Q(0), Q(1, 2)),
    ("q_unit_trunc", Q(1), Q(9, 10), Q(1, 20)),
    ("q_ultra", Q(5), Q(3), Q(4)),
])
def test_standard_gap(kind, r, s, want):
    m = make_monoid(kind)
    t = m.standard_gap(r, s)
    assert t == want
    assert t != m.zero and m.plus(s, t) < r


def test_lex_gap_and_minus():
    m = make_monoid("q_lex2")
    r, s = (Q(1), Q(-3)), (Q(0), Q(5))
    t = m.standard_gap(r, s)
    assert m.plus(s, t) < r and t > m.zero
    assert m.minus(r, s) == (Q(1), Q(-8))


def test_grid_and_json_roundtrip():
    for kind in KINDS:
        m = make_monoid(kind)
        for v in m.grid(3):
            assert m.contains(v)
            assert m.from_json(m.to_json(v)) == v
    assert max(make_monoid("q_unit_trunc").grid(5)) == 1


def test_lex_rejects_negative_pairs():
    m = make_monoid("q_lex2")
    assert not m.contains((Q(0), Q(-1)))
    assert m.contains((Q(1), Q(-100)))


def test_nonzero_values_enumerates_by_level():
    m = make_monoid("q_nonneg")
    it = m.nonzero_values()
    first = [next(it) for _ in range(3)]
    assert first == [Q(1)] + sorted({Q(1, 2), Q(2)})


def test_module_standard_gap_wrapper():
    assert standard_gap(make_monoid("q_nonneg"), Q(1), Q(0)) == Q(1, 2)


rationals = st.fractions(min_value=0, max_value=20, max_denominator=30).map(Q)
unit = st.fractions(min_value=0, max_value=1, max_denominator=30).map(Q)
pairs = st.tuples(rationals, st.fractions(min_value=-20, max_value=20, max_denominator=30).map(Q)
                  ).filter(lambda v: v >= (0, 0))


def _values(kind):
    return {"q_nonneg": rationals, "q_unit_trunc": unit, "q_ultra": rationals, "q_lex2": pairs}[kind]


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_monoid_laws(kind, data):
    m = make_monoid(kind)
    vals = _values(kind)
    r, s, t = data.draw(vals), data.draw(vals), data.draw(vals)
    assert m.plus(r, s) == m.plus(s, r)
    assert m.plus(m.plus(r, s), t) == m.plus(r, m.plus(s, t))
    assert m.plus(r, m.zero) == r
    if r <= s:
        assert m.plus(r, t) <= m.plus(s, t)
    lo, hi = sorted((r, s))
    d = m.minus(hi, lo)
    # residuation: hi - lo <= t exactly when hi <= lo + t
    assert (d <= t) == (hi <= m.plus(lo, t))
    if lo < hi:
        g = m.standard_gap(hi, lo)
        assert g > m.zero and m.plus(lo, g) < hi
