"""Exact arithmetic in countable distance monoids.

Four kinds are shipped.  Values are exact ``gmpy2.mpq`` rationals, except for
the lexicographic kind whose values are pairs of them (Python tuples already
compare lexicographically, which is the order we want).
"""

from __future__ import annotations

import enum
import operator
from dataclasses import dataclass
from typing import Iterator, Union

from gmpy2 import mpq as Q

Rational = type(Q(0))
Dist = Union[Rational, tuple]


class MonoidError(ValueError):
    pass


class UnknownKind(MonoidError):
    pass


class InvalidBound(MonoidError):
    pass


class CarrierMismatch(MonoidError):
    pass


class OrderViolation(MonoidError):
    pass


class NotStandardInstance(MonoidError):
    pass


class Kind(enum.Enum):
    RATIONALS_NONNEG = "q_nonneg"
    TRUNCATED_UNIT = "q_unit_trunc"
    LEX_PAIR = "q_lex2"
    ULTRAMETRIC = "q_ultra"


ZERO = Q(0)


@dataclass(frozen=True)
class MonoidSpec:
    kind: Kind
    top: Rational | None = None
    metrically_complete: bool = True
    standard: bool = True
    ultrametric: bool = False

    def __post_init__(self):
        # bind the sum once; it sits on every hot path
        object.__setattr__(self, "plus", self._pick_plus())

    def _pick_plus(self):
        if self.kind is Kind.LEX_PAIR:
            return lambda r, s: (r[0] + s[0], r[1] + s[1])
        if self.kind is Kind.ULTRAMETRIC:
            return max
        top = self.top
        if top is None:
            return operator.add
        return lambda r, s: min(r + s, top)

    # -- carrier ---------------------------------------------------------

    @property
    def zero(self) -> Dist:
        return (ZERO, ZERO) if self.kind is Kind.LEX_PAIR else ZERO

    def contains(self, r) -> bool:
        if self.kind is Kind.LEX_PAIR:
            return (isinstance(r, tuple) and len(r) == 2
                    and all(isinstance(x, Rational) for x in r)
                    and r >= (ZERO, ZERO))
        if not isinstance(r, Rational) or r < 0:
            return False
        return self.top is None or r <= self.top

    def check(self, *values) -> None:
        for r in values:
            if not self.contains(r):
                raise CarrierMismatch(f"{r!r} is not in the carrier of {self.kind.value}")

    def coerce(self, r) -> Dist:
        """Turn ints, strings or pairs into carrier values (validated)."""
        if self.kind is Kind.LEX_PAIR:
            if isinstance(r, str):
                raise CarrierMismatch(f"lex values are pairs, got {r!r}")
            x, y = r
            value = (Q(x), Q(y))
        elif isinstance(r, (tuple, list)):
            raise CarrierMismatch(f"{self.kind.value} values are scalars, got {r!r}")
        else:
            value = Q(r)
        self.check(value)
        return value

    # -- operations ------------------------------------------------------

    def minus(self, r: Dist, s: Dist) -> Dist:
        """Least t with r <= s + t.  Requires s <= r."""
        self.check(r, s)
        if s > r:
            raise OrderViolation(f"{s} > {r}")
        if self.kind is Kind.LEX_PAIR:
            return (r[0] - s[0], r[1] - s[1])
        if self.kind is Kind.ULTRAMETRIC:
            return ZERO if s == r else r
        return r - s

    def standard_gap(self, r: Dist, s: Dist) -> Dist:
        """A nonzero t with s + t < r, for s < r."""
        self.check(r, s)
        if not s < r:
            raise OrderViolation(f"need {s} < {r}")
        if self.kind is Kind.LEX_PAIR:
            return ((r[0] - s[0]) / 2, (r[1] - s[1]) / 2)
        if self.kind is Kind.ULTRAMETRIC:
            return (s + r) / 2 if s > 0 else r / 2
        return (r - s) / 2

    def sum(self, values) -> Dist:
        total = self.zero
        for v in values:
            total = self.plus(total, v)
        return total

    # -- grids -----------------------------------------------------------

    def grid(self, level: int) -> list:
        """Carrier values p/q with 0 <= p, q <= level (signed second
        coordinate for the lex kind), sorted."""
        base = sorted({Q(p, q) for q in range(1, level + 1)
                       for p in range(0, level + 1)})
        if self.kind is Kind.LEX_PAIR:
            signed = sorted({-x for x in base} | set(base))
            return sorted(v for v in ((x, y) for x in base for y in signed)
                          if v >= (ZERO, ZERO))
        if self.top is not None:
            base = [x for x in base if x <= self.top]
        return base

    def value_level(self, r: Dist) -> int:
        parts = r if self.kind is Kind.LEX_PAIR else (r,)
        return max(max(abs(x.numerator), x.denominator) for x in parts)

    def nonzero_values(self) -> Iterator[Dist]:
        """Every nonzero carrier value, grouped by grid level."""
        seen = set()
        level = 1
        while True:
            fresh = [v for v in self.grid(level) if v != self.zero and v not in seen]
            seen.update(fresh)
            yield from fresh
            level += 1

    # -- serialisation ---------------------------------------------------

    def to_json(self, r: Dist):
        if self.kind is Kind.LEX_PAIR:
            return [_frac_str(r[0]), _frac_str(r[1])]
        return _frac_str(r)

    def from_json(self, obj) -> Dist:
        if self.kind is Kind.LEX_PAIR:
            return self.coerce((Q(obj[0]), Q(obj[1])))
        return self.coerce(Q(obj))

    def describe(self) -> dict:
        out = {"kind": self.kind.value}
        if self.top is not None:
            out["top"] = _frac_str(self.top)
        return out


def _frac_str(x) -> str:
    return f"{x.numerator}/{x.denominator}"


def make_monoid(kind: Kind | str, bound=None) -> MonoidSpec:
    if isinstance(kind, str):
        try:
            kind = Kind(kind)
        except ValueError:
            raise UnknownKind(kind) from None
    if not isinstance(kind, Kind):
        raise UnknownKind(repr(kind))
    if kind is Kind.TRUNCATED_UNIT:
        top = Q(1) if bound is None else Q(bound)
        if top <= 0:
            raise InvalidBound(f"bound must be positive, got {bound}")
        return MonoidSpec(kind, top=top)
    if bound is not None:
        raise InvalidBound(f"{kind.value} takes no bound")
    return MonoidSpec(kind, ultrametric=kind is Kind.ULTRAMETRIC)


def plus(m: MonoidSpec, r: Dist, s: Dist) -> Dist:
    m.check(r, s)
    return m.plus(r, s)


def minus(m: MonoidSpec, r: Dist, s: Dist) -> Dist:
    return m.minus(r, s)


def standard_gap(m: MonoidSpec, r: Dist, s: Dist) -> Dist:
    return m.standard_gap(r, s)


ALL_KINDS = tuple(Kind)
