"""Finite metric spaces with distances in a distance monoid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .monoid import Dist, Kind, MonoidSpec, make_monoid


class MetricError(ValueError):
    pass


class UnknownPoint(MetricError):
    pass


class GlueNotIsometric(MetricError):
    pass


class EmptyGlue(MetricError):
    pass


class ZeroDistance(MetricError):
    pass


class KatetovViolation(MetricError):
    pass


@dataclass(frozen=True)
class Violation:
    axiom: str
    points: tuple

    def to_json(self) -> dict:
        return {"axiom": self.axiom, "points": list(self.points)}


@dataclass(frozen=True)
class Space:
    """Points are integer ids; ``rows[i][j]`` is the distance between
    ``points[i]`` and ``points[j]``."""

    monoid: MonoidSpec
    points: tuple
    rows: tuple
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.points)})

    @classmethod
    def from_dict(cls, monoid: MonoidSpec, points: Sequence[int],
                  dist: Mapping[tuple, Dist]) -> "Space":
        """Build from a map {(x, y): d} given for x != y in either order."""
        rows = []
        for x in points:
            row = []
            for y in points:
                if x == y:
                    row.append(monoid.zero)
                else:
                    d = dist.get((x, y), dist.get((y, x)))
                    if d is None:
                        raise MetricError(f"missing distance {x}-{y}")
                    row.append(d)
            rows.append(tuple(row))
        return cls(monoid, tuple(points), tuple(rows))

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, p) -> bool:
        return p in self._index

    def index(self, p) -> int:
        try:
            return self._index[p]
        except KeyError:
            raise UnknownPoint(p) from None

    def d(self, x, y) -> Dist:
        return self.rows[self.index(x)][self.index(y)]

    def restrict(self, subset: Iterable[int]) -> "Space":
        keep = [p for p in self.points if p in set(subset)]
        idx = [self.index(p) for p in keep]
        rows = tuple(tuple(self.rows[i][j] for j in idx) for i in idx)
        return Space(self.monoid, tuple(keep), rows)

    def relabel(self, mapping: Mapping[int, int]) -> "Space":
        return Space(self.monoid, tuple(mapping[p] for p in self.points), self.rows)

    def to_json(self) -> dict:
        m = self.monoid
        return {"monoid": m.kind.value,
                "points": list(self.points),
                "dist": [[m.to_json(v) for v in row] for row in self.rows]}

    @classmethod
    def from_json(cls, obj: dict, monoid: MonoidSpec | None = None) -> "Space":
        m = monoid or make_monoid(obj["monoid"])
        rows = tuple(tuple(m.from_json(v) for v in row) for row in obj["dist"])
        return cls(m, tuple(obj["points"]), rows)


def integer_table(monoid: MonoidSpec, rows) -> tuple[np.ndarray, object] | None:
    """Scale a distance matrix to int64 keys with an exact sum on keys.

    Returns None when the scaled values would not fit comfortably in 64 bits.
    Lex pairs become ``x * K + y`` with K large enough that sums of two keys
    still compare lexicographically.
    """
    lex = monoid.kind is Kind.LEX_PAIR
    flat = [v for row in rows for v in row]
    parts = [x for v in flat for x in v] if lex else flat
    scale = 1
    for x in parts:
        scale = math.lcm(scale, int(x.denominator))
    limit = 1 << 58
    if lex:
        big_y = max((abs(int(v[1] * scale)) for v in flat), default=0)
        radix = 8 * big_y + 1
        keys = [[int(v[0] * scale) * radix + int(v[1] * scale) for v in row] for row in rows]
    else:
        keys = [[int(v * scale) for v in row] for row in rows]
    if any(abs(k) >= limit // 4 for row in keys for k in row):
        return None
    table = np.array(keys, dtype=np.int64).reshape(len(rows), len(rows))
    if monoid.kind is Kind.ULTRAMETRIC:
        add = np.maximum
    elif monoid.top is not None:
        top = int(monoid.top * scale)
        def add(x, y):
            return np.minimum(x + y, top)
    else:
        add = np.add
    return table, add


def validate_space(s: Space) -> Violation | None:
    """Return None if the metric axioms hold, else the first violation."""
    m, rows, pts = s.monoid, s.rows, s.points
    n = len(pts)
    zero = m.zero
    for i in range(n):
        if rows[i][i] != zero:
            return Violation("identity", (pts[i],))
        for j in range(i + 1, n):
            if rows[i][j] != rows[j][i]:
                return Violation("symmetry", (pts[i], pts[j]))
            if rows[i][j] == zero:
                return Violation("identity", (pts[i], pts[j]))
    fast = integer_table(m, rows) if n > 6 else None
    if fast is not None:
        # screen with integer keys; the exact loop below only runs to name
        # the first offending triple
        table, add = fast
        if not any((table > add(table[:, j:j + 1], table[j:j + 1, :])).any()
                   for j in range(n)):
            return None
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dij = rows[i][j]
            for k in range(n):
                if k != i and k != j and rows[i][k] > m.plus(dij, rows[j][k]):
                    return Violation("triangle", (pts[i], pts[j], pts[k]))
    return None


def check_partial_isometry(phi: Mapping[int, int], src: Space, dst: Space) -> Violation | None:
    items = sorted(phi.items())
    for x, y in items:
        src.index(x)
        dst.index(y)
    seen = {}
    for x, y in items:
        if y in seen:
            return Violation("injective", (seen[y], x))
        seen[y] = x
    for i, (x1, y1) in enumerate(items):
        for x2, y2 in items[i + 1:]:
            if src.d(x1, x2) != dst.d(y1, y2):
                return Violation("distance", (x1, x2))
    return None


def amalgam(a: Space, b: Space, glue: Mapping[int, int]) -> tuple[Space, dict]:
    """Independent amalgam of ``a`` and ``b`` over the points identified by
    ``glue`` (a-id -> b-id).

    Returns the amalgam, whose points are ``a``'s ids followed by fresh ids
    for the unglued points of ``b``, and the map from ``b``'s ids to them.
    """
    if not glue:
        raise EmptyGlue("independent amalgam needs a nonempty base")
    if check_partial_isometry(glue, a, b) is not None:
        raise GlueNotIsometric(dict(glue))
    m = a.monoid
    base_a = sorted(glue)
    into = {y: x for x, y in glue.items()}
    nxt = max(a.points, default=-1) + 1
    for p in b.points:
        if p not in into:
            into[p] = nxt
            nxt += 1
    extra = [p for p in b.points if p not in glue.values()]
    points = list(a.points) + [into[p] for p in extra]
    pos = {p: i for i, p in enumerate(points)}
    n = len(points)
    rows = [[m.zero] * n for _ in range(n)]
    for x in a.points:
        for y in a.points:
            rows[pos[x]][pos[y]] = a.d(x, y)
    for x in b.points:
        for y in b.points:
            rows[pos[into[x]]][pos[into[y]]] = b.d(x, y)
    for x in a.points:
        if x in glue:
            continue
        for y in extra:
            d = min(m.plus(a.d(x, z), b.d(glue[z], y)) for z in base_a)
            rows[pos[x]][pos[into[y]]] = d
            rows[pos[into[y]]][pos[x]] = d
    space = Space(m, tuple(points), tuple(tuple(r) for r in rows))
    return space, into


def katetov_violation(monoid: MonoidSpec, d, base: Sequence[int],
                      f: Mapping[int, Dist]) -> tuple | None:
    """First pair of ``base`` breaking the one-point extension inequalities,
    with ``d(x, y)`` a distance callback."""
    for x in base:
        fx = f[x]
        for y in base:
            if x == y:
                continue
            dxy = d(x, y)
            if fx > monoid.plus(dxy, f[y]):
                return (x, y)
            if dxy > monoid.plus(fx, f[y]):
                return (x, y)
    return None


@dataclass(frozen=True)
class ExtensionRequest:
    base: tuple
    f: Mapping[int, Dist]

    @classmethod
    def of(cls, f: Mapping[int, Dist]) -> "ExtensionRequest":
        return cls(tuple(sorted(f)), dict(f))


def check_katetov(s: Space, req: ExtensionRequest) -> Violation | None:
    for z in req.base:
        s.index(z)
        if req.f[z] == s.monoid.zero:
            raise ZeroDistance(z)
    bad = katetov_violation(s.monoid, s.d, req.base, req.f)
    return None if bad is None else Violation("katetov", bad)


def extension_row(monoid: MonoidSpec, d, points: Sequence[int], base: Sequence[int],
                  f: Mapping[int, Dist]) -> list:
    """Distances from a new point realising ``f`` to each of ``points``."""
    row = []
    for w in points:
        if w in f:
            row.append(f[w])
        else:
            row.append(min(monoid.plus(d(w, z), f[z]) for z in base))
    return row


def extend_one_point(s: Space, req: ExtensionRequest) -> tuple[Space, int]:
    m = s.monoid
    for z in req.base:
        if req.f[z] == m.zero:
            return s, z
    if not req.base:
        raise KatetovViolation("empty base")
    bad = check_katetov(s, req)
    if bad is not None:
        raise KatetovViolation(bad.points)
    new = max(s.points, default=-1) + 1
    row = extension_row(m, s.d, s.points, req.base, req.f)
    rows = tuple(tuple(r) + (row[i],) for i, r in enumerate(s.rows))
    rows += (tuple(row) + (m.zero,),)
    return Space(m, s.points + (new,), rows), new


def random_katetov(m: MonoidSpec, s: Space, values: Sequence, rng) -> dict:
    """A random one-point extension type over all of ``s``.

    Values are drawn point by point from ``values``, keeping only those
    consistent with the choices so far; when none is, the least consistent
    value min_y d(x, y) + f(y) is used, which always fits.
    """
    f: dict = {}
    for x in s.points:
        ok = [v for v in values if v != m.zero
              and katetov_violation(m, s.d, list(f) + [x], {**f, x: v}) is None]
        if ok:
            f[x] = rng.choice(ok)
        else:
            f[x] = min(m.plus(s.d(x, y), f[y]) for y in f)
    return f


def random_space(m: MonoidSpec, n: int, rng, values: Sequence,
                 base: Space | None = None) -> Space:
    """Grow ``base`` (or a single point) to ``n`` points by random
    one-point extensions."""
    s = base if base is not None else Space(m, (0,), ((m.zero,),))
    while len(s) < n:
        s, _ = extend_one_point(s, ExtensionRequest.of(random_katetov(m, s, values, rng)))
    return s


def random_glued_pair(m: MonoidSpec, max_points: int, rng, values: Sequence):
    """Two random spaces sharing an isometric copy of a nonempty part of
    the first, with the glue map a-id -> b-id."""
    a = random_space(m, rng.randint(1, max_points), rng, values)
    shared = sorted(rng.sample(a.points, rng.randint(1, len(a))))
    core = a.restrict(shared).relabel({p: i for i, p in enumerate(shared)})
    b = random_space(m, rng.randint(len(shared), max_points), rng, values, core)
    return a, b, {p: i for i, p in enumerate(shared)}
