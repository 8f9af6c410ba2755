"""Incremental generation of the countable Urysohn space over a distance monoid.

The generator keeps a growing finite prefix.  New points come either from the
fair schedule (``step``) or on demand (``realize``).  The schedule works in
stages: stage L offers every Katetov request over subsets of the first L
points of size at most ``L.bit_length()`` whose values come from a grid whose
level grows with ``L``.  Every finite request shows up at some stage, which is
all the limit needs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .metric import (
    ExtensionRequest,
    KatetovViolation,
    Space,
    ZeroDistance,
    katetov_violation,
)
from .monoid import Dist, MonoidSpec


def _stage_shape(stage: int) -> tuple[int, int]:
    size = stage.bit_length()
    return size, size.bit_length()


def schedule(monoid: MonoidSpec) -> Iterator[tuple]:
    """Yield (base, values) requests stage by stage, never repeating one."""
    yield ()
    stage = 1
    prev_size, prev_level = 0, 0
    while True:
        size_cap, level = _stage_shape(stage)
        values = [v for v in monoid.grid(level) if v != monoid.zero]
        old_values = {v for v in values if monoid.value_level(v) <= prev_level}
        for size in range(1, min(size_cap, stage) + 1):
            for base in itertools.combinations(range(stage), size):
                seen_before = base[-1] < stage - 1 and size <= prev_size
                for vec in itertools.product(values, repeat=size):
                    if seen_before and all(v in old_values for v in vec):
                        continue
                    yield base, vec
        prev_size, prev_level = size_cap, level
        stage += 1


@dataclass
class LogEntry:
    point: int
    source: str
    f: dict

    def to_json(self, m: MonoidSpec) -> dict:
        return {"point": self.point, "source": self.source,
                "f": {str(k): m.to_json(v) for k, v in sorted(self.f.items())}}


class Generator:
    """A growing finite prefix of the Urysohn space.

    Point ids are ``0 .. len(self) - 1`` in creation order.  Distances live in
    a mutable table; ``space()`` hands out immutable snapshots.
    """

    def __init__(self, monoid: MonoidSpec):
        self.monoid = monoid
        self._rows: list[list] = []
        self._schedule = schedule(monoid)
        self.cursor = 0
        self.log: list[LogEntry] = []

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def points(self) -> range:
        return range(len(self._rows))

    def d(self, x: int, y: int) -> Dist:
        return self._rows[x][y]

    def row(self, x: int) -> list:
        return self._rows[x]

    def space(self, points: Sequence[int] | None = None) -> Space:
        pts = tuple(self.points) if points is None else tuple(points)
        rows = tuple(tuple(self._rows[x][y] for y in pts) for x in pts)
        return Space(self.monoid, pts, rows)

    def fork(self) -> "Generator":
        """An independent copy at the same point of the schedule."""
        twin = Generator(self.monoid)
        twin._rows = [list(r) for r in self._rows]
        twin.log = list(self.log)
        for _ in range(self.cursor):
            next(twin._schedule)
        twin.cursor = self.cursor
        return twin

    # -- growth ----------------------------------------------------------

    def _append(self, f: Mapping[int, Dist], source: str) -> int:
        m = self.monoid
        new = len(self._rows)
        if not f:
            if self._rows:
                raise KatetovViolation("empty base on a nonempty prefix")
            self._rows.append([m.zero])
        else:
            row = self._row_for(f)
            for w, r in enumerate(self._rows):
                r.append(row[w])
            row.append(m.zero)
            self._rows.append(row)
        self.log.append(LogEntry(new, source, dict(f)))
        return new

    def _row_for(self, f: Mapping[int, Dist]) -> list:
        # row of the new point: min over the base of d(w, z) + f(z), one
        # whole table row at a time
        plus = self.monoid.plus
        row = None
        for z, fz in f.items():
            cand = list(map(plus, self._rows[z], itertools.repeat(fz)))
            row = cand if row is None else list(map(min, row, cand))
        for z, fz in f.items():
            row[z] = fz
        return row

    def step(self) -> int | None:
        """Serve the next scheduled request; return the new point or None."""
        req = next(self._schedule)
        self.cursor += 1
        if not req:
            return self._append({}, "schedule") if not self._rows else None
        base, vec = req
        if base[-1] >= len(self._rows):
            return None
        f = dict(zip(base, vec))
        if katetov_violation(self.monoid, self.d, base, f) is not None:
            return None
        return self._append(f, "schedule")

    def run(self, steps: int) -> "Generator":
        for _ in range(steps):
            self.step()
        return self

    def grow_to(self, n: int, max_steps: int = 1_000_000) -> "Generator":
        for _ in range(max_steps):
            if len(self) >= n:
                return self
            self.step()
        raise RuntimeError(f"prefix did not reach {n} points")

    def realize(self, f: Mapping[int, Dist]) -> int:
        """Insert a point with the prescribed distances right away.

        If some prescribed distance is zero the corresponding existing point
        is returned instead.
        """
        m = self.monoid
        for z, v in f.items():
            if v == m.zero:
                return z
        for z, v in f.items():
            if not 0 <= z < len(self._rows):
                raise KeyError(z)
            m.check(v)
        bad = katetov_violation(m, self.d, list(f), f)
        if bad is not None:
            raise KatetovViolation(bad)
        if not f and self._rows:
            raise KatetovViolation("empty base on a nonempty prefix")
        return self._append(f, "demand")

    def matches(self, f: Mapping[int, Dist], exclude=()) -> Iterator[int]:
        """Existing points at exactly the prescribed distances, by id."""
        items = list(f.items())
        rows = self._rows
        if not items:
            for p in self.points:
                if p not in exclude:
                    yield p
            return
        z0, v0 = items[0]
        rest = items[1:]
        for p, v in enumerate(rows[z0]):
            if v == v0 and p not in exclude and all(rows[z][p] == v for z, v in rest):
                yield p

    def to_json(self) -> dict:
        out = self.space().to_json()
        out["log"] = [e.to_json(self.monoid) for e in self.log]
        out["cursor"] = self.cursor
        return out


def step_generator(g: Generator) -> Generator:
    g.step()
    return g


def realize_type(g: Generator, req: ExtensionRequest | Mapping[int, Dist]) -> tuple[Generator, int]:
    f = req.f if isinstance(req, ExtensionRequest) else req
    return g, g.realize(f)


def extend_partial_isometry(g: Generator, phi: Mapping[int, int], target: int) -> tuple[Generator, dict]:
    """One forth step: give ``target`` an image consistent with ``phi``.

    The lowest-id existing point at the forced distances wins; otherwise a
    fresh point is realised.
    """
    if target in phi:
        return g, dict(phi)
    f = {phi[x]: g.d(target, x) for x in phi}
    image = next(g.matches(f, exclude=set(phi.values())), None)
    if image is None:
        image = g.realize(f)
    out = dict(phi)
    out[target] = image
    return g, out


@dataclass
class ExtensionReport:
    realized: list = field(default_factory=list)
    missed: list = field(default_factory=list)
    steps: int = 0

    @property
    def ok(self) -> bool:
        return not self.missed


def verify_extension_property(g: Generator, base_bound: int, grid_level: int,
                              budget: int) -> ExtensionReport:
    """Check that the schedule realises every Katetov request over subsets
    (size <= 3) of the first ``base_bound`` points, with grid values of the
    given level, within ``budget`` further steps.  Misses are reported, not
    raised."""
    m = g.monoid
    report = ExtensionReport()
    if base_bound == 0:
        return report
    while len(g) < base_bound and report.steps < budget:
        g.step()
        report.steps += 1
    values = [v for v in m.grid(grid_level) if v != m.zero]
    pending = []
    for size in range(1, min(3, base_bound) + 1):
        for base in itertools.combinations(range(base_bound), size):
            for vec in itertools.product(values, repeat=size):
                f = dict(zip(base, vec))
                if base[-1] < len(g) and katetov_violation(m, g.d, base, f) is not None:
                    continue
                pending.append(f)

    def realized(f):
        if any(z >= len(g) for z in f):
            return False
        return next(g.matches(f), None) is not None

    pending = [f for f in pending if not _record(report, f, realized(f))]
    while pending and report.steps < budget:
        new = g.step()
        report.steps += 1
        if new is None:
            continue
        still = []
        for f in pending:
            if all(z < len(g) for z in f) and katetov_violation(m, g.d, list(f), f) is not None:
                continue
            if all(z < new for z in f) and all(g.d(new, z) == v for z, v in f.items()):
                report.realized.append(f)
            elif any(z >= new for z in f) and realized(f):
                report.realized.append(f)
            else:
                still.append(f)
        pending = still
    report.missed.extend(pending)
    return report


def _record(report: ExtensionReport, f, hit: bool) -> bool:
    if hit:
        report.realized.append(f)
    return hit
