"""Lazy isometric self-embeddings of a Urysohn generator.

An embedding is explored one point at a time.  ``apply_at(p)`` maps ``p``
straight away when it is not yet in the domain; ``advance()`` maps the
lowest-id unmapped point, so repeated advancing exhausts the whole prefix in
the limit.  Every new pair is consistent with all earlier ones, so the
explored map is always a finite partial isometry.
"""

from __future__ import annotations

import random
from typing import Mapping

from .metric import check_partial_isometry
from .monoid import Dist
from .rng import SplitMix64
from .urysohn import Generator


class EmbedError(RuntimeError):
    pass


class DepthExceeded(EmbedError):
    pass


class GeneratorMismatch(EmbedError):
    pass


class NotMetricallyComplete(EmbedError):
    pass


class ZeroEpsilon(EmbedError):
    pass


class Embedding:
    rule = "generic"

    def __init__(self, gen: Generator):
        self.gen = gen
        self.pairs: dict[int, int] = {}
        self.order: list[int] = []

    # subclasses implement _map(p) -> image
    def _map(self, p: int) -> int:
        raise NotImplementedError

    def _record(self, p: int, image: int) -> int:
        self.pairs[p] = image
        self.order.append(p)
        return image

    def _next_unmapped(self) -> int:
        p = 0
        while p in self.pairs:
            p += 1
        if p >= len(self.gen):
            self.gen.step()
            while p >= len(self.gen):
                self.gen.step()
        return p

    def advance(self) -> int:
        p = self._next_unmapped()
        self.apply_at(p, 1)
        return p

    def apply_at(self, p: int, depth: int = 1) -> int:
        image = self.pairs.get(p)
        if image is not None:
            return image
        if depth <= 0:
            raise DepthExceeded(p)
        if not 0 <= p < len(self.gen):
            raise KeyError(p)
        return self._record(p, self._map(p))

    def explored(self) -> dict[int, int]:
        return dict(self.pairs)

    def image(self) -> set[int]:
        return set(self.pairs.values())

    def check(self):
        space = self.gen.space()
        return check_partial_isometry(self.pairs, space, space)

    def to_json(self) -> dict:
        return {"pairs": [[p, self.pairs[p]] for p in self.order], "rule": self.rule}


class Identity(Embedding):
    rule = "identity"

    def _map(self, p: int) -> int:
        return p


class ForthEmbedding(Embedding):
    """Back-and-forth extension of a finite partial isometry.

    Without an rng the lowest-id consistent existing point is used, falling
    back to a fresh point.  With an rng, a fresh point and each consistent
    existing point are equally likely.
    """

    def __init__(self, gen: Generator, start: Mapping[int, int] | None = None,
                 rng: random.Random | None = None, rule: str = "generic"):
        super().__init__(gen)
        self.rng = rng
        self.rule = rule
        used = set()
        for p, q in (start or {}).items():
            if q in used:
                raise EmbedError("start map is not injective")
            used.add(q)
        for p in sorted(start or {}):
            self._record(p, start[p])
        bad = self.check()
        if bad is not None:
            raise EmbedError(f"start map is not an isometry: {bad}")

    def _map(self, p: int) -> int:
        g = self.gen
        f = {self.pairs[x]: g.d(p, x) for x in self.order}
        taken = set(self.pairs.values())
        if self.rng is None:
            image = next(g.matches(f, exclude=taken), None)
            return g.realize(f) if image is None else image
        options = list(g.matches(f, exclude=taken))
        # with nothing mapped yet a fresh point has no type to realise
        pick = self.rng.randrange(len(options) + (1 if f else 0))
        return g.realize(f) if pick == len(options) else options[pick]


class Composite(Embedding):
    """``outer`` after ``inner``."""

    rule = "composite"

    def __init__(self, outer: Embedding, inner: Embedding):
        if outer.gen is not inner.gen:
            raise GeneratorMismatch("factors live on different generators")
        super().__init__(outer.gen)
        self.outer = outer
        self.inner = inner

    def apply_at(self, p: int, depth: int = 1) -> int:
        image = self.pairs.get(p)
        if image is not None:
            return image
        mid = self.inner.apply_at(p, depth)
        return self._record(p, self.outer.apply_at(mid, depth))


def compose(e1: Embedding, e2: Embedding) -> Embedding:
    return Composite(e1, e2)


# -- pinching and spreading -----------------------------------------------------


class _PairState:
    """Shared advance state of a pinching or spreading pair."""

    def __init__(self, gen: Generator, a: int, eps: Dist):
        m = gen.monoid
        m.check(eps)
        if eps == m.zero:
            raise ZeroEpsilon("epsilon must be nonzero")
        if not (m.metrically_complete and m.standard):
            raise NotMetricallyComplete(m.kind.value)
        self.gen = gen
        self.a = a
        self.eps = eps
        self.domain: list[int] = []
        self.left: dict[int, int] = {}
        self.right: dict[int, int] = {}

    def ensure(self, p: int) -> None:
        if p not in self.left:
            self._extend(p)
            self.domain.append(p)

    def _extend(self, p: int) -> None:
        raise NotImplementedError


class _PinchState(_PairState):
    def __init__(self, gen: Generator, a: int, eps: Dist):
        super().__init__(gen, a, eps)
        self.left[a] = a
        self.right[a] = gen.realize({a: eps})
        self.domain.append(a)

    def _extend(self, p: int) -> None:
        g, m, a, eps = self.gen, self.gen.monoid, self.a, self.eps
        alpha = g.d(a, p)
        if alpha >= eps:
            f = {}
            for q in self.domain:
                delta = g.d(q, p)
                f[self.left[q]] = delta
                f[self.right[q]] = delta
            e = g.realize(f)
            self.left[p] = self.right[p] = e
            return
        gap = m.minus(eps, alpha)
        fx, fy = {}, {}
        for q in self.domain:
            delta = g.d(q, p)
            bq, cq = self.left[q], self.right[q]
            fx[bq] = delta
            fy[cq] = delta
            if bq == cq:
                continue
            if q == a:
                cross = max(alpha, gap)
            else:
                cross = max(delta, m.minus(eps, g.d(a, q)), gap)
            fx[cq] = cross
            fy[bq] = cross
        x = g.realize(fx)
        fy[x] = gap
        y = g.realize(fy)
        self.left[p], self.right[p] = x, y


class _SpreadState(_PairState):
    def __init__(self, gen: Generator, a: int, eps: Dist):
        super().__init__(gen, a, eps)
        self.left[a] = self.right[a] = a
        self.domain.append(a)

    def _extend(self, p: int) -> None:
        g, m, a = self.gen, self.gen.monoid, self.a
        alpha = g.d(a, p)
        fx, fy = {}, {}
        for q in self.domain:
            delta = g.d(q, p)
            bq, cq = self.left[q], self.right[q]
            fx[bq] = delta
            fy[cq] = delta
            if bq != cq:
                cross = m.plus(g.d(a, q), alpha)
                fx[cq] = cross
                fy[bq] = cross
        x = g.realize(fx)
        fy[x] = m.plus(alpha, alpha)
        y = g.realize(fy)
        self.left[p], self.right[p] = x, y


class PairView(Embedding):
    def __init__(self, state: _PairState, side: str, rule: str):
        super().__init__(state.gen)
        self.state = state
        self.side = side
        self.rule = rule
        for p in state.domain:
            self._record(p, self._lookup(p))

    def _lookup(self, p: int) -> int:
        return (self.state.left if self.side == "left" else self.state.right)[p]

    def _map(self, p: int) -> int:
        self.state.ensure(p)
        return self._lookup(p)


def pinching_pair(g: Generator, a: int, eps: Dist) -> tuple[PairView, PairView]:
    """Embeddings that agree off the open ball of radius eps around ``a`` and
    disagree at every point inside it."""
    state = _PinchState(g, a, eps)
    return PairView(state, "left", "pinch-left"), PairView(state, "right", "pinch-right")


def spreading_pair(g: Generator, a: int, eps: Dist) -> tuple[PairView, PairView]:
    """Embeddings whose images both contain ``a`` and come within eps of each
    other only inside the ball around ``a``."""
    state = _SpreadState(g, a, eps)
    return PairView(state, "left", "spread-left"), PairView(state, "right", "spread-right")


def sample_embedding(g: Generator, seed: int, n: int) -> ForthEmbedding:
    e = ForthEmbedding(g, rng=SplitMix64(seed), rule="sample")
    for _ in range(n):
        e.advance()
    return e


def separation_witness(g: Generator, phi: Mapping[int, int], a: int, b: int,
                       eps: Dist, advances: int = 0) -> ForthEmbedding:
    """An embedding s with d(s(a), b) < eps that does not extend ``phi``."""
    m = g.monoid
    m.check(eps)
    if eps == m.zero:
        raise ZeroEpsilon("epsilon must be nonzero")
    if not phi:
        raise EmbedError("every embedding extends the empty map")
    extended = dict(phi)
    if extended.setdefault(a, b) != b:
        start = {a: b}
    else:
        space = g.space()
        isometric = (len(set(extended.values())) == len(extended)
                     and check_partial_isometry(extended, space, space) is None)
        if not isometric:
            start = {a: b}
        elif set(extended) == {a}:
            near = g.realize({b: m.standard_gap(eps, m.zero)})
            start = {a: near}
        else:
            copy = _copy_over(g, sorted(extended.values()), b)
            start = {x: copy[y] for x, y in extended.items()}
    s = ForthEmbedding(g, start, rule="separation")
    for _ in range(advances):
        s.advance()
    return s


def _copy_over(g: Generator, block: list[int], b: int) -> dict[int, int]:
    """Realise a copy of ``block`` meeting it only in ``b``, placed as the
    independent amalgam of the two copies over ``b``."""
    m = g.monoid
    copy = {b: b}
    for y in block:
        if y == b:
            continue
        f = {w: m.plus(g.d(y, b), g.d(b, w)) for w in block if w != b}
        f[b] = g.d(y, b)
        for z, cz in copy.items():
            if z != b:
                f[cz] = g.d(y, z)
        copy[y] = g.realize(f)
    return copy
