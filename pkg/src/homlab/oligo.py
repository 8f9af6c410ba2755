"""Concrete homogeneous structures with growing finite universes.

Each structure exposes algebraic closure, orbit equivalence of tuples and a
candidate generator for extending partial automorphisms one point at a time.
Group elements are finite partial maps (``PartialAut``) that grow on demand.
"""

from __future__ import annotations

import copy
import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from gmpy2 import mpq


class OligoError(RuntimeError):
    pass


class BudgetExceeded(OligoError):
    pass


class PreconditionFailed(OligoError):
    pass


class LengthMismatch(OligoError):
    pass


def same_equality_pattern(u: Sequence, v: Sequence) -> bool:
    if len(u) != len(v):
        raise LengthMismatch((len(u), len(v)))
    seen: dict = {}
    back: dict = {}
    for x, y in zip(u, v):
        if seen.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


class Structure:
    """Base class.  Subclasses keep ``self._universe`` as a sorted list."""

    kind = "abstract"
    # finite truncations are themselves homogeneous (so automorphisms of a
    # truncation witness orbits); otherwise orbits are read off quantifier-free
    # types, which is valid in the infinite homogeneous structure
    homogeneous_truncation = True

    def __init__(self):
        self._universe: list = []
        self._members: set = set()

    # -- universe --------------------------------------------------------

    @property
    def universe(self) -> list:
        return list(self._universe)

    def __contains__(self, x) -> bool:
        return x in self._members

    def _add(self, elements: Iterable) -> None:
        fresh = [x for x in elements if x not in self._members]
        self._members.update(fresh)
        self._universe = sorted(self._members, key=self.key)

    def key(self, x):
        return x

    def grow(self) -> None:
        raise NotImplementedError

    # -- model theory ----------------------------------------------------

    def acl(self, A: Iterable) -> frozenset:
        return frozenset(A)

    def orbit_eq(self, u: Sequence, v: Sequence) -> bool:
        raise NotImplementedError

    def is_partial_iso(self, pairs: Mapping) -> bool:
        dom = list(pairs)
        return self.orbit_eq(dom, [pairs[x] for x in dom])

    def candidates(self, phi: Mapping, t) -> Iterator:
        """Images y for ``t`` keeping ``phi`` a partial isomorphism: existing
        elements first, in universe order, then one freshly created element.
        If ``t`` is already in ``phi`` only its image is produced."""
        if t in phi:
            yield phi[t]
            return
        seen = set()
        for y in self._existing(phi, t):
            seen.add(y)
            yield y
        fresh = self.fresh(phi, t)
        if fresh is not None and fresh not in seen:
            yield fresh

    def existing_candidates(self, phi: Mapping, t) -> list:
        """Candidates already in the universe (never grows it)."""
        if t in phi:
            return [phi[t]]
        return list(self._existing(phi, t))

    def _existing(self, phi: Mapping, t) -> Iterator:
        dom = list(phi)
        img = [phi[x] for x in dom]
        used = set(img)
        for y in self.universe:
            if y not in used and self.orbit_eq(dom + [t], img + [y]):
                yield y

    def fresh_is_forced(self, phi: Mapping, t) -> bool:
        """True when the image of ``t`` is determined by ``phi``."""
        return self.in_acl(list(phi), t)

    def in_acl(self, A: Iterable, z) -> bool:
        return z in self.acl(A)

    def closure_test(self, A: Iterable) -> Callable[[object], bool]:
        """Membership predicate for acl(A), computed once."""
        closed = self.acl(A)
        return closed.__contains__

    def outside(self, A: Iterable):
        """Some element not in acl(A), growing the universe if needed."""
        inside = self.closure_test(A)
        while True:
            for x in self.universe:
                if not inside(x):
                    return x
            self.grow()

    def indep(self, A: Iterable, B: Iterable, C: Iterable) -> bool:
        """acl(AC) & acl(BC) == acl(C)."""
        A, B, C = set(A), set(B), set(C)
        return self.acl(A | C) & self.acl(B | C) == self.acl(C)

    def clone(self) -> "Structure":
        return copy.deepcopy(self)

    def fresh_joint(self, constraints: Sequence[tuple[Mapping, object]]):
        """A new element that is a valid image under several partial maps at
        once (each given as (phi, t)), or None.  The default takes the fresh
        image for the first constraint; generic enough for structures whose
        fresh elements avoid all existing algebraic relations."""
        phi, t = constraints[0]
        y = self.fresh(phi, t)
        if y is None:
            return None
        for psi, u in constraints[1:]:
            dom = list(psi)
            if y in psi.values() or not self.orbit_eq(dom + [u], [psi[x] for x in dom] + [y]):
                return None
        return y

    def fresh(self, phi: Mapping, t):
        """Create (by growing) an image for ``t`` outside the current
        universe, or return None if the image is forced."""
        raise NotImplementedError

    def relations(self, universe: Sequence) -> list[tuple[str, set]]:
        """Relations of the structure restricted to ``universe``."""
        return []

    # -- naming ----------------------------------------------------------

    def fmt(self, x) -> str:
        return str(x)

    def parse(self, s: str):
        return int(s)

    def describe(self) -> dict:
        return {"kind": self.kind}


# ---------------------------------------------------------------------------


class PureSet(Structure):
    kind = "pure_set"

    def __init__(self, size: int = 8):
        super().__init__()
        self._add(range(size))

    def grow(self) -> None:
        self._add([len(self._universe)])

    def orbit_eq(self, u, v) -> bool:
        return same_equality_pattern(u, v)

    def _existing(self, phi, t):
        used = set(phi.values())
        return (y for y in self.universe if y not in used)

    def fresh(self, phi, t):
        self.grow()
        return self._universe[-1]


class DenseOrder(Structure):
    kind = "dense_order"
    homogeneous_truncation = False

    def __init__(self, size: int = 8):
        super().__init__()
        self._add(mpq(i) for i in range(size))

    def grow(self) -> None:
        u = self._universe
        mids = [(a + b) / 2 for a, b in zip(u, u[1:])]
        self._add(mids + [u[0] - 1, u[-1] + 1])

    def orbit_eq(self, u, v) -> bool:
        if len(u) != len(v):
            raise LengthMismatch((len(u), len(v)))
        for i in range(len(u)):
            for j in range(len(u)):
                if (u[i] < u[j]) != (v[i] < v[j]) or (u[i] == u[j]) != (v[i] == v[j]):
                    return False
        return True

    def _window(self, phi, t):
        lo = max((phi[x] for x in phi if x < t), default=None)
        hi = min((phi[x] for x in phi if x > t), default=None)
        return lo, hi

    def _existing(self, phi, t):
        lo, hi = self._window(phi, t)
        return (y for y in self.universe
                if (lo is None or y > lo) and (hi is None or y < hi))

    def fresh(self, phi, t):
        lo, hi = self._window(phi, t)
        inside = [y for y in self._universe
                  if (lo is None or y > lo) and (hi is None or y < hi)]
        if lo is None and hi is None:
            y = self._universe[-1] + 1
        elif lo is None:
            y = min([hi] + inside) - 1
        elif hi is None:
            y = max([lo] + inside) + 1
        else:
            y = (max([lo] + inside) + hi) / 2
        self._add([y])
        return y

    def relations(self, universe):
        return [("lt", {(x, y) for x in universe for y in universe if x < y})]

    def fmt(self, x) -> str:
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

    def parse(self, s: str):
        return mpq(s)


# -- vector spaces --------------------------------------------------------------


class VecFq(Structure):
    """The countable vector space over F_q (q prime).

    Vectors are ints whose base-q digits are the coordinates; e_i is q**(i-1).
    """

    kind = "vec_fq"

    def __init__(self, q: int = 2, dim: int = 3):
        super().__init__()
        if q < 2 or any(q % p == 0 for p in range(2, q)):
            raise ValueError("q must be prime")
        self.q = q
        self.dim = 0
        self.grow_to(dim)

    def describe(self) -> dict:
        return {"kind": self.kind, "q": self.q, "dim": self.dim}

    @property
    def universe(self) -> range:
        return range(self.q ** self.dim)

    def __contains__(self, x) -> bool:
        return isinstance(x, int) and 0 <= x < self.q ** self.dim

    def grow_to(self, dim: int) -> None:
        self.dim = max(self.dim, dim)

    def grow(self) -> None:
        self.grow_to(self.dim + 1)

    def basis(self, i: int) -> int:
        """e_i, 1-indexed."""
        return self.q ** (i - 1)

    # coordinates
    def digits(self, x: int, n: int | None = None) -> list[int]:
        q = self.q
        out = []
        while x:
            x, r = divmod(x, q)
            out.append(r)
        if n is not None:
            out.extend([0] * (n - len(out)))
        return out

    def undigits(self, ds: Sequence[int]) -> int:
        x = 0
        for c in reversed(ds):
            x = x * self.q + c
        return x

    def add(self, x: int, y: int) -> int:
        if self.q == 2:
            return x ^ y
        a, b = self.digits(x), self.digits(y)
        n = max(len(a), len(b))
        a += [0] * (n - len(a))
        b += [0] * (n - len(b))
        return self.undigits([(s + t) % self.q for s, t in zip(a, b)])

    def scale(self, c: int, x: int) -> int:
        c %= self.q
        if c == 0:
            return 0
        if c == 1:
            return x
        return self.undigits([(c * d) % self.q for d in self.digits(x)])

    def combo(self, coeffs: Sequence[int], vectors: Sequence[int]) -> int:
        out = 0
        for c, v in zip(coeffs, vectors):
            out = self.add(out, self.scale(c, v))
        return out

    def rank(self, vectors: Sequence[int]) -> int:
        return len(_Echelon(self.q, self._width(vectors)).extend(vectors))

    def _width(self, vectors) -> int:
        return max([self.dim] + [len(self.digits(v)) for v in vectors])

    def span(self, vectors: Iterable[int]) -> frozenset:
        vectors = list(vectors)
        basis = _Echelon(self.q, self._width(vectors)).extend(vectors)
        basis = [vectors[i] for i in basis]
        out = set()
        for coeffs in itertools.product(range(self.q), repeat=len(basis)):
            out.add(self.combo(coeffs, basis))
        return frozenset(out)

    def express(self, t: int, vectors: Sequence[int]) -> list[int] | None:
        """Coefficients writing ``t`` over ``vectors``, or None."""
        ech = _Echelon(self.q, self._width(list(vectors) + [t]))
        ech.extend(vectors)
        return ech.solve(t, len(vectors))

    def acl(self, A):
        return self.span(A)

    def orbit_eq(self, u, v) -> bool:
        if len(u) != len(v):
            raise LengthMismatch((len(u), len(v)))
        width = self._width(list(u) + list(v))
        joined = [self.undigits(self.digits(x, width) + self.digits(y, width))
                  for x, y in zip(u, v)]
        ru = self.rank(u)
        return ru == self.rank(v) == _Echelon(self.q, 2 * width).rank_of(joined)

    def _existing(self, phi, t):
        dom = list(phi)
        img = [phi[x] for x in dom]
        coeffs = self.express(t, dom)
        if coeffs is not None:
            yield self.combo(coeffs, img)
            return
        ech = _Echelon(self.q, self._width(img))
        ech.extend(img)
        for y in self.universe:
            if ech.solve(y, len(img)) is None:
                yield y

    def in_acl(self, A, z) -> bool:
        return self.express(z, list(A)) is not None

    def outside(self, A):
        A = list(A)
        inside = self.closure_test(A)
        for i in range(1, self.dim + 1):
            if not inside(self.basis(i)):
                return self.basis(i)
        self.grow()
        return self.basis(self.dim)

    def closure_test(self, A):
        A = list(A)
        width = self._width(A)
        ech = _Echelon(self.q, width)
        ech.extend(A)
        def test(z):
            if len(self.digits(z)) > width:
                return False
            return ech.solve(z, len(A)) is not None
        return test

    def indep(self, A, B, C) -> bool:
        A, B, C = list(A), list(B), list(C)
        ac, bc, c = self.rank(A + C), self.rank(B + C), self.rank(C)
        return ac + bc - self.rank(A + B + C) == c

    def fresh(self, phi, t):
        dom = list(phi)
        if self.express(t, dom) is not None:
            return None
        self.grow()
        return self.basis(self.dim)

    def relations(self, universe):
        uni = set(universe)
        out = [("sum", {(x, y, self.add(x, y)) for x in universe for y in universe
                        if self.add(x, y) in uni})]
        for c in range(2, self.q):
            out.append((f"mul{c}", {(x, self.scale(c, x)) for x in universe
                                    if self.scale(c, x) in uni}))
        return out

    def fmt(self, x: int) -> str:
        terms = []
        for i, c in enumerate(self.digits(x), start=1):
            if c == 1:
                terms.append(f"e{i}")
            elif c:
                terms.append(f"{c}e{i}")
        return "+".join(terms) or "0"

    def parse(self, s: str) -> int:
        s = s.strip()
        if s == "0":
            return 0
        out = 0
        for term in s.split("+"):
            term = term.strip()
            c, _, i = term.partition("e")
            out = self.add(out, self.scale(int(c) if c else 1, self.basis(int(i))))
        return out


class AffineFq(VecFq):
    """Affine space over F_q: same points as the vector space, automorphisms
    are the affine bijections, closure is the affine span."""

    kind = "affine_fq"

    def acl(self, A):
        A = list(A)
        if not A:
            return frozenset()
        base = A[0]
        diffs = [self.add(a, self.scale(-1, base)) for a in A[1:]]
        return frozenset(self.add(base, v) for v in self.span(diffs))

    def _differences(self, u):
        return [self.add(x, self.scale(-1, u[0])) for x in u[1:]]

    def orbit_eq(self, u, v) -> bool:
        if len(u) != len(v):
            raise LengthMismatch((len(u), len(v)))
        if not u:
            return True
        return VecFq.orbit_eq(self, self._differences(u), self._differences(v))

    def _existing(self, phi, t):
        return Structure._existing(self, phi, t)

    def in_acl(self, A, z) -> bool:
        return z in self.acl(A)

    def closure_test(self, A):
        return Structure.closure_test(self, A)

    def outside(self, A):
        return Structure.outside(self, A)

    def indep(self, A, B, C) -> bool:
        return Structure.indep(self, A, B, C)

    def fresh(self, phi, t):
        dom = list(phi)
        if dom and t in self.acl(dom):
            return None
        self.grow()
        if not dom:
            return self.basis(self.dim)
        return self.add(phi[dom[0]], self.basis(self.dim))

    def relations(self, universe):
        uni = set(universe)
        rel = set()
        for x, y, z in itertools.product(universe, repeat=3):
            w = self.add(self.add(x, self.scale(-1, y)), z)
            if w in uni:
                rel.add((x, y, z, w))
        return [("parallelogram", rel)]


class _Echelon:
    """Row echelon form over F_q that remembers how each row was built."""

    def __init__(self, q: int, width: int):
        self.q = q
        self.width = width
        self.rows: list[tuple[list[int], list[int], int]] = []  # row, combo, pivot

    def _digits(self, x: int) -> list[int]:
        out = []
        while x:
            x, r = divmod(x, self.q)
            out.append(r)
        return out + [0] * (self.width - len(out))

    def _reduce(self, vec: list[int], combo: list[int]):
        q = self.q
        for row, rcombo, piv in self.rows:
            c = vec[piv]
            if c:
                vec = [(a - c * b) % q for a, b in zip(vec, row)]
                combo = [(a - c * b) % q for a, b in zip(combo, rcombo)]
        return vec, combo

    def extend(self, vectors: Sequence[int]) -> list[int]:
        """Insert vectors in order; return indices of those that were new."""
        q = self.q
        n = len(vectors)
        picked = []
        for i, x in enumerate(vectors):
            combo = [0] * n
            combo[i] = 1
            vec, combo = self._reduce(self._digits(x), combo)
            piv = next((j for j, c in enumerate(vec) if c), None)
            if piv is None:
                continue
            inv = pow(vec[piv], q - 2, q)
            vec = [(a * inv) % q for a in vec]
            combo = [(a * inv) % q for a in combo]
            fixed = []
            for row, rcombo, p in self.rows:
                c = row[piv]
                if c:
                    row = [(a - c * b) % q for a, b in zip(row, vec)]
                    rcombo = [(a - c * b) % q for a, b in zip(rcombo, combo)]
                fixed.append((row, rcombo, p))
            self.rows = fixed + [(vec, combo, piv)]
            picked.append(i)
        return picked

    def rank_of(self, vectors: Sequence[int]) -> int:
        return len(self.extend(vectors))

    def solve(self, t: int, n: int) -> list[int] | None:
        vec, combo = self._reduce(self._digits(t), [0] * n)
        if any(vec):
            return None
        return [(-c) % self.q for c in combo]


# -- copies of complete graphs ----------------------------------------------------


class CopiesKn(Structure):
    """Countably many disjoint copies of K_n; element c*n + i is vertex i of
    copy c."""

    kind = "copies_kn"

    def __init__(self, n: int = 3, copies: int = 3):
        super().__init__()
        self.n = n
        self.copies = 0
        for _ in range(copies):
            self.grow()

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n, "copies": self.copies}

    def grow(self) -> None:
        c = self.copies
        self._add(range(c * self.n, (c + 1) * self.n))
        self.copies += 1

    def copy_of(self, x: int) -> int:
        return x // self.n

    def acl(self, A):
        out = set()
        for c in {self.copy_of(a) for a in A}:
            out.update(range(c * self.n, (c + 1) * self.n))
        return frozenset(out)

    def orbit_eq(self, u, v) -> bool:
        if not same_equality_pattern(u, v):
            return False
        return same_equality_pattern([self.copy_of(x) for x in u], [self.copy_of(y) for y in v])

    def _existing(self, phi, t):
        used = set(phi.values())
        mate = next((x for x in phi if self.copy_of(x) == self.copy_of(t)), None)
        if mate is not None:
            c = self.copy_of(phi[mate])
            for y in range(c * self.n, (c + 1) * self.n):
                if y not in used:
                    yield y
            return
        busy = {self.copy_of(y) for y in used}
        for y in self.universe:
            if self.copy_of(y) not in busy:
                yield y

    def fresh(self, phi, t):
        if any(self.copy_of(x) == self.copy_of(t) for x in phi):
            return None
        self.grow()
        return (self.copies - 1) * self.n

    def relations(self, universe):
        return [("edge", {(x, y) for x in universe for y in universe
                          if x != y and self.copy_of(x) == self.copy_of(y)})]


# -- generated graphs --------------------------------------------------------------


class _GraphBase(Structure):
    """Graphs grown by a fair staged schedule plus on-demand realisation.

    Stage L offers, for every subset B of the first L vertices with at most
    ``L.bit_length()`` elements and every U within B, a new vertex adjacent
    to exactly U among the existing vertices.
    """

    homogeneous_truncation = False

    def __init__(self, size: int = 8):
        super().__init__()
        self.adj: list[set] = []
        self._schedule = self._requests()
        self._served = 0
        self._new_vertex(set())
        while len(self.adj) < size:
            self.step()

    def _new_vertex(self, neighbours: set, **extra) -> int:
        v = len(self.adj)
        self.adj.append(set(neighbours))
        for u in neighbours:
            self.adj[u].add(v)
        self._members.add(v)
        self._universe.append(v)
        return v

    def _requests(self):
        stage = 1
        while True:
            cap = stage.bit_length()
            for size in range(1, min(cap, stage) + 1):
                for base in itertools.combinations(range(stage), size):
                    if base[-1] < stage - 1 and size <= (stage - 1).bit_length():
                        continue
                    for k in range(size + 1):
                        for U in itertools.combinations(base, k):
                            yield base, U
            stage += 1

    def clone(self) -> "_GraphBase":
        twin = copy.copy(self)
        twin.__dict__.update(copy.deepcopy(
            {k: v for k, v in self.__dict__.items() if k != "_schedule"}))
        twin._schedule = twin._requests()
        for _ in range(self._served):
            next(twin._schedule)
        return twin

    def _next_request(self):
        self._served += 1
        return next(self._schedule)

    def step(self):
        base, U = self._next_request()
        if base[-1] >= len(self.adj) or not self._request_ok(base, U):
            return None
        return self._realize_request(base, U)

    def _request_ok(self, base, U) -> bool:
        return True

    def _realize_request(self, base, U):
        return self._new_vertex(set(U))

    def grow(self) -> None:
        n = len(self.adj)
        while len(self.adj) == n:
            self.step()

    def complete_stage(self, stage: int) -> None:
        """Serve every request whose base lies in the first ``stage`` vertices
        and is small enough to be offered by then."""
        total = 0
        for req in self._requests():
            if req[0][-1] >= stage:
                break
            total += 1
        while self._served < total:
            self.step()

    def edge(self, x, y) -> bool:
        return y in self.adj[x]

    def orbit_eq(self, u, v) -> bool:
        if not same_equality_pattern(u, v):
            return False
        n = len(u)
        for i in range(n):
            for j in range(i + 1, n):
                if self.edge(u[i], u[j]) != self.edge(v[i], v[j]):
                    return False
        return True

    def relations(self, universe):
        return [("edge", {(x, y) for x in universe for y in universe if self.edge(x, y)})]


class RandomGraph(_GraphBase):
    kind = "random_graph"

    def fresh(self, phi, t):
        return self._new_vertex({phi[x] for x in phi if self.edge(t, x)})

    def fresh_joint(self, constraints):
        wanted, unwanted = set(), set()
        for phi, t in constraints:
            for x, y in phi.items():
                (wanted if self.edge(t, x) else unwanted).add(y)
        if wanted & unwanted:
            return None
        return self._new_vertex(wanted)


class RandomBipartite(_GraphBase):
    """Random bipartite graph with named sides (side 0 is "left")."""

    kind = "random_bipartite"

    def __init__(self, size: int = 8):
        self.side: list[int] = []
        super().__init__(size)

    def _new_vertex(self, neighbours, side=0):
        self.side.append(side)
        return super()._new_vertex(neighbours)

    def _requests(self):
        for base, U in super()._requests():
            yield base, U, 0
            yield base, U, 1

    def step(self):
        base, U, side = self._next_request()
        if base[-1] >= len(self.adj):
            return None
        if any(self.side[u] == side for u in U):
            return None
        return self._new_vertex(set(U), side=side)

    def orbit_eq(self, u, v) -> bool:
        if [self.side[x] for x in u] != [self.side[y] for y in v]:
            return False
        return super().orbit_eq(u, v)

    def fresh(self, phi, t):
        side = self.side[t]
        return self._new_vertex({phi[x] for x in phi if self.edge(t, x)}, side=side)

    def fresh_joint(self, constraints):
        wanted, unwanted = set(), set()
        sides = {self.side[t] for _, t in constraints}
        if len(sides) != 1:
            return None
        for phi, t in constraints:
            for x, y in phi.items():
                (wanted if self.edge(t, x) else unwanted).add(y)
        if wanted & unwanted:
            return None
        return self._new_vertex(wanted, side=sides.pop())

    def relations(self, universe):
        rels = super().relations(universe)
        rels.append(("left", {(x,) for x in universe if self.side[x] == 0}))
        return rels


KINDS = {
    "pure_set": PureSet,
    "dense_order": DenseOrder,
    "vec_fq": VecFq,
    "affine_fq": AffineFq,
    "copies_kn": CopiesKn,
    "random_graph": RandomGraph,
    "random_bipartite": RandomBipartite,
}


def make_structure(kind: str, **params) -> Structure:
    try:
        cls = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown structure kind {kind!r}") from None
    return cls(**params)


# -- partial automorphisms ----------------------------------------------------------


class PartialAut:
    """A finite partial automorphism, extended on demand.

    Forward extension takes the lowest candidate image, or a random one when
    an rng is attached.  Backward extension does the same for the inverse.
    """

    def __init__(self, S: Structure, mapping: Mapping | None = None,
                 rng: random.Random | None = None, fresh_bias: float = 0.0):
        self.S = S
        self.fwd: dict = dict(mapping or {})
        self.bwd: dict = {y: x for x, y in self.fwd.items()}
        self.rng = rng
        self.fresh_bias = fresh_bias
        if len(self.bwd) != len(self.fwd) or not S.is_partial_iso(self.fwd):
            raise PreconditionFailed("not a partial isomorphism")

    def copy(self) -> "PartialAut":
        return PartialAut(self.S, self.fwd, self.rng, self.fresh_bias)

    def _choose(self, phi: dict, t):
        if self.rng is None:
            return next(self.S.candidates(phi, t))
        pool = self.S.existing_candidates(phi, t)
        if len(pool) == 1 and self.S.fresh_is_forced(phi, t):
            return pool[0]
        if not pool or self.rng.random() < self.fresh_bias:
            y = self.S.fresh(phi, t)
            if y is not None:
                return y
        return self.rng.choice(pool)

    def __call__(self, x):
        y = self.fwd.get(x)
        if y is None:
            y = self._choose(self.fwd, x)
            self.fwd[x] = y
            self.bwd[y] = x
        return y

    def preimage(self, y):
        x = self.bwd.get(y)
        if x is None:
            x = self._choose(self.bwd, y)
            self.bwd[y] = x
            self.fwd[x] = y
        return x

    def apply(self, xs: Iterable) -> tuple:
        return tuple(self(x) for x in xs)

    def apply_set(self, xs: Iterable) -> frozenset:
        return frozenset(self(x) for x in xs)

    def inverse(self) -> "PartialAut":
        return PartialAut(self.S, self.bwd, self.rng, self.fresh_bias)

    def can_avoid(self, x, bad: Callable[[object], bool]) -> bool:
        """Whether some extension sends ``x`` outside ``bad``."""
        if x in self.fwd:
            return not bad(self.fwd[x])
        if not self.S.fresh_is_forced(self.fwd, x):
            return True
        return not bad(next(self.S.candidates(self.fwd, x)))

    def extend_avoiding(self, x, bad: Callable[[object], bool], cap: int = 64):
        """Define the image of ``x`` outside ``bad`` when possible: existing
        candidates are tried first (at most ``cap``), then a fresh one."""
        if x in self.fwd:
            return self.fwd[x]
        S = self.S
        y = None
        if S.fresh_is_forced(self.fwd, x):
            y = next(S.candidates(self.fwd, x))
        else:
            for k, c in enumerate(S._existing(self.fwd, x)):
                if k >= cap:
                    break
                if not bad(c):
                    y = c
                    break
            if y is None:
                y = S.fresh(self.fwd, x)
        self.fwd[x] = y
        self.bwd[y] = x
        return y

    def fixes(self, A: Iterable) -> bool:
        return all(self(a) == a for a in A)

    def __mul__(self, other) -> "Product":
        return Product([self, other])

    def to_json(self) -> list:
        fmt = self.S.fmt
        return [[fmt(x), fmt(y)] for x, y in sorted(self.fwd.items(), key=lambda p: self.S.key(p[0]))]


class Product:
    """Composition of group elements, rightmost applied first."""

    def __init__(self, factors: Sequence):
        self.factors = []
        for f in factors:
            self.factors.extend(f.factors if isinstance(f, Product) else [f])

    def __call__(self, x):
        for f in reversed(self.factors):
            x = f(x)
        return x

    def preimage(self, y):
        for f in self.factors:
            y = f.preimage(y)
        return y

    def apply(self, xs: Iterable) -> tuple:
        return tuple(self(x) for x in xs)

    def inverse(self) -> "Product":
        return Product([_Inverse(f) for f in reversed(self.factors)])

    def __mul__(self, other) -> "Product":
        return Product([self, other])


class _Inverse:
    def __init__(self, g):
        self.g = g

    def __call__(self, x):
        return self.g.preimage(x)

    def preimage(self, y):
        return self.g(y)


class Identity:
    """The identity element."""

    def __call__(self, x):
        return x

    def preimage(self, y):
        return y

    def apply(self, xs: Iterable) -> tuple:
        return tuple(xs)

    def __mul__(self, other) -> Product:
        return Product([self, other])


class TableMap:
    """A bijection of a finite block of the universe, the identity elsewhere.

    Only valid as an automorphism when the block is a union of orbits of the
    rest of the structure's relations (e.g. whole copies of K_n)."""

    def __init__(self, table: Mapping):
        self.table = dict(table)
        self.back = {y: x for x, y in self.table.items()}

    def __call__(self, x):
        return self.table.get(x, x)

    def preimage(self, y):
        return self.back.get(y, y)

    def apply(self, xs: Iterable) -> tuple:
        return tuple(self(x) for x in xs)


class LinearMap:
    """Invertible linear map of F_q^k acting on the first k coordinates of a
    vector space, the identity on the remaining basis vectors."""

    def __init__(self, S: "VecFq", columns: Sequence[int]):
        self.S = S
        self.k = len(columns)
        self.columns = list(columns)
        if S.rank(self.columns) != self.k or any(len(S.digits(c)) > self.k for c in columns):
            raise PreconditionFailed("columns must form a basis of the first coordinates")
        self._span = S.q ** self.k
        self._low = [S.combo(S.digits(x, self.k), self.columns) for x in range(self._span)]
        self._back = {y: x for x, y in enumerate(self._low)}

    def __call__(self, x):
        high, low = divmod(x, self._span)
        return high * self._span + self._low[low]

    def preimage(self, y):
        high, low = divmod(y, self._span)
        return high * self._span + self._back[low]

    def apply(self, xs: Iterable) -> tuple:
        return tuple(self(x) for x in xs)

    def to_json(self) -> list:
        return [self.S.fmt(c) for c in self.columns]


class Scalar:
    """Multiplication by a nonzero scalar on a vector space."""

    def __init__(self, S: "VecFq", c: int):
        if c % S.q == 0:
            raise PreconditionFailed("scalar must be nonzero")
        self.S = S
        self.c = c % S.q
        self.inv = pow(self.c, -1, S.q)

    def __call__(self, x):
        return self.S.scale(self.c, x)

    def preimage(self, y):
        return self.S.scale(self.inv, y)

    def apply(self, xs: Iterable) -> tuple:
        return tuple(self(x) for x in xs)

    def to_json(self) -> dict:
        return {"scalar": self.c}


class CopyPermutation:
    """The same permutation of {0..n-1} applied inside every copy of K_n."""

    def __init__(self, S: "CopiesKn", sigma: Sequence[int]):
        if sorted(sigma) != list(range(S.n)):
            raise PreconditionFailed("sigma must permute range(n)")
        self.S = S
        self.sigma = list(sigma)
        self.inv = [0] * S.n
        for i, j in enumerate(sigma):
            self.inv[j] = i

    def __call__(self, x):
        c, i = divmod(x, self.S.n)
        return c * self.S.n + self.sigma[i]

    def preimage(self, y):
        c, i = divmod(y, self.S.n)
        return c * self.S.n + self.inv[i]

    def apply(self, xs: Iterable) -> tuple:
        return tuple(self(x) for x in xs)

    def to_json(self) -> dict:
        return {"sigma": self.sigma}


def compose(*factors) -> Product:
    return Product(factors)


def random_element(S: Structure, fixed: Iterable = (), rng: random.Random | None = None,
                   fresh_bias: float = 0.25) -> PartialAut:
    """A random group element fixing ``fixed`` pointwise, chosen lazily."""
    return PartialAut(S, {x: x for x in fixed}, rng=rng or random.Random(0),
                      fresh_bias=fresh_bias)


def extend_automorphism(S: Structure, phi: Mapping, target, budget: int = 10_000) -> dict:
    """``phi`` plus an image for ``target``: the target itself when that is
    consistent, otherwise the first candidate."""
    if target in phi:
        return dict(phi)
    if target not in phi.values() and S.is_partial_iso({**phi, target: target}):
        return {**phi, target: target}
    for n, y in enumerate(S.candidates(dict(phi), target)):
        if n >= budget:
            break
        out = dict(phi)
        out[target] = y
        return out
    raise BudgetExceeded(f"no image for {target!r}")


def acl(S: Structure, A: Iterable) -> frozenset:
    return S.acl(A)


def orbit_eq(S: Structure, u: Sequence, v: Sequence) -> bool:
    return S.orbit_eq(u, v)


def sim_class(S: Structure, a) -> frozenset:
    """acl(a) intersected with the orbit of a."""
    return frozenset(b for b in S.acl([a]) if S.orbit_eq([a], [b]))


def neumann_witness(S: Structure, C: Iterable, D: Iterable, B: Iterable,
                    budget: int = 10_000) -> PartialAut:
    """g fixing C with g(D) meeting B only in C & D & B.

    Depth-first over candidate images (lowest first, fresh last); every
    candidate image outside B keeps the search alive, and fresh images
    always succeed, so the budget only bounds pathological inputs.
    """
    C = frozenset(C)
    D = list(dict.fromkeys(sorted(D, key=S.key)))
    B = frozenset(B)
    if S.acl(C) != C:
        raise PreconditionFailed("C must be algebraically closed")
    start = {c: c for c in sorted(C, key=S.key)}
    todo = [d for d in D if d not in C]
    target = C & frozenset(D) & B
    nodes = 0

    def search(phi: dict, i: int):
        nonlocal nodes
        if i == len(todo):
            return phi
        d = todo[i]
        for y in S.candidates(phi, d):
            nodes += 1
            if nodes > budget:
                raise BudgetExceeded("neumann search")
            if y in B and y not in target:
                continue
            nxt = dict(phi)
            nxt[d] = y
            found = search(nxt, i + 1)
            if found is not None:
                return found
        return None

    phi = search(start, 0)
    if phi is None:
        raise BudgetExceeded("neumann search exhausted")
    g = PartialAut(S, phi)
    assert frozenset(g(d) for d in D) & B == target
    return g


# -- pairs of embeddings ---------------------------------------------------------------


@dataclass
class EmbeddingPair:
    alpha: dict
    beta: dict
    witness: dict = field(default_factory=dict)


def agreeing_pair(S: Structure, X: Callable[[object], bool], a, depth: int) -> EmbeddingPair:
    """Prefix embeddings agreeing on X-elements and differing at ``a``.

    The prefix is ``a`` followed by the first ``depth - 1`` other elements of
    the universe; both maps are identity-like on X and beta moves ``a`` to a
    fresh realisation of its type over the X-part of the prefix.
    """
    prefix = [a] + [x for x in S.universe if x != a][:max(depth - 1, 0)]
    xs = [x for x in S.universe if X(x)]
    if X(a) or a in S.acl(xs):
        raise PreconditionFailed("a is algebraic over X")
    fixed = {x: x for x in xs}
    moved = next(y for y in S.candidates(fixed, a) if y != a)
    beta = PartialAut(S, {**fixed, a: moved})
    alpha = {x: x for x in prefix}
    for x in prefix:
        beta(x)
    return EmbeddingPair(alpha, {x: beta(x) for x in prefix}, {"a": a, "beta_a": moved})


def image_disjoint_pair(S: Structure, X: Iterable, depth: int) -> EmbeddingPair:
    """alpha = identity and beta fixing X whose explored images meet only in X."""
    X = frozenset(X)
    if S.acl(X) != X:
        raise PreconditionFailed("X must be algebraically closed")
    prefix = S.universe[:depth]
    g = neumann_witness(S, X, prefix, prefix)
    alpha = {x: x for x in prefix}
    beta = {x: g(x) for x in prefix}
    return EmbeddingPair(alpha, beta)


# -- brute-force orbits ------------------------------------------------------------------


class _Relations:
    """Finite relational structure with lookup tables for propagation."""

    def __init__(self, universe: Sequence, relations: Sequence[tuple[str, set]]):
        self.universe = list(universe)
        self.rels = [frozenset(r) for _, r in relations]
        self.touching: dict = {x: [] for x in self.universe}
        self.allowed: list[dict] = []
        for k, rel in enumerate(self.rels):
            table: dict = {}
            for tup in rel:
                for pos, x in enumerate(tup):
                    if x in self.touching and (k, tup) not in self.touching[x]:
                        self.touching[x].append((k, tup))
                    key = (pos, tup[:pos] + tup[pos + 1:])
                    table.setdefault(key, set()).add(x)
            self.allowed.append(table)


def extends_to_automorphism(R: _Relations, partial: Mapping, budget: int = 100_000) -> dict | None:
    """Search for an automorphism of the finite structure extending
    ``partial``; forward checking plus minimum-remaining-values order."""
    uni = R.universe
    if len(set(partial.values())) != len(partial):
        return None
    domains = {x: ({partial[x]} if x in partial else set(uni)) for x in uni}
    nodes = 0

    def consistent(f: dict, x) -> bool:
        for k, tup in R.touching[x]:
            if all(t in f for t in tup):
                if tuple(f[t] for t in tup) not in R.rels[k]:
                    return False
        return True

    def prune(f: dict, doms: dict, x) -> dict | None:
        doms = dict(doms)
        for k, tup in R.touching[x]:
            free = [i for i, t in enumerate(tup) if t not in f]
            if len(free) != 1:
                continue
            i = free[0]
            others = tuple(f[t] for j, t in enumerate(tup) if j != i)
            ok = R.allowed[k].get((i, others), set())
            v = tup[i]
            narrowed = doms[v] & ok
            if not narrowed:
                return None
            doms[v] = narrowed
        return doms

    def search(f: dict, used: set, doms: dict):
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded("automorphism search")
        free = [x for x in uni if x not in f]
        if not free:
            return dict(f)
        x = min(free, key=lambda v: len(doms[v] - used))
        for y in sorted(doms[x] - used, key=lambda v: uni.index(v)):
            f[x] = y
            if consistent(f, x) and _reverse_ok(R, f, x):
                nd = prune(f, doms, x)
                if nd is not None:
                    used.add(y)
                    found = search(f, used, nd)
                    used.discard(y)
                    if found is not None:
                        return found
            del f[x]
        return None

    f: dict = {}
    doms = domains
    for x in uni:
        if x in partial:
            f[x] = partial[x]
            if not consistent(f, x):
                return None
    for x in partial:
        doms = prune(f, doms, x)
        if doms is None:
            return None
    return search(f, set(f.values()), doms)


def _reverse_ok(R: _Relations, f: dict, x) -> bool:
    # image tuples through f(x) must come from tuples in the relation
    inv = {y: w for w, y in f.items()}
    y = f[x]
    for k, tup in R.touching.get(y, []):
        if all(t in inv for t in tup) and tuple(inv[t] for t in tup) not in R.rels[k]:
            return False
    return True


def brute_force_acl(S: Structure, A: Iterable, T1: Sequence, T2: Sequence,
                    relations: _Relations | None = None) -> frozenset:
    """Points of T1 whose orbit over A (computed inside T2) stays in T1.

    When finite truncations of S are homogeneous the orbit is read off
    automorphisms of T2 found by exhaustive search; otherwise quantifier-free
    types over A are compared, which is how orbits look in a homogeneous
    structure.
    """
    A = list(dict.fromkeys(A))
    outside = [y for y in T2 if y not in set(T1)]
    if S.homogeneous_truncation and relations is None:
        relations = _Relations(T2, S.relations(T2))
    out = set()
    for x in T1:
        if x in A:
            out.add(x)
            continue
        base = {a: a for a in A}
        if S.homogeneous_truncation:
            moved = any(extends_to_automorphism(relations, {**base, x: y}) is not None
                        for y in outside)
        else:
            moved = any(S.orbit_eq(A + [x], A + [y]) for y in outside)
        if not moved:
            out.add(x)
    return frozenset(out)
