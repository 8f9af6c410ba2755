"""Products of pointwise stabilisers along chains of finite sets.

For a chain C = (c_0, ..., c_k) the set N_C = N_{c_0} ... N_{c_k} is never
built.  Instead an element s is in N_C exactly when some chain
c'_0 = c_0, ..., c'_k = s(c_k) has every link c'_i c'_{i+1} in the orbit of
c_i c_{i+1}; the routines here search for such witness chains and replay the
constructive arguments that move between chains.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .oligo import (
    BudgetExceeded,
    Identity,
    OligoError,
    PartialAut,
    PreconditionFailed,
    Product,
    Structure,
    neumann_witness,
    random_element,
)
from .report import INCONCLUSIVE, OK, VIOLATION, Check, tally
from .rng import SplitMix64, derive_seed


class DomainMismatch(OligoError):
    pass


class NotAclClosed(OligoError):
    pass


@dataclass
class Chain:
    tuples: list
    acl_closed: bool = False

    def __post_init__(self):
        self.tuples = [tuple(c) for c in self.tuples]

    @property
    def length(self) -> int:
        return len(self.tuples) - 1

    def __getitem__(self, i):
        return self.tuples[i]

    def __len__(self) -> int:
        return len(self.tuples)

    def check(self, S: Structure) -> None:
        if self.acl_closed:
            for i, c in enumerate(self.tuples):
                if S.acl(c) != frozenset(c):
                    raise NotAclClosed(f"term {i} is not algebraically closed")

    def sub(self, indices: Iterable[int]) -> "Chain":
        return Chain([self.tuples[i] for i in indices], self.acl_closed)

    def to_json(self, S: Structure) -> dict:
        return {"tuples": [[S.fmt(x) for x in c] for c in self.tuples],
                "acl_closed": self.acl_closed}

    @classmethod
    def from_json(cls, S: Structure, obj: Mapping) -> "Chain":
        tuples = [tuple(S.parse(x) if isinstance(x, str) else x for x in c)
                  for c in obj["tuples"]]
        return cls(tuples, bool(obj.get("acl_closed", False)))


def closed_tuple(S: Structure, A: Iterable) -> tuple:
    """acl(A) as a tuple in universe order."""
    return tuple(sorted(S.acl(A), key=S.key))


def links_match(S: Structure, C: Chain, D: Chain, A: Sequence = ()) -> bool:
    """c_i c_{i+1} and d_i d_{i+1} lie in the same orbit over A, for all i."""
    if len(C) != len(D):
        return False
    A = tuple(A)
    return all(S.orbit_eq(A + C[i] + C[i + 1], A + D[i] + D[i + 1])
               for i in range(C.length))


# -- joint realisation ----------------------------------------------------------------


def search_joint(S: Structure, src: Sequence, constraints: Sequence[tuple],
                 budget: int = 10_000, accept: Callable[[tuple], bool] | None = None,
                 extra_fresh: int = 0):
    """A tuple y with base_j + src and image_j + y in the same orbit for every
    constraint (base_j, image_j), or None when the search tree is exhausted.

    A constraint may carry its own source as a third entry, replacing ``src``
    for that constraint.  ``accept`` prunes partial images.  Candidates for
    each coordinate come from the first constraint (existing elements, then a
    fresh one) and must pass the others; jointly fresh elements are tried
    last, ``extra_fresh`` more times for predicates that fresh elements only
    sometimes meet.
    """
    return next(_all_joint(S, src, constraints, budget, [0], accept, extra_fresh), None)


def _all_joint(S: Structure, src, constraints, budget: int, counter: list,
               accept: Callable[[tuple], bool] | None = None, extra_fresh: int = 0):
    """Every solution of the joint search, lazily (shared node counter)."""
    src = tuple(src)
    maps, sources = [], []
    for con in constraints:
        base, image = tuple(con[0]), tuple(con[1])
        own = tuple(con[2]) if len(con) > 2 else src
        if len(base) != len(image) or len(own) != len(src):
            raise PreconditionFailed("constraint sides differ in length")
        phi = {}
        for x, y in zip(base, image):
            if phi.setdefault(x, y) != y:
                return
        if len(set(phi.values())) != len(phi) or not S.is_partial_iso(phi):
            return
        maps.append(phi)
        sources.append(own)
    if not maps:
        maps, sources = [{}], [src]

    def ok(phis, i, y) -> bool:
        for phi, own in zip(phis, sources):
            t = own[i]
            if t in phi:
                if phi[t] != y:
                    return False
                continue
            if y in phi.values():
                return False
            dom = list(phi)
            if not S.orbit_eq(dom + [t], [phi[x] for x in dom] + [y]):
                return False
        return True

    def pool(phis, i):
        yield from S.candidates(phis[0], sources[0][i])
        for _ in range(1 + extra_fresh):
            yield S.fresh_joint([(p, own[i]) for p, own in zip(phis, sources)])

    def go(i, phis, out):
        if i == len(src):
            yield tuple(out)
            return
        tried = set()
        for y in pool(phis, i):
            if y is None or y in tried:
                continue
            tried.add(y)
            counter[0] += 1
            if counter[0] > budget:
                raise BudgetExceeded("joint search")
            if not ok(phis, i, y):
                continue
            if accept is not None and not accept(tuple(out) + (y,)):
                continue
            nxt = [dict(p) for p in phis]
            for p, own in zip(nxt, sources):
                p[own[i]] = y
            yield from go(i + 1, nxt, out + [y])

    yield from go(0, maps, [])


# -- membership ----------------------------------------------------------------------


@dataclass
class ChainMembership:
    status: str  # "found", "none" or "inconclusive"
    chain: Chain | None = None

    def __bool__(self) -> bool:
        return self.status == "found"


def _as_element(g, needed: Sequence):
    if isinstance(g, Mapping):
        missing = [x for x in needed if x not in g]
        if missing:
            raise DomainMismatch(f"map is undefined on {missing}")
        table = dict(g)
        return table.__getitem__
    return g


def chain_membership_witness(S: Structure, C: Chain, g, budget: int = 10_000) -> ChainMembership:
    """Look for a witness chain showing g in N_C.

    Lengths 0 and 1 are decided exactly.  Longer chains are searched
    depth-first, one intermediate term at a time; since fresh elements keep
    the space open, running out of options is reported as inconclusive.
    """
    k = C.length
    g = _as_element(g, C[k])
    target = tuple(g(x) for x in C[k])
    if k == 0:
        ok = target == C[0]
        return ChainMembership("found" if ok else "none", Chain([C[0]], C.acl_closed) if ok else None)
    if k == 1:
        ok = S.orbit_eq(C[0] + C[1], C[0] + target)
        return ChainMembership("found" if ok else "none",
                               Chain([C[0], target], C.acl_closed) if ok else None)
    counter = [0]

    def go(i: int, prev: tuple, acc: list):
        # choose c'_i given c'_{i-1}; the last intermediate also meets the target
        if i == k:
            return acc
        constraints = [(C[i - 1], prev)]
        if i == k - 1:
            constraints.append((C[k], target))
        for y in _all_joint(S, C[i], constraints, budget, counter):
            found = go(i + 1, y, acc + [y])
            if found is not None:
                return found
        return None

    try:
        mids = go(1, C[0], [])
    except BudgetExceeded:
        return ChainMembership("inconclusive")
    if mids is None:
        return ChainMembership("inconclusive")
    witness = Chain([C[0]] + mids + [target], C.acl_closed)
    assert links_match(S, C, witness)
    return ChainMembership("found", witness)


def stabiliser_product(S: Structure, C: Chain, rng: random.Random,
                       fresh_bias: float = 0.25) -> Product:
    """A random element of N_C: g_0 g_1 ... g_k with g_i fixing c_i."""
    return Product([random_element(S, c, rng, fresh_bias) for c in C.tuples])


# -- rewriting chains ----------------------------------------------------------------


def change_chain(S: Structure, C: Chain, D: Chain, A: Sequence = (), budget: int = 10_000):
    """g fixing A with g N_C = N_D and g(c_0) = d_0, for chains that share
    their last term and agree linkwise over A.

    Built by the induction on length: h handles the tail, then h' fixes
    A and c_1 and sends c_0 to h^-1(d_0); the answer is h h'.
    """
    A = tuple(A)
    if len(C) != len(D) or C[C.length] != D[D.length]:
        raise PreconditionFailed("chains must share their last term")
    if not links_match(S, C, D, A):
        raise PreconditionFailed("links are not in the same orbit over A")
    g = _change(S, C.tuples, D.tuples, A)
    if g.apply(C[0]) != D[0] or any(g(a) != a for a in A):
        raise AssertionError("change_chain produced a wrong element")
    for i in range(C.length):
        if not S.orbit_eq(g.apply(C[i]) + g.apply(C[i + 1]), D[i] + D[i + 1]):
            raise AssertionError("change_chain output fails a link")
    return g


def _change(S: Structure, cs: list, ds: list, A: tuple):
    if len(cs) == 1:
        return PartialAut(S, {x: x for x in A + cs[0]})
    h = _change(S, cs[1:], ds[1:], A)
    pulled = tuple(h.preimage(x) for x in ds[0])
    fixed = {x: x for x in A + cs[1]}
    mapping = dict(fixed)
    for x, y in zip(cs[0], pulled):
        if mapping.setdefault(x, y) != y:
            raise PreconditionFailed("inconsistent first link")
    h2 = PartialAut(S, mapping)
    return Product([h, h2])


def intersect_chains(S: Structure, A: Iterable, C: Iterable, D: Iterable,
                     budget: int = 10_000) -> tuple[frozenset, PartialAut]:
    """E = g(D) for g fixing C with E & A = C & D & A."""
    A, C, D = frozenset(A), frozenset(C), frozenset(D)
    for name, X in (("A", A), ("C", C), ("D", D)):
        if S.acl(X) != X:
            raise NotAclClosed(name)
    g = neumann_witness(S, C, D, A, budget)
    E = frozenset(g(x) for x in D)
    if E & A != C & D & A or not all(g(c) == c for c in C):
        raise AssertionError("intersect_chains output fails its identities")
    return E, g


@dataclass
class SkipResult:
    chain: Chain
    g: object
    rewritten: Chain
    spot_checks: dict = field(default_factory=dict)


def skip_terms(S: Structure, C: Chain, A: Sequence | None = None,
               delta: Callable[[object], bool] | None = None,
               budget: int = 10_000, samples: int = 0, seed: int = 0) -> SkipResult:
    """Halve a chain of even length.

    Case I (``A`` given): triple intersections c_2i & c_2i+1 & c_2i+2 equal A
    and the result has consecutive intersections A.  Case II (``delta``
    given): intersections c_2i & c_2i+1 lie in the invariant set delta, and
    so do those of the result.  Returns D = even terms of a rewritten chain C'
    and g with N_D inside g N_C.
    """
    if (A is None) == (delta is None):
        raise PreconditionFailed("give exactly one of A or delta")
    if C.length % 2:
        raise PreconditionFailed("chain length must be even")
    C.check(S)
    k = C.length // 2
    if A is not None:
        A = tuple(A)
        Aset = frozenset(A)
        for i in range(k):
            if frozenset(C[2 * i]) & frozenset(C[2 * i + 1]) & frozenset(C[2 * i + 2]) != Aset:
                raise PreconditionFailed(f"triple intersection at {2 * i} is not A")
        over = A
    else:
        for i in range(k):
            if not all(delta(x) for x in frozenset(C[2 * i]) & frozenset(C[2 * i + 1])):
                raise PreconditionFailed(f"intersection at {2 * i} leaves delta")
        over = ()
    new = [None] * (2 * k + 1)
    new[2 * k] = C[2 * k]
    for l in range(k, 0, -1):
        odd = search_joint(S, C[2 * l - 1], [(over + C[2 * l], over + new[2 * l])], budget)
        if odd is None:
            raise BudgetExceeded(f"no copy of term {2 * l - 1}")
        new[2 * l - 1] = odd
        pre = search_joint(S, C[2 * l - 2],
                           [(over + C[2 * l - 1] + C[2 * l], over + odd + new[2 * l])], budget)
        if pre is None:
            raise BudgetExceeded(f"no copy of term {2 * l - 2}")
        n = neumann_witness(S, frozenset(odd), pre, frozenset(new[2 * l]), budget)
        new[2 * l - 2] = n.apply(pre)
    rewritten = Chain(new, C.acl_closed)
    g = change_chain(S, C, rewritten, over, budget)
    D = rewritten.sub(range(0, 2 * k + 1, 2))
    for i in range(k):
        meet = frozenset(D[i]) & frozenset(D[i + 1])
        if A is not None and meet != Aset:
            raise AssertionError("skip_terms: intersections differ from A")
        if delta is not None and not all(delta(x) for x in meet):
            raise AssertionError("skip_terms: intersections leave delta")
    checks = _spot_check(S, C, D, g, samples, seed, budget) if samples else {}
    return SkipResult(D, g, rewritten, checks)


def _spot_check(S: Structure, C: Chain, D: Chain, g, samples: int, seed: int,
                budget: int) -> dict:
    # s in N_D should give g^-1 s in N_C
    found = inconclusive = missing = 0
    for i in range(samples):
        rng = SplitMix64(derive_seed(seed, "skip", i))
        s = stabiliser_product(S, D, rng)
        res = chain_membership_witness(S, C, Product([g.inverse(), s]), budget)
        if res.status == "found":
            found += 1
        elif res.status == "none":
            missing += 1
        else:
            inconclusive += 1
    return {"found": found, "none": missing, "inconclusive": inconclusive}


def independent_chain_from(S: Structure, C: Chain, A: Sequence, rel, budget: int = 10_000) -> Chain:
    """A chain with the same last term, the same links over A, and
    c'_i independent from c'_{i+2} ... c'_k over c'_{i+1} for every i.

    Built backwards: copy c_i next to c'_{i+1}, then move the copy by a
    Neumann witness over c'_{i+1} so that its closure with c'_{i+1} meets the
    closure of the later terms only in c'_{i+1}.
    """
    A = tuple(A)
    k = C.length
    C.check(S)
    if k <= 1:
        return Chain(list(C.tuples), C.acl_closed)
    new = [None] * (k + 1)
    new[k] = C[k]
    new[k - 1] = C[k - 1]
    for i in range(k - 2, -1, -1):
        copy = search_joint(S, C[i], [(A + C[i + 1], A + new[i + 1])], budget)
        if copy is None:
            raise BudgetExceeded(f"no copy of term {i}")
        mid = frozenset(new[i + 1])
        later = [x for c in new[i + 2:] for x in c]
        D = S.acl(list(copy) + list(mid))
        B = S.acl(later + list(mid))
        n = neumann_witness(S, mid, D, B, budget)
        new[i] = n.apply(copy)
    out = Chain(new, C.acl_closed)
    if not links_match(S, C, out, A):
        raise AssertionError("independent chain lost a link")
    if not is_independent_chain(S, out, rel):
        raise AssertionError("independent chain fails the relation")
    return out


def is_independent_chain(S: Structure, C: Chain, rel) -> bool:
    """c_0 ... c_{i-1} independent from c_{i+1} ... c_k over c_i, 0 < i < k."""
    k = C.length
    for i in range(1, k):
        before = [x for c in C.tuples[:i] for x in c]
        after = [x for c in C.tuples[i + 1:] for x in c]
        if not rel(before, after, C[i]):
            return False
    return True


def chain_over(C: Chain) -> frozenset | None:
    """The common consecutive intersection, or None if they differ."""
    meets = {frozenset(C[i]) & frozenset(C[i + 1]) for i in range(C.length)}
    return meets.pop() if len(meets) == 1 else None


def reachability_check(S: Structure, A: Iterable, C: Chain, samples: int,
                       budget: int = 10_000, seed: int = 0) -> Check:
    """Sampled elements of G_A should all lie in N_C, and sampled elements
    of N_C should fix A."""
    A = tuple(sorted(frozenset(A), key=S.key))
    if C.length and chain_over(C) != frozenset(A):
        raise PreconditionFailed("consecutive intersections must all equal A")
    C.check(S)
    params = {"A": [S.fmt(a) for a in A], "chain": C.to_json(S), "samples": samples,
              "budget": budget, "seed": seed}
    stats = {"found": 0, "none": 0, "inconclusive": 0, "converse_ok": 0, "converse_bad": 0}
    witness = None
    for i in range(samples):
        T = S.clone()
        rng = SplitMix64(derive_seed(seed, "reach", i))
        g = random_element(T, A, rng)
        res = chain_membership_witness(T, C, g, budget)
        stats[res.status] += 1
        if res.status == "none" and witness is None:
            witness = {"sample": i, "g": g.to_json()}
        s = stabiliser_product(T, C, rng)
        if all(s(a) == a for a in A):
            stats["converse_ok"] += 1
        else:
            stats["converse_bad"] += 1
            if witness is None:
                witness = {"sample": i, "converse": True}
    bad = stats["none"] + stats["converse_bad"]
    return Check("chains.reach", params, tally(bad, stats["inconclusive"]), witness, stats)


def subchain_lift_check(S: Structure, C: Chain, keep: Sequence[int], samples: int,
                        budget: int = 10_000, seed: int = 0) -> Check:
    """Elements of N_D for a subchain D should have witnesses for C."""
    D = C.sub(keep)
    stats = {"found": 0, "none": 0, "inconclusive": 0}
    for i in range(samples):
        T = S.clone()
        s = stabiliser_product(T, D, SplitMix64(derive_seed(seed, "sub", i)))
        stats[chain_membership_witness(T, C, s, budget).status] += 1
    params = {"chain": C.to_json(S), "keep": list(keep), "samples": samples}
    return Check("chains.subchain", params, tally(stats["none"], stats["inconclusive"]), None, stats)


def commutation_check(S: Structure, C: Sequence, samples: int, seed: int = 0,
                      depth: int = 8) -> Check:
    """For g and s fixing C, g s agrees with (g s g^-1) g and g s g^-1 fixes
    g(C), on the first ``depth`` universe points."""
    C = tuple(C)
    bad = 0
    for i in range(samples):
        T = S.clone()
        rng = SplitMix64(derive_seed(seed, "comm", i))
        g = random_element(T, (), rng)
        s = random_element(T, C, rng)
        conj = Product([g, s, Product([g]).inverse()])
        moved = g.apply(C)
        if conj.apply(moved) != moved:
            bad += 1
            continue
        for x in list(T.universe)[:depth]:
            if Product([g, s])(x) != Product([conj, g])(x):
                bad += 1
                break
    params = {"C": [S.fmt(x) for x in C], "samples": samples, "seed": seed}
    return Check("chains.commutation", params, VIOLATION if bad else OK, None,
                 {"samples": samples, "violations": bad})
