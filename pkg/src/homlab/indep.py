"""Independence relations over oligomorphic structures, tested on samples.

Relations are plain ternary predicates on finite sets.  Exact axioms are
checked as implications on sampled triples; existential ones (full
existence, stationarity premises, 3-amalgamation) are bounded searches whose
misses count as inconclusive.  The second half builds universally embedded
submodels as oracles and checks absorption, lovely-pair and sink conditions
at prefix scale.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .chains import Chain, NotAclClosed, chain_membership_witness, search_joint
from .oligo import (
    AffineFq,
    BudgetExceeded,
    DenseOrder,
    OligoError,
    PartialAut,
    PreconditionFailed,
    Structure,
    VecFq,
    neumann_witness,
    random_element,
)
from .report import INCONCLUSIVE, OK, VIOLATION, Check, tally
from .rng import SplitMix64, derive_seed


@dataclass(frozen=True)
class IndepRelation:
    name: str
    query: Callable[[frozenset, frozenset, frozenset], bool]

    def __call__(self, A: Iterable, B: Iterable, C: Iterable) -> bool:
        return self.query(frozenset(A), frozenset(B), frozenset(C))


def alg_indep(S: Structure, A: Iterable, B: Iterable, C: Iterable) -> bool:
    """acl(AC) & acl(BC) == acl(C)."""
    A, B, C = set(A), set(B), set(C)
    return S.acl(A | C) & S.acl(B | C) == S.acl(C)


def algebraic(S: Structure) -> IndepRelation:
    return IndepRelation("alg", lambda A, B, C: alg_indep(S, A, B, C))


def always(S: Structure) -> IndepRelation:
    """Everything independent of everything: not an independence relation."""
    return IndepRelation("always", lambda A, B, C: True)


# -- axiom suite ---------------------------------------------------------------------


def _pick(rng: random.Random, pool: Sequence, lo: int, hi: int) -> frozenset:
    n = rng.randint(lo, min(hi, len(pool)))
    return frozenset(rng.sample(pool, n))


def _fmt(S: Structure, X: Iterable) -> list:
    return [S.fmt(x) for x in sorted(X, key=S.key)]


EXACT_AXIOMS = ("symmetry", "normality", "monotonicity", "transitivity",
                "anti_reflexivity", "invariance", "refines_alg")
SEARCHED_AXIOMS = ("full_existence", "stationarity", "amalgamation")


def axiom_suite(S: Structure, rel: IndepRelation, samples: int, seed: int = 0,
                budget: int = 2_000, searched: bool = True) -> dict[str, Check]:
    """One Check per axiom, keyed by axiom name.

    Exact axioms and base monotonicity are implications evaluated on sampled
    sets from the current truncation; a failed implication is a violation
    with the sets as witness.
    """
    pool = list(S.universe)
    params = {"structure": S.describe(), "relation": rel.name, "samples": samples, "seed": seed}
    stats: dict[str, dict] = {}
    witness: dict[str, dict] = {}

    def record(name: str, outcome: str | None, sets: dict | None = None):
        st = stats.setdefault(name, {"checked": 0, "vacuous": 0, "violations": 0, "inconclusive": 0})
        if outcome is None:
            st["vacuous"] += 1
            return
        st["checked"] += 1
        if outcome == VIOLATION:
            st["violations"] += 1
            if name not in witness and sets is not None:
                witness[name] = {k: _fmt(S, v) for k, v in sets.items()}
        elif outcome == INCONCLUSIVE:
            st["inconclusive"] += 1

    def implication(name, premise, conclusion, sets):
        if not premise:
            record(name, None)
        else:
            record(name, OK if conclusion() else VIOLATION, sets)

    for i in range(samples):
        rng = SplitMix64(derive_seed(seed, "axioms", i))
        A, B, C, D = (_pick(rng, pool, 0, 2) for _ in range(4))
        sets = {"A": A, "B": B, "C": C, "D": D}
        r = rel(A, B, C)
        implication("symmetry", r, lambda: rel(B, A, C), sets)
        implication("normality", r, lambda: rel(A, B | C, C), sets)
        implication("monotonicity", rel(A, B | D, C), lambda: rel(A, B, C), sets)
        implication("transitivity", r and rel(A, D, B | C), lambda: rel(A, B | D, C), sets)
        a = rng.choice(pool)
        implication("anti_reflexivity", rel({a}, {a}, C), lambda: a in S.acl(C),
                    {"a": {a}, "C": C})
        implication("refines_alg", r, lambda: alg_indep(S, A, B, C), sets)
        # invariance under a random automorphism
        T = S.clone()
        g = random_element(T, (), rng)
        gA, gB, gC = (frozenset(g(x) for x in X) for X in (A, B, C))
        record("invariance", OK if rel(A, B, C) == rel(gA, gB, gC) else VIOLATION, sets)
        # base monotonicity: B0 <= C0 <= D0
        B0 = _pick(rng, pool, 0, 1)
        C0 = B0 | _pick(rng, pool, 0, 1)
        D0 = C0 | _pick(rng, pool, 1, 2)
        A0 = _pick(rng, pool, 1, 2)
        implication("base_monotonicity", rel(A0, D0, B0), lambda: rel(A0, D0, C0),
                    {"A": A0, "B": B0, "C": C0, "D": D0})
        if searched:
            _full_existence(S, rel, A, B, C, budget, record, sets)
            _stationarity(S, rel, rng, pool, record)
            if i % 5 == 0:
                _amalgamation(S, rel, rng, pool, budget, record)

    out = {}
    for name, st in sorted(stats.items()):
        status = tally(st["violations"], st["inconclusive"])
        out[name] = Check(f"indep.{name}", dict(params), status, witness.get(name), st)
    return out


def _full_existence(S, rel, A, B, C, budget, record, sets):
    """A' with A' == A over C and A' independent from B over C."""
    T = S.clone()
    src = sorted(A, key=S.key)
    base = sorted(C, key=S.key)
    try:
        # a Neumann move over acl(C) first, then a plain search
        g = neumann_witness(T, T.acl(base), T.acl(src + base), T.acl(list(B) + base), budget)
        cand = tuple(g(x) for x in src)
        if rel(cand, B, C):
            record("full_existence", OK)
            return
        found = search_joint(T, src, [(base, base)], budget,
                             accept=lambda y: len(y) < len(src) or rel(y, B, C))
    except BudgetExceeded:
        found = None
    record("full_existence", OK if found is not None else INCONCLUSIVE, sets)


def _stationarity(S, rel, rng, pool, record):
    """B1, B2 independent from C over A and equal in type over A must be
    equal in type over AC.  B2 comes from a random element fixing A."""
    A = S.acl(_pick(rng, pool, 0, 1))
    B1 = S.acl(A | _pick(rng, pool, 1, 1))
    C = S.acl(A | _pick(rng, pool, 1, 1))
    T = S.clone()
    g = random_element(T, sorted(A, key=S.key), rng, fresh_bias=0.1)
    b1 = sorted(B1, key=S.key)
    b2 = [g(x) for x in b1]
    if not (rel(B1, C, A) and rel(b2, C, A)):
        record("stationarity", None)
        return
    a = sorted(A, key=S.key)
    c = sorted(C, key=S.key)
    same = T.orbit_eq(a + c + b1, a + c + b2)
    record("stationarity", OK if same else VIOLATION,
           {"A": A, "B1": B1, "B2": frozenset(b2), "C": C})


def _amalgamation(S, rel, rng, pool, budget, record):
    """Independent 3-amalgamation on a configuration built to satisfy the
    premises: B2 and C1 are moved off by Neumann witnesses over A, and C2 is
    the image of C1 under a random element fixing A, moved likewise."""
    T = S.clone()
    A = T.acl(_pick(rng, pool, 0, 1))
    a = sorted(A, key=T.key)
    B1 = T.acl(A | _pick(rng, pool, 1, 1))
    B2 = T.acl(A | _pick(rng, pool, 1, 1))
    B2 = frozenset(neumann_witness(T, A, B2, B1, budget)(x) for x in B2)
    C1 = T.acl(A | _pick(rng, pool, 1, 1))
    C1 = frozenset(neumann_witness(T, A, C1, B1, budget)(x) for x in C1)
    c1 = sorted(C1, key=T.key)
    h = random_element(T, a, rng, fresh_bias=0.1)
    moved = [h(x) for x in c1]
    n = neumann_witness(T, A, moved, B2, budget)
    c2 = [n(x) for x in moved]
    if not (A <= B1 and A <= B2 and rel(B1, B2, A) and rel(C1, B1, A)
            and rel(c2, B2, A) and T.orbit_eq(a + c1, a + c2)):
        record("amalgamation", None)
        return
    b1 = sorted(B1, key=T.key)
    b2 = sorted(B2, key=T.key)
    both = B1 | B2
    try:
        D = search_joint(T, c1, [(b1, b1), (b2, b2, c2)], budget,
                         accept=lambda y: len(y) < len(c1) or rel(y, both, A))
    except BudgetExceeded:
        D = None
    record("amalgamation", OK if D is not None else INCONCLUSIVE)


def modularity_check(S: Structure, samples: int, seed: int = 0) -> Check:
    """acl(A u (C & B)) == acl(A u C) & B for closed A <= B and closed C."""
    pool = list(S.universe)
    bad, witness = 0, None
    for i in range(samples):
        rng = SplitMix64(derive_seed(seed, "modular", i))
        A = S.acl(_pick(rng, pool, 0, 2))
        B = S.acl(A | _pick(rng, pool, 0, 2))
        C = S.acl(_pick(rng, pool, 0, 2))
        if S.acl(A | (C & B)) != S.acl(A | C) & B:
            bad += 1
            witness = witness or {"A": _fmt(S, A), "B": _fmt(S, B), "C": _fmt(S, C)}
    return Check("indep.modularity", {"structure": S.describe(), "samples": samples, "seed": seed},
                 VIOLATION if bad else OK, witness, {"violations": bad})


def exchange_check(S: Structure, samples: int, seed: int = 0) -> Check:
    """a in acl(Ab) \\ acl(A) implies b in acl(Aa)."""
    pool = list(S.universe)
    bad, hits, witness = 0, 0, None
    for i in range(samples):
        rng = SplitMix64(derive_seed(seed, "exchange", i))
        A = S.acl(_pick(rng, pool, 0, 2))
        a, b = rng.choice(pool), rng.choice(pool)
        if a in S.acl(A | {b}) and a not in A:
            hits += 1
            if b not in S.acl(A | {a}):
                bad += 1
                witness = witness or {"A": _fmt(S, A), "a": S.fmt(a), "b": S.fmt(b)}
    return Check("indep.exchange", {"structure": S.describe(), "samples": samples, "seed": seed},
                 VIOLATION if bad else OK, witness, {"violations": bad, "applicable": hits})


def check_narrowness(S: Structure, rel: IndepRelation, k: int, A: Iterable, chain: Chain) -> bool:
    """The endpoints of an independent chain over A of length k are
    independent over A."""
    from .chains import is_independent_chain

    A = frozenset(A)
    if chain.length != k:
        raise PreconditionFailed(f"chain has length {chain.length}, not {k}")
    for i in range(k):
        if frozenset(chain[i]) & frozenset(chain[i + 1]) != A:
            raise PreconditionFailed("chain is not over A")
    if not is_independent_chain(S, chain, rel):
        raise PreconditionFailed("chain is not independent")
    return rel(chain[0], chain[k], A)


# -- universally embedded submodels ---------------------------------------------------------


@dataclass(frozen=True)
class SubuniverseOracle:
    """A fixed closed part of the structure that is both dense and codense."""

    name: str
    member: Callable[[object], bool]

    def __call__(self, x) -> bool:
        return self.member(x)

    def part(self, X: Iterable) -> frozenset:
        return frozenset(x for x in X if self.member(x))


def even_span(S: VecFq) -> SubuniverseOracle:
    """Span of e_2, e_4, ...: coordinates at e_1, e_3, ... vanish."""
    if isinstance(S, AffineFq) or not isinstance(S, VecFq):
        raise PreconditionFailed("even_span needs a vector space")

    def member(x: int) -> bool:
        return not any(d for j, d in enumerate(S.digits(x)) if j % 2 == 0)
    return SubuniverseOracle("even_span", member)


def even_depth(S: DenseOrder) -> SubuniverseOracle:
    """Dyadic rationals whose reduced denominator is an even power of two."""
    if not isinstance(S, DenseOrder):
        raise PreconditionFailed("even_depth needs the dense order")

    def member(x) -> bool:
        return (int(x.denominator).bit_length() - 1) % 2 == 0
    return SubuniverseOracle("even_depth", member)


OMEGAS = {"even_span": even_span, "even_depth": even_depth}


def empty_closure(S: Structure) -> Callable[[object], bool]:
    """Membership in acl(empty set), the smallest invariant closed set."""
    return S.closure_test(())


def everything(S: Structure) -> Callable[[object], bool]:
    return lambda x: True


DELTAS = {"acl_empty": empty_closure, "universe": everything}


def _closed(S: Structure, X: Sequence, name: str) -> tuple:
    X = tuple(X)
    if S.acl(X) != frozenset(X):
        raise NotAclClosed(name)
    return X


def absorbing_config_check(S: Structure, omega: SubuniverseOracle, a1: Sequence,
                           a2: Sequence, b: Sequence) -> bool:
    """a1 <= a2, b independent from a1 over b & omega, and b & omega
    independent from a2 over a1."""
    a1, a2, b = (_closed(S, X, n) for X, n in ((a1, "a1"), (a2, "a2"), (b, "b")))
    if not set(a1) <= set(a2):
        raise PreconditionFailed("a1 must be contained in a2")
    b0 = omega.part(b)
    return alg_indep(S, b, a1, b0) and alg_indep(S, b0, a2, a1)


def absorb(S: Structure, omega: SubuniverseOracle, a1: Sequence, a2: Sequence,
           b: Sequence, budget: int = 10_000, extra_fresh: int = 6) -> tuple[tuple, tuple]:
    """a1', a2' with a1' a2' == a1 a2 over b and a2' & omega == a1'.

    Coordinates of a1 are placed inside omega first, then the rest of a2 is
    kept outside it, one coordinate at a time.
    """
    if not absorbing_config_check(S, omega, a1, a2, b):
        raise PreconditionFailed("not an absorbing configuration")
    a1 = tuple(a1)
    rest = tuple(x for x in a2 if x not in set(a1))
    src = a1 + rest
    inside = len(a1)
    b = tuple(b)

    def accept(y):
        i = len(y) - 1
        return omega(y[i]) == (i < inside)

    image = search_joint(S, src, [(b, b)], budget, accept=accept, extra_fresh=extra_fresh)
    if image is None:
        raise BudgetExceeded("absorption search exhausted")
    where = dict(zip(src, image))
    a1p = tuple(where[x] for x in a1)
    a2p = tuple(where[x] for x in a2)
    if not S.orbit_eq(b + a1 + tuple(a2), b + a1p + a2p) or omega.part(a2p) != frozenset(a1p):
        raise AssertionError("absorb output fails its postconditions")
    return a1p, a2p


def _span_sample(S: Structure, rng: random.Random, pool: Sequence, hi: int) -> tuple:
    return tuple(sorted(S.acl(_pick(rng, pool, 0, hi)), key=S.key))


def lovely_pair_check(S: Structure, omega: SubuniverseOracle, samples: int, seed: int = 0,
                      budget: int = 5_000) -> Check:
    """Coheir and extension witnesses for sampled closed a, b."""
    pool = list(S.universe)
    st = {"coheir_applicable": 0, "coheir_found": 0, "coheir_inconclusive": 0,
          "extension_found": 0, "extension_inconclusive": 0}
    for i in range(samples):
        rng = SplitMix64(derive_seed(seed, "lovely", i))
        a = _span_sample(S, rng, pool, 2)
        b = _span_sample(S, rng, pool, 2)
        b0 = omega.part(b)
        T = S.clone()
        if alg_indep(S, b, a, b0):
            st["coheir_applicable"] += 1
            if all(omega(x) for x in a):
                st["coheir_found"] += 1
            else:
                try:
                    hit = search_joint(T, a, [(b, b)], budget, extra_fresh=6,
                                       accept=lambda y: omega(y[-1]))
                except BudgetExceeded:
                    hit = None
                st["coheir_found" if hit is not None else "coheir_inconclusive"] += 1
        T = S.clone()

        def extension_ok(y):
            return omega.part(T.acl(tuple(y) + b)) == b0
        try:
            hit = search_joint(T, a, [(b, b)], budget, extra_fresh=6, accept=extension_ok)
        except BudgetExceeded:
            hit = None
        st["extension_found" if hit is not None else "extension_inconclusive"] += 1
    inconclusive = st["coheir_inconclusive"] + st["extension_inconclusive"]
    params = {"structure": S.describe(), "omega": omega.name, "samples": samples, "seed": seed}
    return Check("indep.lovely", params, tally(0, inconclusive), None, st)


# -- sinks ---------------------------------------------------------------------------------


def _steer(S: Structure, phi: PartialAut, x, want: Callable[[object], bool], extra_fresh: int = 8):
    """Extend ``phi`` at ``x`` with an image satisfying ``want``."""
    if x in phi.fwd:
        return phi.fwd[x] if want(phi.fwd[x]) else None
    if S.fresh_is_forced(phi.fwd, x):
        y = next(S.candidates(phi.fwd, x))
    else:
        y = next((c for c in S._existing(phi.fwd, x) if want(c)), None)
        for _ in range(extra_fresh):
            if y is not None:
                break
            c = S.fresh(phi.fwd, x)
            y = c if c is not None and want(c) else None
    if y is None or not want(y):
        return None
    phi.fwd[x] = y
    phi.bwd[y] = x
    return y


def equalizer_check(S: Structure, omega: SubuniverseOracle, depth: int, budget: int = 10_000) -> dict:
    """u, u' agreeing exactly on omega over the first ``depth`` points: u is
    the identity and u' fixes omega & acl(prefix) while moving every other
    prefix point off the prefix (a Neumann witness)."""
    while len(S.universe) < depth:
        S.grow()
    prefix = list(S.universe)[:depth]
    X = omega.part(S.acl(prefix))
    g = neumann_witness(S, X, prefix, prefix, budget)
    beta = {x: g(x) for x in prefix}
    agree = {x for x in prefix if beta[x] == x}
    expected = set(omega.part(prefix))
    meet = set(prefix) & set(beta.values())
    ok = agree == expected and meet == {beta[x] for x in expected}
    return {"ok": ok, "prefix": len(prefix), "agree": len(agree), "expected": len(expected)}


def _sample_chain(S: Structure, delta: Callable, k: int, rng: random.Random, pool: Sequence,
                  budget: int) -> Chain:
    """Closed sets c_0..c_k with consecutive intersections inside delta,
    arranged by Neumann witnesses over the part of the intersection in delta."""
    terms = [tuple(sorted(S.acl(_pick(rng, pool, 1, 2)), key=S.key))]
    for _ in range(k):
        nxt = S.acl(_pick(rng, pool, 1, 2))
        prev = frozenset(terms[-1])
        keep = S.acl(x for x in nxt & prev if delta(x))
        g = neumann_witness(S, keep, nxt, prev, budget)
        terms.append(tuple(sorted((g(x) for x in nxt), key=S.key)))
    return Chain(terms, True)


def swallow_check(S: Structure, omega: SubuniverseOracle, delta: Callable, k: int, depth: int,
                  samples: int, seed: int = 0, budget: int = 10_000) -> dict:
    """For sampled chains, an element of N_C sending the prefix into omega.

    c'_1 .. c'_{k-1} copy the links, c'_k is absorbed into omega over
    c'_{k-1}; the map c_k -> c'_k is then extended over the prefix with
    images inside omega, and the witness chain is rechecked.
    """
    stats = {"chains": 0, "found": 0, "failed": 0}
    for i in range(samples):
        T = S.clone()
        rng = SplitMix64(derive_seed(seed, "swallow", i))
        pool = list(T.universe)
        C = _sample_chain(T, delta, k, rng, pool, budget)
        stats["chains"] += 1
        try:
            u = _swallow(T, omega, C, pool[:depth], budget)
        except (BudgetExceeded, PreconditionFailed):
            u = None
        if u is None or chain_membership_witness(T, C, u, budget).status != "found":
            stats["failed"] += 1
        else:
            stats["found"] += 1
    stats["ok"] = stats["failed"] == 0
    return stats


def _swallow(T: Structure, omega: SubuniverseOracle, C: Chain, prefix: Sequence, budget: int):
    k = C.length
    prev = C[0]
    for i in range(1, k):
        prev = search_joint(T, C[i], [(C[i - 1], prev)], budget)
        if prev is None:
            return None
    last = search_joint(T, C[k], [(C[k - 1], prev)], budget, extra_fresh=8,
                        accept=lambda y: omega(y[-1]))
    if last is None:
        return None
    u = PartialAut(T, dict(zip(C[k], last)))
    for x in prefix:
        if _steer(T, u, x, omega) is None:
            return None
    return u


def image_meet_check(S: Structure, omega: SubuniverseOracle, delta: Callable, depth: int,
                     budget: int = 10_000) -> dict:
    """v with im(v) & omega == v(delta), built over nested closures of the
    prefix: each new layer is absorbed over the image of the previous one."""
    pool = list(S.universe)[:depth]
    T = S.clone()
    v: dict = {x: x for x in T.acl(())}
    layer = tuple(sorted(v, key=T.key))
    configs = 0
    for x in pool:
        if x in v:
            continue
        grown = tuple(sorted(T.acl(layer + (x,)), key=T.key))
        # g_n extended to the next layer, then absorbed over v(layer)
        g = PartialAut(T, v)
        moved = tuple(g(y) for y in grown)
        a1 = tuple(m for y, m in zip(grown, moved) if delta(y))
        b = tuple(v[y] for y in layer)
        if not absorbing_config_check(T, omega, a1, moved, b):
            return {"ok": False, "layers": configs, "reason": "not absorbing"}
        configs += 1
        a1p, a2p = absorb(T, omega, a1, moved, b, budget)
        v = dict(zip(grown, a2p))
        layer = grown
    image = set(v.values())
    ok = omega.part(image) == {v[y] for y in v if delta(y)}
    return {"ok": ok, "layers": configs, "domain": len(v)}


def sink_check(S: Structure, omega: SubuniverseOracle, delta: Callable, k: int = 1,
               depth: int = 20, samples: int = 10, seed: int = 0, budget: int = 10_000,
               delta_name: str = "acl_empty") -> Check:
    """The three sink conditions, each at prefix scale."""
    T = S.clone()
    first = equalizer_check(T, omega, depth, budget)
    second = swallow_check(T, omega, delta, k, depth, samples, seed, budget)
    third = image_meet_check(T, omega, delta, depth, budget)
    stats = {"equalizer": first, "swallow": second, "image_meet": third}
    bad = sum(1 for part in stats.values() if not part["ok"])
    params = {"structure": S.describe(), "omega": omega.name, "delta": delta_name, "k": k,
              "depth": depth, "samples": samples, "seed": seed}
    witness = {name: part for name, part in stats.items() if not part["ok"]} or None
    return Check("indep.sink", params, VIOLATION if bad else OK, witness, stats)
