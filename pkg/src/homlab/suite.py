"""The acceptance suite: one function per criterion, each returning a Check.

Every function takes the suite seed and a ``quick`` flag that shrinks
sample counts so the whole suite runs in well under a minute.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np
from gmpy2 import mpq as Q

from . import chains, indep, oligo, zariski
from .embed import pinching_pair, sample_embedding, separation_witness, spreading_pair
from .metric import amalgam, random_glued_pair, validate_space
from .monoid import Kind, MonoidSpec, make_monoid
from .report import INCONCLUSIVE, OK, VIOLATION, Check, worst
from .rng import SplitMix64, derive_seed
from .urysohn import Generator

MONOIDS = (("q_nonneg", None), ("q_unit_trunc", None), ("q_lex2", None), ("q_ultra", None))


class BrokenMinus(MonoidSpec):
    """Fault-injection monoid: minus ignores its second argument."""

    def minus(self, r, s):
        return r


def broken(m: MonoidSpec) -> MonoidSpec:
    return BrokenMinus(**{f.name: getattr(m, f.name) for f in fields(m)})


# -- 1: truncated subtraction against an integer oracle ------------------------------

_LEX_RADIX = 1 << 24


def _scale(level: int) -> int:
    return int(np.lcm.reduce(np.arange(1, level + 1)))


def _encode(m: MonoidSpec, values, L: int) -> np.ndarray:
    """Integer keys whose order and sum match the carrier's (lex pairs are
    packed as x * radix + y)."""
    if m.kind is Kind.LEX_PAIR:
        return np.array([int(x * L) * _LEX_RADIX + int(y * L) for x, y in values], dtype=np.int64)
    return np.array([int(v * L) for v in values], dtype=np.int64)


def _oracle_plus(m: MonoidSpec, L: int) -> Callable:
    if m.kind is Kind.ULTRAMETRIC:
        return np.maximum
    if m.top is not None:
        top = int(m.top * L)
        return lambda a, b: np.minimum(a + b, top)
    return np.add


def _chunks(n: int, size: int = 2048):
    for lo in range(0, n, size):
        yield slice(lo, min(n, lo + size))


def minus_oracle_check(m: MonoidSpec, level: int) -> Check:
    """minus(r, s) is the least t with r <= s + t; both residuation clauses
    hold for every grid triple and every grid sum t + u."""
    L = _scale(level)
    plus = _oracle_plus(m, L)
    grid = m.grid(level)
    g = _encode(m, grid, L)
    pairs = [(r, s) for r in grid for s in grid if s <= r]
    R = _encode(m, [r for r, _ in pairs], L)
    S = _encode(m, [s for _, s in pairs], L)
    M = _encode(m, [m.minus(r, s) for r, s in pairs], L)
    V = np.unique(plus(g[:, None], g[None, :]).ravel())
    big = np.iinfo(np.int64).max
    counts = {"pairs": len(pairs), "grid": len(grid), "sums": len(V),
              "least": 0, "clause_one": 0, "clause_two": 0}
    witness = None

    def note(kind, mask, extra=None):
        nonlocal witness
        hits = np.argwhere(mask)
        counts[kind] += len(hits)
        if witness is None and len(hits):
            i = sl.start + int(hits[0][0])
            r, s = pairs[i]
            witness = {"check": kind, "r": m.to_json(r), "s": m.to_json(s),
                       "minus": m.to_json(m.minus(r, s))}
            if extra is not None:
                witness["t"] = m.to_json(extra[int(hits[0][1])])

    for sl in _chunks(len(pairs)):
        r, s, t = R[sl, None], S[sl, None], M[sl, None]
        # least t over the grid plus the natural candidates r - s, r, 0
        cand = np.concatenate([np.broadcast_to(g, (len(r), len(g))), r - s, r, np.zeros_like(r)], axis=1)
        valid = r <= plus(s, cand)
        least = np.where(valid, cand, big).min(axis=1)
        note("least", least != t[:, 0])
        note("clause_one", (t <= g[None, :]) != (r <= plus(s, g[None, :])), grid)
        note("clause_two", ((s <= V[None, :]) & ~(r <= plus(V[None, :], t))).any(axis=1))
    bad = counts["least"] + counts["clause_one"] + counts["clause_two"]
    params = {"monoid": m.describe(), "level": level}
    return Check("monoid.minus_oracle", params, VIOLATION if bad else OK, witness, counts)


def criterion_minus(seed: int, quick: bool = False, inject: str | None = None) -> Check:
    parts = []
    for kind, bound in MONOIDS:
        m = make_monoid(kind, bound)
        if inject == "broken_minus":
            m = broken(m)
        # lex pairs square the grid, so they use a coarser one
        level = 4 if m.kind is Kind.LEX_PAIR else 12
        parts.append(minus_oracle_check(m, level))
    return _combine("acceptance.01.minus", {"grid_level": 12, "lex_level": 4}, parts)


def _combine(name: str, params: dict, parts: list[Check], label: str = "monoid") -> Check:
    status = worst(p.status for p in parts)
    witness = next((dict(p.witness, **{label: p.params.get(label)}) if isinstance(p.witness, dict)
                    else p.witness for p in parts if p.status == status and p.witness is not None), None)
    stats = {"parts": [{"params": p.params, "status": p.status, "stats": p.stats} for p in parts]}
    return Check(name, params, status, witness, stats)


# -- 2: amalgams ---------------------------------------------------------------------


def amalgam_check(m: MonoidSpec, pairs: int, seed: int) -> Check:
    rng = SplitMix64(derive_seed(seed, "amalgam", m.kind.value))
    values = m.grid(2 if m.kind is Kind.LEX_PAIR else 4)
    bad, witness, sizes = 0, None, []
    for i in range(pairs):
        a, b, glue = random_glued_pair(m, 8, rng, values)
        space, _ = amalgam(a, b, glue)
        sizes.append(len(space))
        v = validate_space(space)
        if v is not None:
            bad += 1
            if witness is None:
                witness = {"pair": i, "a": a.to_json(), "b": b.to_json(),
                           "glue": sorted(glue.items()), "violation": v.to_json()}
    stats = {"pairs": pairs, "violations": bad, "max_points": max(sizes, default=0)}
    params = {"monoid": m.describe(), "pairs": pairs, "seed": seed}
    return Check("metric.amalgam", params, VIOLATION if bad else OK, witness, stats)


def criterion_amalgam(seed: int, quick: bool = False) -> Check:
    pairs = 60 if quick else 500
    parts = [amalgam_check(make_monoid(k, b), pairs, seed) for k, b in MONOIDS]
    return _combine("acceptance.02.amalgam", {"pairs": pairs, "seed": seed}, parts)


# -- 3 and 4: pinching and spreading -------------------------------------------------

EPSILONS = (Q(1, 2), Q(1), Q(3, 2))


def _pair_monoids():
    """The monoids for the pair checks; a truncation at 1 cannot hold
    eps = 3/2, which is run with the bound raised to 2."""
    for eps in EPSILONS:
        yield make_monoid("q_nonneg"), eps
        yield make_monoid("q_unit_trunc", None if eps <= 1 else 2), eps


def pinching_check(m: MonoidSpec, eps, advances: int, a: int = 0, points: int = 12) -> Check:
    g = Generator(m).grow_to(points)
    phi, psi = pinching_pair(g, a, eps)
    counts = {"stages": 0, "agree": 0, "split": 0, "violations": 0}
    witness = None
    for stage in range(advances):
        phi.advance()
        psi.apply_at(phi.order[-1])
        problems = []
        for e in (phi, psi):
            v = e.check()
            if v is not None:
                problems.append({"stage": stage, "isometry": e.rule, "violation": v.to_json()})
        for x, y in phi.pairs.items():
            z = psi.pairs[x]
            alpha = g.d(a, x)
            if alpha >= eps:
                if y != z:
                    problems.append({"stage": stage, "point": x, "want": "agree"})
            elif y == z or g.d(y, z) < m.minus(eps, alpha):
                problems.append({"stage": stage, "point": x, "want": "gap",
                                 "gap": m.to_json(g.d(y, z)), "need": m.to_json(m.minus(eps, alpha))})
        counts["stages"] += 1
        if problems:
            counts["violations"] += len(problems)
            witness = witness or problems[0]
    for x in phi.pairs:
        counts["agree" if g.d(a, x) >= eps else "split"] += 1
    params = {"monoid": m.describe(), "eps": m.to_json(eps), "advances": advances, "a": a}
    return Check("embed.pinching", params, VIOLATION if witness else OK, witness, counts)


def spreading_check(m: MonoidSpec, eps, advances: int, a: int = 0, points: int = 12) -> Check:
    g = Generator(m).grow_to(points)
    sigma, theta = spreading_pair(g, a, eps)
    counts = {"stages": 0, "close_pairs": 0, "violations": 0}
    witness = None
    for stage in range(advances):
        sigma.advance()
        theta.apply_at(sigma.order[-1])
        problems = []
        for e in (sigma, theta):
            v = e.check()
            if v is not None:
                problems.append({"stage": stage, "isometry": e.rule, "violation": v.to_json()})
            if a not in e.image():
                problems.append({"stage": stage, "missing_centre": e.rule})
        for u in sigma.image():
            for v in theta.image():
                if g.d(u, v) < eps:
                    counts["close_pairs"] += 1
                    if not g.d(u, a) < eps:
                        problems.append({"stage": stage, "u": u, "v": v})
        counts["stages"] += 1
        if problems:
            counts["violations"] += len(problems)
            witness = witness or problems[0]
    params = {"monoid": m.describe(), "eps": m.to_json(eps), "advances": advances, "a": a}
    return Check("embed.spreading", params, VIOLATION if witness else OK, witness, counts)


def criterion_pinching(seed: int, quick: bool = False) -> Check:
    parts = [pinching_check(m, eps, 30) for m, eps in _pair_monoids()]
    return _combine("acceptance.03.pinching", {"advances": 30}, parts)


def criterion_spreading(seed: int, quick: bool = False) -> Check:
    parts = [spreading_check(m, eps, 30) for m, eps in _pair_monoids()]
    return _combine("acceptance.04.spreading", {"advances": 30}, parts)


# -- 5 and 6: zariski neighbourhoods -------------------------------------------------


def _zariski_generators(quick: bool):
    steps = 150 if quick else 400
    for kind in ("q_nonneg", "q_unit_trunc"):
        yield Generator(make_monoid(kind)).run(steps)


def criterion_O(seed: int, quick: bool = False) -> Check:
    samples = 10 if quick else 100
    parts = [zariski.check_O_characterization(g, 0, Q(1, 2), samples, 30, derive_seed(seed, "O"))
             for g in _zariski_generators(quick)]
    for p, g in zip(parts, ("q_nonneg", "q_unit_trunc")):
        p.params["monoid"] = g
        p.stats["inconclusive_rate"] = f"{p.stats['inconclusive']}/{p.stats['samples']}"
    return _combine("acceptance.05.O_characterization", {"samples": samples, "depth": 30}, parts)


def criterion_containments(seed: int, quick: bool = False) -> Check:
    samples = 10 if quick else 100
    parts = []
    for g, kind in zip(_zariski_generators(quick), ("q_nonneg", "q_unit_trunc")):
        b = 3
        c = zariski.check_containments(g, 0, b, Q(1, 8), Q(1, 8), Q(1, 4), samples, 30,
                                       derive_seed(seed, "containments"))
        c.params["monoid"] = kind
        parts.append(c)
    out = _combine("acceptance.06.containments", {"samples": samples, "depth": 30}, parts)
    # unresolved first inclusions are reported, not failed: only decided
    # counterexamples count against the criterion
    if out.status == INCONCLUSIVE:
        out.status = OK
    return out


# -- 7: separation witnesses ---------------------------------------------------------


def separation_check(m: MonoidSpec, samples: int, seed: int) -> Check:
    base = Generator(m).grow_to(16)
    values = [v for v in m.grid(4) if v != m.zero]
    counts = {"samples": samples, "witnessed": 0, "violations": 0}
    witness = None
    for i in range(samples):
        rng = SplitMix64(derive_seed(seed, "separation", m.kind.value, i))
        g = base.fork()
        e = sample_embedding(g, derive_seed(seed, "phi", i), rng.randint(1, 4))
        phi = {x: e.pairs[x] for x in e.order}
        a = rng.randrange(len(g))
        b = rng.randrange(len(g))
        eps = rng.choice(values)
        s = separation_witness(g, phi, a, b, eps, advances=4)
        problems = []
        if s.check() is not None:
            problems.append("not an isometry")
        if not g.d(s.apply_at(a), b) < eps:
            problems.append("s(a) outside the ball")
        differs = [x for x in phi if s.apply_at(x, depth=1) != phi[x]]
        if not differs:
            problems.append("agrees with phi")
        if problems:
            counts["violations"] += 1
            witness = witness or {"sample": i, "phi": sorted(phi.items()), "a": a, "b": b,
                                  "eps": m.to_json(eps), "problems": problems}
        else:
            counts["witnessed"] += 1
    params = {"monoid": m.describe(), "samples": samples, "seed": seed}
    return Check("embed.separation", params, VIOLATION if witness else OK, witness, counts)


def criterion_separation(seed: int, quick: bool = False) -> Check:
    samples = 5 if quick else 20
    parts = [separation_check(make_monoid(k), samples, seed) for k in ("q_nonneg", "q_unit_trunc")]
    return _combine("acceptance.07.separation", {"samples": samples}, parts)


# -- 8: acl against orbits -----------------------------------------------------------


@dataclass
class AclCase:
    name: str
    build: Callable
    pool_size: int | None = None
    stage: int | None = None


ACL_CASES = (
    AclCase("vec_fq q=2 dim=3", lambda: oligo.VecFq(2, 3)),
    AclCase("vec_fq q=3 dim=2", lambda: oligo.VecFq(3, 2)),
    AclCase("affine_fq q=2 dim=3", lambda: oligo.AffineFq(2, 3)),
    AclCase("pure_set", lambda: oligo.PureSet(8)),
    AclCase("dense_order", lambda: oligo.DenseOrder(8)),
    AclCase("copies_kn n=3", lambda: oligo.CopiesKn(3, 3), pool_size=8),
    AclCase("random_graph", lambda: oligo.RandomGraph(8), stage=8),
    AclCase("random_bipartite", lambda: oligo.RandomBipartite(8), stage=8),
)


def acl_oracle_check(case: AclCase, max_size: int) -> Check:
    S = case.build()
    if case.stage is not None:
        T1 = list(S.universe[:8])
        S.complete_stage(case.stage)
    else:
        T1 = list(S.universe)
        S.grow()
    T2 = list(S.universe)
    relations = oligo._Relations(T2, S.relations(T2)) if S.homogeneous_truncation else None
    pool = T1[:case.pool_size] if case.pool_size else T1
    checked, witness, bad = 0, None, 0
    for k in range(max_size + 1):
        for A in itertools.combinations(pool, k):
            brute = oligo.brute_force_acl(S, A, T1, T2, relations)
            formula = S.acl(A) & frozenset(T1)
            checked += 1
            if brute != formula:
                bad += 1
                witness = witness or {"A": [S.fmt(x) for x in A],
                                      "brute": sorted(S.fmt(x) for x in brute),
                                      "formula": sorted(S.fmt(x) for x in formula)}
    params = {"structure": case.name, "truncation": len(T1), "max_size": max_size}
    stats = {"subsets": checked, "mismatches": bad, "extended": len(T2)}
    return Check("oligo.acl_oracle", params, VIOLATION if bad else OK, witness, stats)


def criterion_acl(seed: int, quick: bool = False) -> Check:
    size = 2 if quick else 3
    parts = [acl_oracle_check(c, size) for c in ACL_CASES]
    return _combine("acceptance.08.acl", {"max_size": size}, parts, label="structure")


# -- 9: independence axioms ----------------------------------------------------------

AXIOM_STRUCTURES = (
    ("vec_fq q=2", lambda: oligo.VecFq(2, 3)),
    ("pure_set", lambda: oligo.PureSet(8)),
    ("copies_kn n=3", lambda: oligo.CopiesKn(3, 3)),
)


def criterion_axioms(seed: int, quick: bool = False) -> Check:
    samples = 100 if quick else 500
    required = set(indep.EXACT_AXIOMS) | {"base_monotonicity"}
    parts = []
    for name, build in AXIOM_STRUCTURES:
        S = build()
        suite = indep.axiom_suite(S, indep.algebraic(S), samples, derive_seed(seed, "axioms"))
        # searched axioms may stay undecided; a decided failure still counts
        statuses = [c.status for a, c in suite.items() if a in required]
        statuses += [VIOLATION for a, c in suite.items() if c.status == VIOLATION]
        witness = next(({"axiom": a, **c.witness} for a, c in suite.items()
                        if c.status == VIOLATION and c.witness), None)
        parts.append(Check("indep.axioms", {"structure": name, "samples": samples},
                           worst(statuses), witness,
                           {a: c.stats for a, c in sorted(suite.items())}))
    A = oligo.AffineFq(2, 3)
    # the fixture skips the searched axioms, so it runs at full size even when quick
    fixture = indep.axiom_suite(A, indep.algebraic(A), 500, derive_seed(seed, "axioms"),
                                searched=False)["base_monotonicity"]
    found = fixture.status == VIOLATION and fixture.witness is not None
    parts.append(Check("indep.affine_fixture", {"structure": "affine_fq q=2", "samples": 500},
                       OK if found else VIOLATION,
                       None if found else {"expected": "base monotonicity violation"},
                       {"fixture_status": fixture.status, "fixture_witness": fixture.witness,
                        **fixture.stats}))
    return _combine("acceptance.09.axioms", {"samples": samples}, parts, label="structure")


# -- 10: reachability ----------------------------------------------------------------


def random_chain_over(S: oligo.Structure, A, length: int, rng) -> chains.Chain:
    """Terms acl(A + v) for random v, any two meeting exactly in acl(A)."""
    base = S.acl(A)
    terms: list[frozenset] = []
    while len(terms) < length + 1:
        v = rng.randrange(S.q ** S.dim) if hasattr(S, "q") else rng.choice(S.universe)
        t = S.acl(set(A) | {v})
        if t != base and all(t & u == base for u in terms):
            terms.append(t)
    return chains.Chain([tuple(sorted(t, key=S.key)) for t in terms], acl_closed=True)


def criterion_reachability(seed: int, quick: bool = False) -> Check:
    samples = 5 if quick else 20
    S = oligo.VecFq(2, 5)
    A = tuple(S.span([S.basis(1)]))
    parts = []
    for i in range(samples):
        rng = SplitMix64(derive_seed(seed, "chain", i))
        C = random_chain_over(S, A, 2, rng)
        parts.append(chains.reachability_check(S, A, C, 1, seed=derive_seed(seed, "reach", i)))
    found = sum(p.stats["found"] for p in parts)
    out = _combine("acceptance.10.reachability", {"samples": samples, "dim": 5}, parts,
                   label="chain")
    # anything short of a witness for every sample fails the criterion
    if out.status == INCONCLUSIVE:
        out.status = VIOLATION
        out.witness = {"unwitnessed": samples - found}
    out.stats = {"witnessed": found, "samples": samples,
                 "converse_ok": sum(p.stats["converse_ok"] for p in parts),
                 "none": sum(p.stats["none"] for p in parts),
                 "inconclusive": sum(p.stats["inconclusive"] for p in parts)}
    return out


# -- 11: the centre ------------------------------------------------------------------


def centre_words(S: oligo.VecFq, rng, n_one: int = 20, n_two: int = 5):
    points = list(range(S.q ** 4))
    type_one = []
    while len(type_one) < n_one:
        n = rng.randrange(0, 3)
        w = zariski.random_word(S, n, n, 4, rng)
        if any(zariski.satisfies_at(w, zariski.IDENTITY, p) for p in points):
            type_one.append(w)
    type_two = []
    for _ in range(n_two):
        n = rng.randrange(1, 4)
        type_two.append(zariski.random_word(S, n, rng.randrange(0, n), 4, rng))
    return type_one, type_two


def criterion_centre(seed: int, quick: bool = False) -> Check:
    S = oligo.VecFq(3, 4)
    gamma = zariski.Scalar(S, 2)
    rng = SplitMix64(derive_seed(seed, "centre"))
    params = {"structure": "vec_fq q=3 dim=4", "gamma": "scalar 2", "type_one": 20, "type_two": 5,
              "seed": seed}
    central = zariski.check_central(S, gamma, 4)
    if central is not None:
        return Check("acceptance.11.centre", params, VIOLATION, {"not_central": central})
    type_one, type_two = centre_words(S, rng)
    fixed = list(S.span([S.basis(1), S.basis(2)]))
    try:
        cw = zariski.centre_witness(S, gamma, type_one, type_two, fixed, 4)
    except oligo.BudgetExceeded as exc:
        return Check("acceptance.11.centre", params, INCONCLUSIVE, {"budget": str(exc)})
    problems = []
    if not S.is_partial_iso(cw.delta.fwd):
        problems.append("delta is not a partial automorphism")
    if any(cw.delta(x) != gamma(x) for x in fixed):
        problems.append("delta moves away from gamma on the base")
    for k, (w, r) in enumerate(zip(type_one, cw.type_one)):
        if not zariski.satisfies_at(w, cw.delta, r["point"]):
            problems.append(f"type I word {k}")
    for k, (w, r) in enumerate(zip(type_two, cw.type_two)):
        if not zariski.satisfies_at(w, cw.delta, r["point"]):
            problems.append(f"type II word {k}")
    stats = {"generators": len(zariski.vector_generators(S, 4)), "points": 3 ** 4,
             "type_one": len(cw.type_one), "type_two": len(cw.type_two),
             "delta_domain": len(cw.delta.fwd), "base": len(cw.base)}
    return Check("acceptance.11.centre", params, VIOLATION if problems else OK,
                 {"problems": problems} if problems else None, stats)


# -- 12: sinks -----------------------------------------------------------------------


def criterion_sink(seed: int, quick: bool = False) -> Check:
    S = oligo.VecFq(2, 5)
    depth, samples = (10, 3) if quick else (20, 10)
    c = indep.sink_check(S, indep.even_span(S), indep.empty_closure(S), k=1, depth=depth,
                         samples=samples, seed=derive_seed(seed, "sink"))
    c.name = "acceptance.12.sink"
    return c


CRITERIA = (
    criterion_minus, criterion_amalgam, criterion_pinching, criterion_spreading,
    criterion_O, criterion_containments, criterion_separation, criterion_acl,
    criterion_axioms, criterion_reachability, criterion_centre, criterion_sink,
)


def run_suite(seed: int, quick: bool = False, inject: str | None = None,
              only: set[int] | None = None, on_done: Callable | None = None) -> list[Check]:
    """Run the criteria (optionally a subset by number) and return their
    checks sorted by name; ``on_done(check, ms)`` sees each as it finishes."""
    out = []
    for k, fn in enumerate(CRITERIA, start=1):
        if only is not None and k not in only:
            continue
        t = time.perf_counter()
        c = fn(seed, quick, inject) if fn is criterion_minus else fn(seed, quick)
        if on_done is not None:
            on_done(c, round((time.perf_counter() - t) * 1000))
        out.append(c)
    return sorted(out, key=lambda c: c.name)
