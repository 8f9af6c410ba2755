"""Basic open sets of embedding monoids, and inequality words over
oligomorphic groups.

The metric half checks membership in the W, O and Z sets for lazily explored
embeddings of a Urysohn generator.  Membership in O and Z is existential over
the image, so a finite exploration can only ever say "yes" or "don't know".

The group half builds solutions of inequalities whose left side uses the
variable more often than the right side, by growing a free sequence of points
whose images keep escaping the algebraic closure of everything seen so far.
"""

from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

from .embed import (
    Composite,
    Embedding,
    ForthEmbedding,
    GeneratorMismatch,
    pinching_pair,
    sample_embedding,
    spreading_pair,
)
from .monoid import Dist
from .oligo import (
    BudgetExceeded,
    CopiesKn,
    CopyPermutation,
    LinearMap,
    OligoError,
    PartialAut,
    PreconditionFailed,
    Scalar,
    Structure,
    TableMap,
    VecFq,
)
from .report import INCONCLUSIVE, OK, VIOLATION, Check, tally
from .rng import SplitMix64, derive_seed
from .urysohn import Generator


class ZariskiError(ValueError):
    pass


class ParameterViolation(ZariskiError):
    pass


class MalformedWord(ZariskiError):
    pass


class NotFree(OligoError):
    pass


class NotCentral(OligoError):
    pass


class Verdict(enum.Enum):
    YES = "yes"
    NO = "no"
    INCONCLUSIVE = "inconclusive"


# -- open sets ------------------------------------------------------------------------


@dataclass(frozen=True)
class W:
    """Embeddings s with d(s(a), b) < eps."""
    a: int
    b: int
    eps: Dist


@dataclass(frozen=True)
class O:
    """Embeddings whose image meets the open eps-ball around a."""
    a: int
    eps: Dist


@dataclass(frozen=True)
class Z:
    """Embeddings s with s.sigma meeting B_zeta(a) and s.theta meeting B_eta(a)."""
    a: int
    zeta: Dist
    eta: Dist
    sigma: Embedding
    theta: Embedding


OpenSetSpec = Union[W, O, Z]


@dataclass
class Membership:
    verdict: Verdict
    witness: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.verdict is Verdict.YES


def _positive(m, *values) -> None:
    for v in values:
        m.check(v)
        if v == m.zero:
            raise ParameterViolation("radii must be nonzero")


def _search_ball(e: Embedding, centre: int, radius: Dist, depth: int) -> int | None:
    """A point p explored by ``e`` (within ``depth`` further advances) whose
    image is within ``radius`` of ``centre``."""
    g = e.gen
    for p in list(e.order):
        if g.d(e.pairs[p], centre) < radius:
            return p
    for _ in range(depth):
        p = e.advance()
        if g.d(e.pairs[p], centre) < radius:
            return p
    return None


def member_bounded(spec: OpenSetSpec, s: Embedding, depth: int) -> Membership:
    g = s.gen
    if isinstance(spec, W):
        g.monoid.check(spec.eps)
        image = s.apply_at(spec.a)
        dist = g.d(image, spec.b)
        verdict = Verdict.YES if dist < spec.eps else Verdict.NO
        return Membership(verdict, {"s(a)": image})
    if isinstance(spec, O):
        g.monoid.check(spec.eps)
        p = _search_ball(s, spec.a, spec.eps, depth)
        if p is None:
            return Membership(Verdict.INCONCLUSIVE)
        return Membership(Verdict.YES, {"point": p, "image": s.pairs[p]})
    if isinstance(spec, Z):
        if spec.sigma.gen is not g or spec.theta.gen is not g:
            raise GeneratorMismatch("Z parameters live on another generator")
        left = Composite(s, spec.sigma)
        c = _search_ball(left, spec.a, spec.zeta, depth)
        if c is None:
            return Membership(Verdict.INCONCLUSIVE)
        right = Composite(s, spec.theta)
        e = _search_ball(right, spec.a, spec.eta, depth)
        if e is None:
            return Membership(Verdict.INCONCLUSIVE)
        return Membership(Verdict.YES, {
            "c": spec.sigma.apply_at(c), "d": spec.theta.apply_at(e),
            "s(c)": left.pairs[c], "s(d)": right.pairs[e]})
    raise TypeError(f"not an open set spec: {spec!r}")


def check_O_characterization(g: Generator, a: int, eps: Dist, samples: int,
                             depth: int, seed: int) -> Check:
    """Sample embeddings s and compare "s meets B_eps(a)" with "phi.s differs
    from psi.s" for a pinching pair (phi, psi) at a.

    Each side is searched on its own; a decided answer on either side is
    cross-examined at its witness point, so a violation is a concrete point
    where the two descriptions disagree.
    """
    m = g.monoid
    params = {"a": a, "eps": m.to_json(eps), "samples": samples, "depth": depth, "seed": seed}
    found_ball = found_split = inconclusive = 0
    violations = []
    for i in range(samples):
        h = g.fork()
        phi, psi = pinching_pair(h, a, eps)
        if i == 0:
            s = _IdentityOn(h)
        else:
            s = sample_embedding(h, derive_seed(seed, i), 0)
        ball = member_bounded(O(a, eps), s, depth)
        split = None
        left, right = Composite(phi, s), Composite(psi, s)
        for k in range(depth):
            p = s.order[k] if k < len(s.order) else s.advance()
            if left.apply_at(p) != right.apply_at(p):
                split = p
                break
        if ball:
            found_ball += 1
            p = ball.witness["point"]
            if phi.apply_at(s.pairs[p]) == psi.apply_at(s.pairs[p]):
                violations.append({"sample": i, "point": p, "side": "ball"})
        if split is not None:
            found_split += 1
            if not h.d(s.pairs[split], a) < eps:
                violations.append({"sample": i, "point": split, "side": "split"})
        if not (ball and split is not None):
            inconclusive += 1
    stats = {"samples": samples, "ball_found": found_ball, "split_found": found_split,
             "inconclusive": inconclusive, "violations": len(violations)}
    status = VIOLATION if violations else OK
    return Check("zariski.O", params, status, violations[0] if violations else None, stats)


class _IdentityOn(ForthEmbedding):
    """Identity embedding that still explores in point order."""

    def __init__(self, gen: Generator):
        super().__init__(gen, rule="identity")

    def _map(self, p: int) -> int:
        return p


def check_containments(g: Generator, a: int, b: int, zeta: Dist, eta: Dist, eps: Dist,
                       samples: int, depth: int, seed: int) -> Check:
    """W(a,b,zeta) within Z(b,zeta,eta) within W(a,b,eps+zeta), on samples.

    The spreading pair is taken at ``a``: the inclusions need a in both
    images, which is what the pair provides at its centre.  Odd samples are
    steered so that s(a) lands near b.
    """
    m = g.monoid
    _positive(m, zeta, eta, eps)
    if zeta > eta:
        raise ParameterViolation("need zeta <= eta")
    if m.plus(zeta, eta) > eps:
        raise ParameterViolation("need zeta + eta <= eps")
    wide = m.plus(eps, zeta)
    params = {"a": a, "b": b, "zeta": m.to_json(zeta), "eta": m.to_json(eta),
              "eps": m.to_json(eps), "samples": samples, "depth": depth, "seed": seed}
    counts = {"in_W": 0, "in_Z": 0, "first_unresolved": 0, "second_checked": 0}
    violations = []
    for i in range(samples):
        h = g.fork()
        sigma, theta = spreading_pair(h, a, eps)
        rng = SplitMix64(derive_seed(seed, i))
        if i % 2:
            near = h.realize({b: m.standard_gap(zeta, m.zero)})
            s = ForthEmbedding(h, {a: near}, rng=rng, rule="sample")
        else:
            s = ForthEmbedding(h, rng=rng, rule="sample")
        in_w = member_bounded(W(a, b, zeta), s, depth)
        in_z = member_bounded(Z(b, zeta, eta, sigma, theta), s, depth)
        if in_w:
            counts["in_W"] += 1
            if not in_z:
                counts["first_unresolved"] += 1
        if in_z:
            counts["in_Z"] += 1
            counts["second_checked"] += 1
            bad = _replay_second(h, s, a, b, eps, zeta, eta, wide, in_z.witness)
            if bad is not None:
                bad["sample"] = i
                violations.append(bad)
    counts["violations"] = len(violations)
    status = tally(len(violations), counts["first_unresolved"])
    return Check("zariski.containments", params, status,
                 violations[0] if violations else None, counts)


def _replay_second(h: Generator, s: Embedding, a, b, eps, zeta, eta, wide, w: dict) -> dict | None:
    """Walk the triangle chain behind the second inclusion on a Z witness."""
    m = h.monoid
    c, d = w["c"], w["d"]
    sc, sd = w["s(c)"], w["s(d)"]
    steps = {
        "d(s(c),b)<zeta": h.d(sc, b) < zeta,
        "d(s(d),b)<eta": h.d(sd, b) < eta,
        "d(c,d)<eps": h.d(c, d) < eps,
        "d(a,c)<eps": h.d(a, c) < eps,
    }
    sa = s.apply_at(a)
    steps["d(s(a),b)<eps+zeta"] = h.d(sa, b) < wide
    if all(steps.values()):
        return None
    failed = [k for k, ok in steps.items() if not ok]
    return {"failed": failed, "c": c, "d": d, "s(a)": sa,
            "distances": {"s(a),b": m.to_json(h.d(sa, b))}}


# -- inequality words ----------------------------------------------------------------


class WordType(enum.Enum):
    I = "I"
    II = "II"


@dataclass
class InequalityWord:
    """lambda_n s ... s lambda_0 != eta_m s ... s eta_0.

    ``left`` lists (lambda_n, ..., lambda_0) and ``right`` lists
    (eta_m, ..., eta_0); coefficients are group elements (callables with a
    ``preimage``).  The rightmost coefficient is applied first.
    """

    left: list
    right: list

    @property
    def n(self) -> int:
        return len(self.left) - 1

    @property
    def m(self) -> int:
        return len(self.right) - 1

    def lam(self, i: int):
        return self.left[self.n - i]

    def eta(self, i: int):
        return self.right[self.m - i]


def classify_inequality(w: InequalityWord) -> WordType:
    if not w.left or not w.right or w.n < w.m:
        raise MalformedWord(f"need n >= m >= 0, got n={w.n}, m={w.m}")
    return WordType.I if w.n == w.m else WordType.II


def evaluate(coeffs: Sequence, s, x, trace: list | None = None):
    """Apply coeffs[-1], then s, then coeffs[-2], ..., ending with coeffs[0].
    Points fed to ``s`` are appended to ``trace``."""
    x = coeffs[-1](x)
    for f in reversed(coeffs[:-1]):
        if trace is not None:
            trace.append(x)
        x = f(s(x))
    return x


def satisfies_at(w: InequalityWord, s, x) -> bool:
    return evaluate(w.left, s, x) != evaluate(w.right, s, x)


class _Identity:
    def __call__(self, x):
        return x

    def preimage(self, y):
        return y


IDENTITY = _Identity()


# -- free sequences ------------------------------------------------------------------


def _closure_test(S: Structure, base: Sequence) -> Callable[[object], bool]:
    return S.closure_test(list(dict.fromkeys(base)))


def _could_escape(f, x, bad) -> bool:
    if isinstance(f, PartialAut):
        return f.can_avoid(x, bad)
    return not bad(f(x))


def _apply_escaping(f, x, bad):
    if isinstance(f, PartialAut):
        return f.extend_avoiding(x, bad)
    return f(x)


def _pair_image(f: tuple, a: tuple) -> tuple:
    return (f[0](a[0]), f[1](a[1]))


@dataclass
class FreeSequence:
    """Points a_0, a_1, ... (pairs) with a_{i+1} = delta(f_i a_i) and each
    f_{i+1} a_{i+1} escaping acl(f_0 a_0, ..., f_i a_i, b)."""

    S: Structure
    fs: list
    b: tuple
    b2: tuple
    seq: list
    delta: PartialAut

    def images(self) -> list:
        return [_pair_image(self.fs[i], a) for i, a in enumerate(self.seq)]

    def history(self) -> list:
        pts = list(self.b)
        for x in self.images():
            pts.extend(x)
        return pts


def _delta_for(S: Structure, fs, seq, b, b2) -> PartialAut:
    if len(b) != len(b2):
        raise NotFree("b and b' differ in length")
    mapping = dict(zip(b, b2))
    for i in range(len(seq) - 1):
        x = _pair_image(fs[i], seq[i])
        for u, v in zip(x, seq[i + 1]):
            if mapping.setdefault(u, v) != v:
                raise NotFree(f"delta is not a function at link {i}")
    try:
        return PartialAut(S, mapping)
    except PreconditionFailed:
        raise NotFree("no automorphism carries the links") from None


def verify_free(S: Structure, fs, seq, b, b2) -> PartialAut:
    """Check both freeness conditions; return the linking map delta."""
    delta = _delta_for(S, fs, seq, b, b2)
    seen = list(b)
    for i, a in enumerate(seq):
        x = _pair_image(fs[i], a)
        if S.in_acl(seen, x[0]):
            raise NotFree(f"link {i} lies in the closure of its predecessors")
        seen.extend(x)
    return delta


def free_sequence_step(S: Structure, fs: Sequence, seq: Sequence, b: Sequence,
                       b2: Sequence, budget: int = 256) -> list:
    """Extend a free sequence by one pair.

    The new pair is delta(f_n a_n), except that delta's value on the first
    coordinate is chosen (among at most ``budget`` candidates) so that
    f_{n+1} sends it outside the closure of all earlier images.
    """
    b, b2 = tuple(b), tuple(b2)
    seq = [tuple(a) for a in seq]
    if len(fs) < len(seq) + 1:
        raise PreconditionFailed("need a coefficient for the new link")
    if not seq:
        e0 = _pick_start(S, fs[0], b, budget)
        return [(e0, e0)]
    delta = verify_free(S, fs, seq, b, b2)
    out = _extend_free(S, fs, seq, b, delta, budget)
    verify_free(S, fs, out, b, b2)
    return out


def _pick_start(S: Structure, f0, b, budget: int):
    bad = _closure_test(S, b)
    taken = set(b)
    tried = 0
    for e in S.universe:
        if tried >= budget:
            break
        if e in taken:
            continue
        tried += 1
        if _could_escape(f0[0], e, bad):
            _apply_escaping(f0[0], e, bad)
            return e
    e = S.fresh({x: x for x in b}, S.outside(b))
    if e is not None and _could_escape(f0[0], e, bad):
        _apply_escaping(f0[0], e, bad)
        return e
    raise BudgetExceeded("no starting point escapes acl(b)")


def _extend_free(S: Structure, fs, seq, b, delta: PartialAut, budget: int) -> list:
    n = len(seq) - 1
    seen = list(b)
    for i, a in enumerate(seq):
        seen.extend(_pair_image(fs[i], a))
    bad = _closure_test(S, seen)
    x = _pair_image(fs[n], seq[n])
    f_next = fs[n + 1][0]
    chosen = None
    if x[0] in delta.fwd:
        if _could_escape(f_next, delta.fwd[x[0]], bad):
            chosen = delta.fwd[x[0]]
    else:
        for k, c in enumerate(S._existing(delta.fwd, x[0])):
            if k >= budget:
                break
            if _could_escape(f_next, c, bad):
                chosen = c
                break
        if chosen is None:
            c = S.fresh(delta.fwd, x[0])
            if c is not None and _could_escape(f_next, c, bad):
                chosen = c
    if chosen is None:
        raise BudgetExceeded(f"no escaping image for link {n + 1}")
    delta.fwd[x[0]] = chosen
    delta.bwd[chosen] = x[0]
    _apply_escaping(f_next, chosen, bad)
    second = delta(x[1])
    fs[n + 1][1](second)
    return list(seq) + [(chosen, second)]


# -- type II words -------------------------------------------------------------------


@dataclass
class TypeIISolution:
    delta: PartialAut
    point: object
    lhs: object
    rhs: object
    sequence: list


def _coefficient_pairs(w: InequalityWord) -> list:
    return [(w.lam(i), w.eta(i) if i <= w.m else IDENTITY) for i in range(w.n + 1)]


def solve_type_II(S: Structure, w: InequalityWord, nbhd: Mapping, budget: int = 256,
                  delta: PartialAut | None = None) -> TypeIISolution:
    """A group element agreeing with ``nbhd`` and satisfying the word.

    A free sequence over (dom nbhd, nbhd(dom)) is grown one link per
    coefficient; since the left side is longer, its last value escapes the
    closure containing the right side's value, so the two differ.  Passing
    ``delta`` extends that element instead of a fresh copy of ``nbhd``.
    """
    if classify_inequality(w) is not WordType.II:
        raise PreconditionFailed("type I word")
    b = tuple(nbhd)
    b2 = tuple(nbhd[x] for x in b)
    fs = _coefficient_pairs(w)
    if delta is None:
        delta = PartialAut(S, nbhd)
    elif any(delta(x) != nbhd[x] for x in b):
        raise PreconditionFailed("delta disagrees with the neighbourhood")
    # the links must respect everything delta already does
    base = tuple(delta.fwd)
    base2 = tuple(delta.fwd[x] for x in base)
    seq = free_sequence_step(S, fs, [], base, base2, budget)
    for _ in range(w.n):
        seq = _extend_free(S, fs, seq, base, delta, budget)
    e0 = seq[0][0]
    trace_l: list = []
    lhs = evaluate(w.left, delta, e0, trace_l)
    rhs = evaluate(w.right, delta, e0)
    if lhs == rhs:
        raise BudgetExceeded("constructed sequence does not separate the sides")
    return TypeIISolution(delta, e0, lhs, rhs, seq)


# -- the centre ----------------------------------------------------------------------


def vector_generators(S: VecFq, dim: int) -> list:
    """Generators of GL(dim, q): elementary transvections plus diagonal scalings and swaps."""
    q = S.q
    e = [S.basis(i) for i in range(1, dim + 1)]
    gens = []
    for i in range(dim):
        for j in range(dim):
            if i != j:
                cols = list(e)
                cols[i] = S.add(e[i], e[j])
                gens.append(LinearMap(S, cols))
                cols = list(e)
                cols[i], cols[j] = e[j], e[i]
                gens.append(LinearMap(S, cols))
        for c in range(2, q):
            cols = list(e)
            cols[i] = S.scale(c, e[i])
            gens.append(LinearMap(S, cols))
    return gens


def copies_generators(S: CopiesKn, copies: int) -> list:
    """Transpositions inside each copy, and swaps of neighbouring copies."""
    n = S.n
    gens = []
    for c in range(copies):
        for i, j in itertools.combinations(range(n), 2):
            x, y = c * n + i, c * n + j
            gens.append(TableMap({x: y, y: x}))
    for c in range(copies - 1):
        table = {}
        for i in range(n):
            x, y = c * n + i, (c + 1) * n + i
            table[x], table[y] = y, x
        gens.append(TableMap(table))
    return gens


def truncation(S: Structure, size: int) -> tuple[list, list]:
    """Points and automorphism generators of a finite truncation: dimension
    ``size`` for vector spaces, ``size`` copies for K_n copies."""
    if isinstance(S, VecFq):
        S.grow_to(size)
        return list(range(S.q ** size)), vector_generators(S, size)
    if isinstance(S, CopiesKn):
        while S.copies < size:
            S.grow()
        return list(range(size * S.n)), copies_generators(S, size)
    raise PreconditionFailed(f"no generator set for {S.kind}")


def check_central(S: Structure, gamma, size: int) -> dict | None:
    """The first (generator, point) where gamma fails to commute, or None."""
    points, gens = truncation(S, size)
    for k, g in enumerate(gens):
        for x in points:
            if gamma(g(x)) != g(gamma(x)):
                return {"generator": k, "point": S.fmt(x)}
    return None


def central_candidates(S: Structure, size: int) -> list:
    """Non-identity central elements among scalars (vector spaces) or
    uniform within-copy permutations (K_n copies)."""
    if isinstance(S, VecFq):
        pool = [Scalar(S, c) for c in range(2, S.q)]
    elif isinstance(S, CopiesKn):
        pool = [CopyPermutation(S, p) for p in itertools.permutations(range(S.n))
                if list(p) != list(range(S.n))]
    else:
        pool = []
    return [g for g in pool if check_central(S, g, size) is None]


def power(f, k: int):
    def apply(x):
        for _ in range(k):
            x = f(x)
        return x
    return apply


@dataclass
class CentreWitness:
    delta: PartialAut
    base: list
    type_one: list
    type_two: list


def centre_witness(S: Structure, gamma, type_one: Sequence[InequalityWord],
                   type_two: Sequence[InequalityWord], base: Iterable, size: int,
                   budget: int = 256) -> CentreWitness:
    """A group element close to gamma that solves every given word.

    Type I words are checked for gamma through gamma^n (lambda_n ... lambda_0)
    on the truncation; the points where gamma is used there join ``base`` so
    that anything agreeing with gamma on ``base`` solves them as well.  Type II
    words are then solved one after another by a single element delta.
    """
    bad = check_central(S, gamma, size)
    if bad is not None:
        raise NotCentral(bad)
    points, _ = truncation(S, size)
    base = list(dict.fromkeys(base))
    type_one_report = []
    for w in type_one:
        if classify_inequality(w) is not WordType.I:
            raise PreconditionFailed("expected a type I word")
        x = next((p for p in points if satisfies_at(w, IDENTITY, p)), None)
        if x is None:
            raise PreconditionFailed("identity does not satisfy a type I word")
        gn = power(gamma, w.n)
        trace: list = []
        lhs = evaluate(w.left, gamma, x, trace)
        rhs = evaluate(w.right, gamma, x, trace)
        same_l = lhs == gn(evaluate(w.left, IDENTITY, x))
        same_r = rhs == gn(evaluate(w.right, IDENTITY, x))
        if not (same_l and same_r and lhs != rhs):
            raise NotCentral({"word": len(type_one_report), "point": S.fmt(x)})
        base.extend(p for p in trace if p not in base)
        type_one_report.append({"point": x, "lhs": lhs, "rhs": rhs})
    delta = PartialAut(S, {x: gamma(x) for x in base})
    type_two_report = []
    for w in type_two:
        sol = solve_type_II(S, w, {x: gamma(x) for x in base}, budget, delta=delta)
        type_two_report.append({"point": sol.point, "lhs": sol.lhs, "rhs": sol.rhs})
    for w, r in zip(type_one, type_one_report):
        if not satisfies_at(w, delta, r["point"]):
            raise BudgetExceeded("delta lost a type I solution")
    for w, r in zip(type_two, type_two_report):
        if not satisfies_at(w, delta, r["point"]):
            raise BudgetExceeded("delta lost a type II solution")
    return CentreWitness(delta, base, type_one_report, type_two_report)


def random_linear(S: VecFq, k: int, rng: random.Random) -> LinearMap:
    while True:
        cols = [rng.randrange(1, S.q ** k) for _ in range(k)]
        if S.rank(cols) == k:
            return LinearMap(S, cols)


def random_word(S: VecFq, n: int, m: int, k: int, rng: random.Random) -> InequalityWord:
    return InequalityWord([random_linear(S, k, rng) for _ in range(n + 1)],
                          [random_linear(S, k, rng) for _ in range(m + 1)])
