from __future__ import annotations

import itertools

import pytest
from gmpy2 import mpq as Q

from homlab.embed import ForthEmbedding, Identity, spreading_pair
from homlab.monoid import make_monoid
from homlab.oligo import CopiesKn, PreconditionFailed, PureSet, VecFq, random_element
from homlab.rng import SplitMix64
from homlab.urysohn import Generator
from homlab.zariski import (IDENTITY, O, W, Z, InequalityWord, MalformedWord, NotCentral, NotFree,
                            ParameterViolation, Scalar, Verdict, WordType, central_candidates,
                            centre_witness, check_central, check_containments,
                            check_O_characterization, classify_inequality, evaluate,
                            free_sequence_step, member_bounded, random_linear, random_word,
                            satisfies_at, solve_type_II, verify_free)

N = make_monoid("q_nonneg")


def gen(n=12):
    return Generator(N).grow_to(n)


def test_identity_in_W_and_O():
    g = gen()
    assert member_bounded(W(3, 3, Q(1, 4)), Identity(g), 5).verdict is Verdict.YES
    assert member_bounded(O(3, Q(1, 4)), Identity(g), 5).verdict is Verdict.YES


def test_far_image_is_inconclusive_for_O():
    g = gen()
    far = g.realize({0: Q(5)})
    s = ForthEmbedding(g, {0: far})
    assert all(g.d(y, 0) >= Q(1, 2) for y in s.image())
    assert member_bounded(O(0, Q(1, 2)), s, 0).verdict is Verdict.INCONCLUSIVE


def test_W_can_say_no():
    g = gen()
    far = g.realize({0: Q(5)})
    s = ForthEmbedding(g, {0: far})
    assert member_bounded(W(0, 0, Q(1)), s, 3).verdict is Verdict.NO


def test_O_characterization_small_run():
    for kind in ("q_nonneg", "q_unit_trunc"):
        g = Generator(make_monoid(kind)).run(120)
        c = check_O_characterization(g, 0, Q(1, 2), 6, 20, 1)
        assert c.status == "ok" and c.stats["violations"] == 0
        # the identity sample lands in both descriptions
        assert c.stats["ball_found"] >= 1 and c.stats["split_found"] >= 1


def test_Z_membership_when_s_fixes_centre_image():
    g = gen()
    a, b = 0, 3
    sigma, theta = spreading_pair(g, a, Q(1))
    s = ForthEmbedding(g, {a: b})
    assert member_bounded(W(a, b, Q(1, 8)), s, 5)
    z = member_bounded(Z(b, Q(1, 8), Q(1, 8), sigma, theta), s, 5)
    assert z.verdict is Verdict.YES
    assert g.d(z.witness["s(c)"], b) < Q(1, 8)


def test_containments_small_run():
    g = Generator(N).run(150)
    c = check_containments(g, 0, 3, Q(1, 8), Q(1, 8), Q(1, 4), 6, 20, 2)
    assert c.stats["violations"] == 0 and c.status != "violation"
    assert c.stats["second_checked"] > 0


def test_containment_parameters():
    g = gen()
    with pytest.raises(ParameterViolation):
        check_containments(g, 0, 1, Q(1, 4), Q(1, 4), Q(1, 4), 1, 1, 0)
    with pytest.raises(ParameterViolation):
        check_containments(g, 0, 1, Q(1, 4), Q(1, 8), Q(1), 1, 1, 0)


def _word(n, m):
    return InequalityWord([IDENTITY] * (n + 1), [IDENTITY] * (m + 1))


def test_classification():
    assert classify_inequality(_word(2, 2)) is WordType.I
    assert classify_inequality(_word(2, 1)) is WordType.II
    assert classify_inequality(_word(0, 0)) is WordType.I
    with pytest.raises(MalformedWord):
        classify_inequality(_word(1, 2))


def test_evaluate_order():
    S = VecFq(2, 3)
    add1 = random_linear(S, 3, SplitMix64(1))
    w = InequalityWord([add1, IDENTITY], [IDENTITY])
    trace = []
    assert evaluate(w.left, IDENTITY, 2, trace) == add1(2) and trace == [2]


def test_free_sequence_grows_and_stays_free():
    S = VecFq(2, 6)
    rng = SplitMix64(4)
    fs = [(random_linear(S, 6, rng), random_linear(S, 6, rng)) for _ in range(4)]
    seq = free_sequence_step(S, fs, [], (), ())
    for _ in range(3):
        seq = free_sequence_step(S, fs, seq, (), ())
    assert len(seq) == 4
    verify_free(S, fs, seq, (), ())
    seen = []
    for f, a in zip(fs, seq):
        x = f[0](a[0])
        assert not S.in_acl(seen, x)
        seen.extend([x, f[1](a[1])])


def test_free_sequence_rejects_closure_link():
    S = VecFq(2, 3)
    fs = [(IDENTITY, IDENTITY)] * 3
    e1 = S.basis(1)
    with pytest.raises(NotFree):
        verify_free(S, fs, [(e1, e1), (e1, e1)], (), ())


def test_type_II_pure_set():
    P = PureSet(6)
    g = random_element(P, rng=SplitMix64(1))
    w = InequalityWord([g, IDENTITY], [IDENTITY])
    sol = solve_type_II(P, w, {})
    assert satisfies_at(w, sol.delta, sol.point)
    assert sol.lhs != sol.rhs
    assert sol.lhs == g(sol.delta(sol.point)) and sol.rhs == sol.point
    # brute force over permutations of a small block agrees that solutions exist
    block = list(range(4))
    assert any(g(p[x]) != x for p in itertools.permutations(block) for x in block)


def test_type_II_vector_space_with_fixed_plane():
    S = VecFq(3, 4)
    rng = SplitMix64(9)
    w = random_word(S, 2, 1, 4, rng)
    plane = S.span([S.basis(1), S.basis(2)])
    sol = solve_type_II(S, w, {x: x for x in plane})
    assert S.dim <= 8
    assert all(sol.delta(x) == x for x in plane)
    assert satisfies_at(w, sol.delta, sol.point)
    assert S.is_partial_iso(sol.delta.fwd)


def test_type_II_rejects_type_I():
    with pytest.raises(PreconditionFailed):
        solve_type_II(PureSet(4), _word(1, 1), {})


def test_scalar_is_central_and_solves_type_I():
    S = VecFq(3, 4)
    gamma = Scalar(S, 2)
    assert check_central(S, gamma, 4) is None
    assert [g.c for g in central_candidates(S, 4)] == [2]
    rng = SplitMix64(2)
    found = 0
    while found < 5:
        w = random_word(S, 1, 1, 4, rng)
        xs = [x for x in range(81) if satisfies_at(w, IDENTITY, x)]
        if not xs:
            continue
        found += 1
        assert satisfies_at(w, gamma, xs[0])


def test_copies_centre():
    assert central_candidates(CopiesKn(3, 3), 3) == []
    cands = central_candidates(CopiesKn(2, 3), 3)
    assert [c.sigma for c in cands] == [[1, 0]]


def test_centre_witness_rejects_non_central():
    S = VecFq(3, 3)
    rng = SplitMix64(3)
    g = random_linear(S, 3, rng)
    while check_central(S, g, 3) is None:
        g = random_linear(S, 3, rng)
    with pytest.raises(NotCentral):
        centre_witness(S, g, [], [], [], 3)
