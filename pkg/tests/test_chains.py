from __future__ import annotations

import pytest

from homlab.chains import (Chain, DomainMismatch, NotAclClosed, chain_membership_witness,
                           change_chain, closed_tuple, commutation_check, independent_chain_from,
                           intersect_chains, is_independent_chain, links_match,
                           reachability_check, skip_terms, stabiliser_product,
                           subchain_lift_check)
from homlab.indep import algebraic
from homlab.oligo import Identity, PreconditionFailed, PureSet, VecFq
from homlab.rng import SplitMix64


@pytest.fixture
def vec():
    S = VecFq(2, 5)
    e = [S.basis(i + 1) for i in range(5)]
    A = closed_tuple(S, [e[0]])
    c = [closed_tuple(S, [e[0], x]) for x in (e[1], e[2], S.add(e[1], e[2]), e[3], e[4])]
    return S, e, A, c


def test_identity_is_witnessed_by_the_chain_itself(vec):
    S, e, A, c = vec
    C = Chain(c[:3], True)
    res = chain_membership_witness(S, C, Identity())
    assert res and res.chain.tuples == C.tuples


def test_short_chains_decided_exactly(vec):
    S, e, A, c = vec
    assert chain_membership_witness(S, Chain([c[0]]), Identity()).status == "found"
    # translating by e3 moves c0 off itself, so it cannot lie in N_{c0}
    res = chain_membership_witness(S, Chain([c[0]]), lambda x: S.add(x, e[2]) if x else 0)
    assert res.status == "none"


def test_domain_mismatch(vec):
    S, e, A, c = vec
    with pytest.raises(DomainMismatch):
        chain_membership_witness(S, Chain(c[:2]), {0: 0})


def test_reachability_over_A(vec):
    S, e, A, c = vec
    check = reachability_check(S, A, Chain(c[:3], True), 20, seed=1)
    assert check.status == "ok"
    assert check.stats["found"] == 20 and check.stats["converse_ok"] == 20


def test_reachability_rejects_bad_chain(vec):
    S, e, A, c = vec
    wide = closed_tuple(S, [e[0], e[1], e[2]])
    with pytest.raises(PreconditionFailed):
        reachability_check(S, A, Chain([c[0], wide, c[1]], True), 1)


def test_not_acl_closed(vec):
    S, e, A, c = vec
    with pytest.raises(NotAclClosed):
        Chain([(e[0],), c[0]], True).check(S)


def test_change_chain_same_chain_is_identity(vec):
    S, e, A, c = vec
    C = Chain(c[:3], True)
    g = change_chain(S, C, C, A)
    assert g.apply(c[0]) == c[0]


def test_change_chain_length_one():
    S = PureSet(8)
    C = Chain([(0, 1), (1, 2)])
    D = Chain([(3, 1), (1, 2)])
    g = change_chain(S, C, D)
    assert g.apply((0, 1)) == (3, 1) and g(2) == 2


def test_change_chain_length_two(vec):
    S, e, A, c = vec
    C = Chain(c[:3], True)
    D = Chain([c[3], c[1], c[2]], True)
    assert links_match(S, C, D, A)
    g = change_chain(S, C, D, A)
    assert g.apply(c[0]) == D[0] and all(g(a) == a for a in A)


def test_intersect_chains_nested_and_pure():
    S = PureSet(8)
    E, g = intersect_chains(S, {1, 2}, {1}, {1})
    assert E == {1}
    E, g = intersect_chains(S, {1, 2}, {1}, {2})
    assert 2 not in E and E & {1, 2} == set()


def test_intersect_chains_vector(vec):
    S, e, A, c = vec
    E, g = intersect_chains(S, frozenset(c[1]), frozenset(A), frozenset(c[0]))
    assert E & frozenset(c[1]) == frozenset(A)
    assert S.acl(E) == E


def test_skip_terms_trivial(vec):
    S, e, A, c = vec
    r = skip_terms(S, Chain([c[0]] * 3), A=c[0])
    assert r.chain.tuples == [c[0], c[0]]


def test_skip_terms_case_one(vec):
    S, e, A, c = vec
    C = Chain(c[:5], True)
    r = skip_terms(S, C, A=A, samples=5, seed=2)
    assert r.chain.length == 2
    assert all(r.g(a) == a for a in A)
    assert r.spot_checks["found"] == 5


def test_skip_terms_pure_set_case_two():
    S = PureSet(10)
    C = Chain([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    r = skip_terms(S, C, delta=lambda x: True)
    D = r.chain
    assert D.length == 2 and D[2] == C[4]
    # the rewritten odd terms are disjoint from their outer neighbours
    assert not set(r.rewritten[0]) & set(r.rewritten[2]) - set(r.rewritten[1])


def test_independent_chain(vec):
    S, e, A, c = vec
    rel = algebraic(S)
    C = Chain([c[0], c[1], c[2], closed_tuple(S, e[:3])], True)
    out = independent_chain_from(S, C, A, rel)
    assert is_independent_chain(S, out, rel)
    assert links_match(S, C, out, A) and out[out.length] == C[C.length]
    assert independent_chain_from(S, Chain(c[:2], True), A, rel).tuples == c[:2]


def test_independent_chain_over_empty_base():
    S = VecFq(2, 4)
    rel = algebraic(S)
    e = [S.basis(i + 1) for i in range(4)]
    C = Chain([closed_tuple(S, [e[0]]), closed_tuple(S, [e[0], e[1]]), closed_tuple(S, [e[1]])], True)
    out = independent_chain_from(S, C, (), rel)
    assert rel(out[0], out[2], out[1])


def test_subchain_and_commutation(vec):
    S, e, A, c = vec
    C = Chain(c[:5], True)
    assert subchain_lift_check(S, C, [0, 2, 4], 4).status == "ok"
    assert commutation_check(S, c[0], 4).stats.get("violations", 0) == 0


def test_stabiliser_product_fixes_last_term(vec):
    S, e, A, c = vec
    C = Chain(c[:3], True)
    s = stabiliser_product(S, C, SplitMix64(5))
    # the rightmost factor fixes c_k, the others only what the chain forces
    assert chain_membership_witness(S, C, s).status == "found"


def test_json_roundtrip(vec):
    S, e, A, c = vec
    C = Chain(c[:3], True)
    assert Chain.from_json(S, C.to_json(S)) == C
