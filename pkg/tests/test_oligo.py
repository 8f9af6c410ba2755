from __future__ import annotations

import itertools

import pytest
from gmpy2 import mpq as Q

from homlab.oligo import (AffineFq, BudgetExceeded, CopiesKn, DenseOrder, LengthMismatch,
                          LinearMap, PartialAut, PreconditionFailed, Product, PureSet,
                          RandomBipartite, RandomGraph, VecFq, _Relations, agreeing_pair,
                          brute_force_acl, extend_automorphism, image_disjoint_pair,
                          make_structure, neumann_witness, random_element, sim_class)
from homlab.rng import SplitMix64


def test_dense_order_acl_is_trivial():
    D = DenseOrder(8)
    assert D.acl([Q(3), Q(7)]) == {Q(3), Q(7)}


def test_vector_acl_against_orbits():
    S = VecFq(2, 4)
    T1 = list(S.universe)
    S.grow()
    T2 = list(S.universe)
    R = _Relations(T2, S.relations(T2))
    for v in (1, 5, 11):
        assert brute_force_acl(S, [v], T1, T2, R) == S.acl([v]) == {0, v}


def test_copies_acl_against_orbits():
    S = CopiesKn(3, 5)
    T1 = list(S.universe)
    S.grow()
    T2 = list(S.universe)
    a = 4
    assert S.acl([a]) == {3, 4, 5}
    assert brute_force_acl(S, [a], T1, T2) == {3, 4, 5}


def test_affine_acl_is_affine_span():
    A = AffineFq(2, 3)
    assert A.acl([]) == frozenset()
    assert A.acl([1, 2]) == {1, 2}
    assert A.acl([0, 1, 2]) == {0, 1, 2, 3}


def test_dense_orbits():
    D = DenseOrder(8)
    assert D.orbit_eq([Q(1), Q(2)], [Q(3), Q(7)])
    assert not D.orbit_eq([Q(1), Q(2)], [Q(2), Q(1)])
    with pytest.raises(LengthMismatch):
        D.orbit_eq([Q(1)], [])


def test_vector_orbit_matches_exhaustive_gl3():
    S = VecFq(2, 3)
    e1, e2 = S.basis(1), S.basis(2)
    assert S.orbit_eq([e1], [S.add(e1, e2)])
    # some invertible 3x3 matrix over F_2 sends e1 to e1+e2
    maps = [LinearMap(S, cols) for cols in itertools.permutations(range(1, 8), 3)
            if S.rank(list(cols)) == 3]
    assert len(maps) == 168
    assert any(g(e1) == S.add(e1, e2) for g in maps)
    # and none sends (e1, e2) to (e1, e1)
    assert not S.orbit_eq([e1, e2], [e1, e1])


def test_neumann_identity_when_nested():
    S = PureSet(6)
    g = neumann_witness(S, {1, 2}, {1}, {1, 2, 3})
    assert g(1) == 1 and g(2) == 2


def test_neumann_pure_set():
    S = PureSet(6)
    g = neumann_witness(S, {1}, {1, 2}, {1, 2, 3})
    assert g(1) == 1 and g(2) not in {1, 2, 3}


def test_neumann_vector_space():
    S = VecFq(2, 3)
    e = [S.basis(i) for i in (1, 2, 3)]
    C, D, B = S.span(e[:1]), S.span(e[:2]), S.span(e)
    g = neumann_witness(S, C, D, B)
    assert g.fixes(C)
    assert frozenset(g(d) for d in D) & B == C
    assert g(e[1]) not in B


def test_neumann_needs_closed_base():
    S = VecFq(2, 3)
    with pytest.raises(PreconditionFailed):
        neumann_witness(S, {1, 2}, {4}, {4})


def test_agreeing_pair_bipartite():
    S = RandomBipartite(10)
    left = [x for x in S.universe if S.side[x] == 0]
    a = next(x for x in S.universe if S.side[x] == 1)
    pair = agreeing_pair(S, lambda x: S.side[x] == 0 and x in left, a, 6)
    assert pair.alpha[a] != pair.beta[a]
    assert all(pair.beta[x] == pair.alpha[x] for x in pair.alpha if x in left)
    assert S.is_partial_iso(pair.beta)


def test_agreeing_pair_pure_set():
    S = PureSet(6)
    pair = agreeing_pair(S, lambda x: False, 2, 4)
    assert pair.alpha == {x: x for x in pair.alpha}
    assert pair.beta[2] != 2


def test_agreeing_pair_depth_one():
    S = PureSet(6)
    pair = agreeing_pair(S, lambda x: x == 0, 3, 1)
    assert set(pair.alpha) == {3} and pair.beta[3] != 3


def test_image_disjoint_pair_vector():
    S = VecFq(2, 4)
    X = S.span([S.basis(1)])
    pair = image_disjoint_pair(S, X, 8)
    assert set(pair.alpha.values()) & set(pair.beta.values()) <= X
    assert all(pair.beta[x] == x for x in X if x in pair.beta)


def test_image_disjoint_pair_pure_set():
    S = PureSet(6)
    pair = image_disjoint_pair(S, set(), 6)
    assert not set(pair.alpha.values()) & set(pair.beta.values())


def test_extend_automorphism_cases():
    S = PureSet(5)
    assert extend_automorphism(S, {}, 3) == {3: 3}
    D = DenseOrder(8)
    out = extend_automorphism(D, {Q(1): Q(2)}, Q(0))
    assert out[Q(0)] < 2 and out[Q(0)] == min(D.universe)
    V = VecFq(3, 2)
    e1, e2 = V.basis(1), V.basis(2)
    phi = {e1: e2}
    out = extend_automorphism(V, phi, V.scale(2, e1))
    assert out[V.scale(2, e1)] == V.scale(2, e2)
    out = extend_automorphism(V, phi, e2)
    assert V.rank([e2, out[e2]]) == 2


def test_partial_aut_and_products():
    S = VecFq(2, 3)
    with pytest.raises(PreconditionFailed):
        PartialAut(S, {1: 2, 2: 2})
    g = random_element(S, [1], SplitMix64(3))
    assert g(1) == 1
    x = g(2)
    p = Product([g])
    assert p.inverse()(x) == 2 and p.preimage(x) == 2
    assert (g * g)(1) == 1


def test_sim_class_and_make_structure():
    S = CopiesKn(3, 2)
    assert sim_class(S, 0) == {0, 1, 2}
    assert isinstance(make_structure("random_graph", size=5), RandomGraph)
    with pytest.raises(ValueError):
        make_structure("groups")
    with pytest.raises(ValueError):
        VecFq(4, 2)


def test_fresh_elements_stay_generic():
    S = VecFq(2, 2)
    y = S.fresh({1: 1}, 2)
    assert S.rank([1, y]) == 2 and S.dim == 3
    assert S.fresh({1: 1}, 1) is None


@pytest.mark.parametrize("kind", ["pure_set", "dense_order", "vec_fq", "affine_fq",
                                  "copies_kn", "random_graph", "random_bipartite"])
def test_candidates_are_partial_isos(kind):
    S = make_structure(kind)
    u = S.universe
    phi = {u[1]: u[1], u[2]: u[3]} if S.orbit_eq([u[1], u[2]], [u[1], u[3]]) else {u[1]: u[1]}
    for k, y in enumerate(S.candidates(phi, u[4])):
        assert S.is_partial_iso({**phi, u[4]: y})
        if k > 10:
            break


def test_fmt_parse_roundtrip():
    V = VecFq(3, 3)
    for x in V.universe:
        assert V.parse(V.fmt(x)) == x
    D = DenseOrder(4)
    D.grow()
    for x in D.universe:
        assert D.parse(D.fmt(x)) == x


def test_graph_clone_is_independent():
    G = RandomGraph(8)
    n = len(G.universe)
    H = G.clone()
    H.grow()
    assert len(H.universe) > n == len(G.universe)
    G.grow()
    assert G.universe == H.universe


def test_budget_errors():
    S = PureSet(3)
    with pytest.raises(BudgetExceeded):
        extend_automorphism(S, {0: 1}, 1, budget=0)
