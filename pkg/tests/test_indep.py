from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from homlab.chains import Chain, closed_tuple
from homlab.indep import (absorb, absorbing_config_check, alg_indep, algebraic, always,
                          axiom_suite, check_narrowness, empty_closure, even_depth, even_span,
                          everything, exchange_check, lovely_pair_check, modularity_check,
                          sink_check)
from homlab.chains import NotAclClosed
from homlab.oligo import (AffineFq, CopiesKn, DenseOrder, PreconditionFailed,
                          PureSet, VecFq)


@pytest.fixture
def v3():
    S = VecFq(2, 3)
    return S, [S.basis(i + 1) for i in range(3)]


def test_alg_indep_examples(v3):
    S, (e1, e2, e3) = v3
    assert alg_indep(S, [e1], [e2], [])
    assert not alg_indep(S, [e1], [S.add(e1, e2), e2], [])
    assert alg_indep(S, [e1], [e1, e2, e3], [e1])


def _brute_span(S, X):
    out = {0}
    for x in X:
        out |= {S.add(x, y) for y in out}
    return frozenset(out)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 15), max_size=3), st.lists(st.integers(0, 15), max_size=3),
       st.lists(st.integers(0, 15), max_size=2))
def test_alg_indep_matches_span_arithmetic(A, B, C):
    S = VecFq(2, 4)
    want = _brute_span(S, A + C) & _brute_span(S, B + C) == _brute_span(S, C)
    assert alg_indep(S, A, B, C) == want


@pytest.mark.parametrize("S", [VecFq(2, 3), PureSet(8), CopiesKn(3, 3)], ids=lambda S: S.kind)
def test_axiom_suite_passes_on_algebraic(S):
    report = axiom_suite(S, algebraic(S), 150, seed=3)
    assert {name: c.status for name, c in report.items()} == {name: "ok" for name in report}
    assert report["symmetry"].stats["checked"] > 0


def test_always_breaks_anti_reflexivity(v3):
    S, _ = v3
    report = axiom_suite(S, always(S), 100, 1, searched=False)
    assert report["anti_reflexivity"].status == "violation"
    w = report["anti_reflexivity"].witness
    assert w is not None


def test_affine_fixture_breaks_base_monotonicity():
    S = AffineFq(2, 3)
    report = axiom_suite(S, algebraic(S), 500, seed=1, searched=False)
    c = report["base_monotonicity"]
    assert c.status == "violation"
    assert report["symmetry"].status == "ok"


def test_modularity_and_exchange():
    S = VecFq(2, 4)
    assert modularity_check(S, 100, 2).status == "ok"
    assert exchange_check(S, 100, 2).status == "ok"
    assert exchange_check(CopiesKn(3, 3), 100, 2).status == "ok"


def test_narrowness(v3):
    S, (e1, e2, e3) = v3
    rel = algebraic(S)
    C = Chain([closed_tuple(S, [e1]), closed_tuple(S, [e2])], True)
    assert check_narrowness(S, rel, 1, closed_tuple(S, []), C)
    z = closed_tuple(S, [])
    assert check_narrowness(S, rel, 1, z, Chain([z, z], True))
    # e1 and e1+e2 are dependent over span(e2)
    bad = Chain([closed_tuple(S, [e1]), closed_tuple(S, [e2]), closed_tuple(S, [S.add(e1, e2)])], True)
    with pytest.raises(PreconditionFailed):
        check_narrowness(S, rel, 2, z, bad)
    with pytest.raises(PreconditionFailed):
        check_narrowness(S, rel, 2, z, C)


def test_even_span_oracle():
    S = VecFq(2, 5)
    om = even_span(S)
    evens = [S.basis(i) for i in (2, 4)]
    assert om.part(S.universe) == _brute_span(S, evens)
    with pytest.raises(PreconditionFailed):
        even_span(AffineFq(2, 3))


def test_absorbing_config():
    S = VecFq(2, 5)
    om = even_span(S)
    e = [S.basis(i + 1) for i in range(5)]
    z = closed_tuple(S, [])
    assert absorbing_config_check(S, om, z, z, closed_tuple(S, [e[0], e[1]]))
    a1, a2 = closed_tuple(S, [e[0]]), closed_tuple(S, [e[0], e[2]])
    assert absorbing_config_check(S, om, a1, a2, z)
    # b & omega = span(e2) depends on a2 over a1 once a2 contains e2
    b = closed_tuple(S, [e[1]])
    assert not absorbing_config_check(S, om, z, closed_tuple(S, [e[1]]), b)
    with pytest.raises(PreconditionFailed):
        absorbing_config_check(S, om, a2, a1, z)
    with pytest.raises(NotAclClosed):
        absorbing_config_check(S, om, (e[0],), a2, z)


def test_absorb_vector():
    S = VecFq(2, 5)
    om = even_span(S)
    e = [S.basis(i + 1) for i in range(5)]
    a1, a2 = closed_tuple(S, [e[0]]), closed_tuple(S, [e[0], e[2]])
    a1p, a2p = absorb(S, om, a1, a2, (0,))
    assert om.part(a2p) == frozenset(a1p)
    assert S.orbit_eq((0,) + a1 + a2, (0,) + a1p + a2p)


def test_absorb_identity_when_already_placed():
    S = VecFq(2, 5)
    om = even_span(S)
    a = closed_tuple(S, [S.basis(2)])
    assert absorb(S, om, a, a, (0,)) == (a, a)


def test_absorb_dense_order():
    D = DenseOrder(8)
    om = even_depth(D)
    u = D.universe
    a1p, a2p = absorb(D, om, (), (u[2],), (u[1], u[5]))
    assert a1p == () and not om(a2p[0])
    assert u[1] < a2p[0] < u[5]


def test_lovely_pairs():
    S = VecFq(2, 5)
    c = lovely_pair_check(S, even_span(S), 50, 3)
    assert c.status == "ok"
    assert c.stats["extension_found"] == 50
    assert c.stats["coheir_found"] == c.stats["coheir_applicable"]


def test_sink_acl_empty():
    S = VecFq(2, 5)
    c = sink_check(S, even_span(S), empty_closure(S), 1, 16, 4, 5)
    assert c.status == "ok", c.witness
    assert c.stats["swallow"]["found"] == 4


def test_sink_delta_universe():
    S = VecFq(2, 5)
    c = sink_check(S, even_span(S), everything(S), 1, 12, 3, 5, delta_name="universe")
    assert c.params["delta"] == "universe"
    assert c.status == "ok", c.witness
