from __future__ import annotations

import pytest
from gmpy2 import mpq as Q

from homlab.metric import (EmptyGlue, ExtensionRequest, GlueNotIsometric, KatetovViolation, Space,
                           amalgam, check_katetov, check_partial_isometry, extend_one_point,
                           random_glued_pair, random_space, validate_space)
from homlab.monoid import make_monoid
from homlab.rng import SplitMix64

N = make_monoid("q_nonneg")
T = make_monoid("q_unit_trunc")


def space(m, points, dist):
    return Space.from_dict(m, points, {k: Q(v) for k, v in dist.items()})


def test_triangle_violation():
    s = space(N, [0, 1, 2], {(0, 1): 1, (1, 2): 1, (0, 2): 3})
    v = validate_space(s)
    assert v.axiom == "triangle" and set(v.points) == {0, 1, 2}


def test_identity_violation():
    s = space(N, [0, 1], {(0, 1): 0})
    assert validate_space(s).axiom == "identity"


def test_equilateral_ok():
    assert validate_space(space(N, [0, 1, 2], {(0, 1): 1, (1, 2): 1, (0, 2): 1})) is None


def test_large_space_fast_path_agrees():
    # more than six points takes the integer screen first
    pts = list(range(8))
    good = space(N, pts, {(i, j): 1 + (i + j) % 2 for i in pts for j in pts if i < j})
    assert validate_space(good) is None
    bad = space(N, pts, {(i, j): 5 if (i, j) == (0, 7) else 1 for i in pts for j in pts if i < j})
    assert validate_space(bad).axiom == "triangle"


def test_partial_isometry_cases():
    s = space(N, [0, 1, 2], {(0, 1): 1, (1, 2): 2, (0, 2): 2})
    assert check_partial_isometry({}, s, s) is None
    assert check_partial_isometry({p: p for p in s.points}, s, s) is None
    assert check_partial_isometry({0: 1, 1: 1}, s, s).axiom == "injective"
    assert check_partial_isometry({0: 0, 1: 2}, s, s).axiom == "distance"


def test_amalgam_single_glue():
    a = space(N, [0, 1], {(0, 1): 2})
    b = space(N, [0, 1], {(0, 1): 3})
    out, into = amalgam(a, b, {0: 0})
    assert out.d(1, into[1]) == 5


def test_amalgam_truncated():
    a = space(T, [0, 1], {(0, 1): Q(7, 10)})
    b = space(T, [0, 1], {(0, 1): Q(6, 10)})
    out, into = amalgam(a, b, {0: 0})
    assert out.d(1, into[1]) == 1


def test_amalgam_two_point_base():
    # points: c1=0, c2=1, x=2 in A; c1=0, c2=1, y=2 in B
    a = space(N, [0, 1, 2], {(0, 1): 1, (2, 0): 1, (2, 1): 2})
    b = space(N, [0, 1, 2], {(0, 1): 1, (2, 0): 4, (2, 1): 1})
    out, into = amalgam(a, b, {0: 0, 1: 1})
    brute = min(a.d(2, z) + b.d(z, 2) for z in (0, 1))
    assert out.d(2, into[2]) == brute == 3
    # B itself breaks the triangle inequality (4 > 1 + 1), and the amalgam
    # inherits exactly that defect
    assert validate_space(b) is not None
    v = validate_space(out)
    assert v.axiom == "triangle" and set(v.points) <= {0, 1, into[2]}


def test_amalgam_errors():
    a = space(N, [0, 1], {(0, 1): 2})
    b = space(N, [0, 1], {(0, 1): 3})
    with pytest.raises(EmptyGlue):
        amalgam(a, b, {})
    with pytest.raises(GlueNotIsometric):
        amalgam(a, b, {0: 0, 1: 1})


def test_katetov_checks():
    s = space(N, [0, 1], {(0, 1): 2})
    assert check_katetov(s, ExtensionRequest.of({0: Q(1), 1: Q(1)})) is None
    v = check_katetov(s, ExtensionRequest.of({0: Q(1), 1: Q(4)}))
    assert v is not None and set(v.points) == {0, 1}
    assert check_katetov(s, ExtensionRequest.of({0: Q(7)})) is None


def test_extend_one_point():
    s = space(N, [0, 1], {(0, 1): 2})
    out, p = extend_one_point(s, ExtensionRequest.of({0: Q(1)}))
    assert out.d(p, 1) == 3 and validate_space(out) is None
    same, z = extend_one_point(s, ExtensionRequest.of({0: Q(0), 1: Q(2)}))
    assert z == 0 and same is s
    with pytest.raises(KatetovViolation):
        extend_one_point(s, ExtensionRequest.of({0: Q(1), 1: Q(4)}))


@pytest.mark.parametrize("kind", ["q_nonneg", "q_unit_trunc", "q_lex2", "q_ultra"])
def test_random_pairs_amalgamate(kind):
    m = make_monoid(kind)
    rng = SplitMix64(5)
    values = m.grid(2 if kind == "q_lex2" else 4)
    for _ in range(40):
        a, b, glue = random_glued_pair(m, 8, rng, values)
        assert validate_space(a) is None and validate_space(b) is None
        assert len(a) <= 8 and len(b) <= 8
        out, _ = amalgam(a, b, glue)
        assert validate_space(out) is None


def test_random_space_extends_base():
    rng = SplitMix64(1)
    base = space(N, [0, 1], {(0, 1): 2})
    s = random_space(N, 5, rng, N.grid(3), base)
    assert len(s) == 5 and s.d(0, 1) == 2 and validate_space(s) is None


def test_space_json_roundtrip():
    s = space(N, [0, 1, 2], {(0, 1): Q(1, 3), (1, 2): 2, (0, 2): 2})
    assert Space.from_json(s.to_json()) == s
