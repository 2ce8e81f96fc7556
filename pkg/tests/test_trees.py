from fractions import Fraction as Fr
from itertools import combinations_with_replacement

import pytest
from hypothesis import given, settings, strategies as st

from pcns import trees as T
from pcns.trees import (ALPHA_LEFT, ALPHA_RIGHT, ONE, XI, Homogeneity, I, TensorSum, UndecidableSign,
                        X, coproduct_delta, coproduct_delta_plus, homogeneity, mul)


@pytest.fixture(scope="module")
def forest():
    return T.generate_grammar()


@pytest.fixture(scope="module")
def f0(forest):
    return T.build_f0(forest)


def H(a, b):
    return Homogeneity(Fr(a), Fr(b))


def test_homogeneity_examples():
    assert homogeneity(XI) == H(0, 1)
    assert homogeneity(T.I_XI) == H(2, 1)
    assert homogeneity(T.D_PAIR) == H(5, 2)
    assert homogeneity(T.FIVE) == H(13, 5)
    assert homogeneity(T.FIVE).root() == Fr(-13, 5)
    assert homogeneity(X((1, 0, 0, 0))) == H(2, 0)
    assert homogeneity(X((0, 1, 2, 0))) == H(3, 0)
    assert homogeneity(I(XI, 0, (0, 1, 0, 0))) == H(1, 1)


def test_regression_values(f0):
    got = {homogeneity(t) for t in f0} | {homogeneity(t) for t in (T.THREE, I(T.THREE, 1), T.FIVE)}
    for a, b in [(0, 1), (2, 1), (4, 2), (5, 2), (7, 3), (8, 3), (10, 4), (13, 5)]:
        assert H(a, b) in got
    assert all(isinstance(h.a, Fr) and isinstance(h.b, Fr) for h in got)


def test_sign_queries():
    assert H(4, 2).nonpositive() and H(13, 5).positive()
    with pytest.raises(UndecidableSign):
        H(Fr(51, 10), 2).nonpositive()         # root -2.55 inside the interval
    assert str(H(-3, 2)) == "2a-3" and str(H(0, 0)) == "0" and str(H(2, 1)) == "a+2"


def test_first_iteration():
    assert T.first_level() == {ONE, mul([(0, T.IXI)]), mul([(1, T.IXI)]), mul([(0, T.IXI), (1, T.IXI)])}


def test_forest_stabilizes(forest):
    assert forest.negative_levels <= forest.levels
    with pytest.raises(RuntimeError):
        T.generate_grammar(1)
    with pytest.raises(ValueError):
        T.generate_grammar(0)


def test_negative_sector_shapes(forest, f0):
    assert forest.shapes(f0) == T.f0_display_shapes()
    assert len(T.f0_display_shapes()) == 10
    assert forest.shapes(forest.negative()) <= T.f0_display_shapes()
    assert T.f_star_shapes() <= forest.shapes()


def test_interval_decidability(forest, f0):
    for t in forest.trees:
        h = homogeneity(t)
        if t in forest.negative():
            assert h.at(ALPHA_LEFT) <= 0 and h.at(ALPHA_RIGHT) <= 0
        else:
            assert h.at(ALPHA_LEFT) >= 0 and h.at(ALPHA_RIGHT) > 0


def test_renorm_map(f0):
    for t in f0:
        m = T.renorm_apply({"C1": 2, "C2": 3, "C3": 5, "C4": 7}, {t: Fr(1)})
        assert m.get(t) == 1 and set(m) <= {t, ONE}
    pair = T.root_canonical(T.PAIR)
    assert T.renorm_apply({"C1": Fr(3, 2)}, {pair: Fr(2)}) == {pair: 2, ONE: -3}
    assert T.renorm_apply({"C1": 9}, {XI: Fr(1)}) == {XI: 1}
    assert sum(T.renorm_family(t) is not None for t in f0) == 4


def test_coproduct_examples():
    assert coproduct_delta(ONE) == {(ONE, ONE): 1}
    assert coproduct_delta(XI) == {(XI, ONE): 1}
    x1 = X((0, 1, 0, 0))
    assert coproduct_delta(x1) == {(x1, ONE): 1, (ONE, x1): 1}
    x2 = X((0, 2, 0, 0))
    assert coproduct_delta(x2) == {(x2, ONE): 1, (x1, x1): 2, (ONE, x2): 1}


def test_coproduct_of_planted_noise():
    # I(Xi) has |.| = a + 2 in (-0.6, -0.5): no polynomial correction survives P_+
    assert coproduct_delta(T.IXI) == {(T.IXI, ONE): 1}
    # I_k(I(Xi)) at a + 3 > 0 picks up the 1 (x) I_k(I Xi) term
    d = coproduct_delta(T.D_IXI_A)
    assert d == {(T.D_IXI_A, ONE): 1, (ONE, T.D_IXI_A): 1}


def test_delta_lands_in_f0_and_alg_fstar(f0):
    shapes = T.f0_display_shapes()
    for t in f0:
        assert T.delta_closure_ok(t, shapes), T.render(t)


def test_multiplicativity(f0):
    small = [t for t in f0 if homogeneity(t).b <= 2]
    for a, b in combinations_with_replacement(small, 2):
        prod = coproduct_delta(mul([a, b]))
        assert prod == coproduct_delta(a) * coproduct_delta(b)


def _apply_left(ts: TensorSum, f) -> dict:
    out = {}
    for (a, b), c in ts.items():
        for (a2, a3), c2 in f(a).items():
            key = (a2, a3, b)
            out[key] = out.get(key, 0) + c * c2
    return {k: v for k, v in out.items() if v}


def _apply_right(ts: TensorSum, f) -> dict:
    out = {}
    for (a, b), c in ts.items():
        for (b2, b3), c2 in f(b).items():
            key = (a, b2, b3)
            out[key] = out.get(key, 0) + c * c2
    return {k: v for k, v in out.items() if v}


@pytest.mark.parametrize("name", ["IXI", "D_IXI_A", "D_PAIR", "PAIR", "THREE"])
def test_coassociativity(name):
    t = getattr(T, name)
    d = coproduct_delta(t)
    assert _apply_left(d, coproduct_delta) == _apply_right(d, coproduct_delta_plus)


def test_delta_plus_on_polynomials_and_errors():
    x = X((1, 0, 0, 0))
    assert coproduct_delta_plus(x) == coproduct_delta(x)
    with pytest.raises(ValueError):
        coproduct_delta_plus(XI)


def test_products_canonical():
    a, b = T.IXI, T.D_PAIR
    assert mul([a, b]) == mul([b, a])
    assert mul([ONE, a]) == a
    assert mul([X((0, 1, 0, 0)), mul([X((0, 0, 1, 0)), a])]) == mul([a, X((0, 1, 1, 0))])
    assert I(X((1, 0, 0, 0))) is None and I(ONE) is None


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["IXI", "D_IXI_A", "D_PAIR", "PAIR", "XI"]), min_size=1, max_size=4),
       st.lists(st.integers(0, 2), min_size=4, max_size=4))
def test_homogeneity_additive(names, k):
    items = [getattr(T, n) for n in names] + [X(k)]
    total = Homogeneity(Fr(0), Fr(0))
    for t in items:
        total = total + homogeneity(t)
    assert homogeneity(mul(items)) == total


def test_reporting(forest, f0):
    rows = T.forest_rows(forest, f0)
    assert len(rows) == len(set(forest.trees) | set(f0))
    neg = [r for r in rows if r["negative_at_left_endpoint"] and r["negative_at_right_endpoint"]]
    assert len(neg) >= len(forest.negative())
    text = T.forest_text(forest)
    assert "I^{i i1}(Xi_i1) I^{j j1}(Xi_j1)" in text
