import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sectorcalc.errors import DomainError, TagRuleError
from sectorcalc.functions import (BF, CBF, CM, NP, D, E, CauchyAtom, ExampleG, Identity, Log1p, OneMinusExp, Power,
                                  Product, Reciprocal, Sum, catalog, example_product, from_json, public_tags)

right_half = st.builds(lambda r, a: r * cmath.exp(1j * a), st.floats(1e-2, 1e2), st.floats(-1.5, 1.5))


def test_catalog_values():
    assert abs(Power(0.5)(4.0) - 2.0) < 1e-15
    assert abs(Log1p()(1.0) - math.log(2)) < 1e-15
    assert abs(OneMinusExp()(1.0) - (1 - math.exp(-1))) < 1e-15
    assert abs(Identity()(2 + 1j) - (2 + 1j)) == 0


def test_tags():
    assert {NP, BF, CBF, E} <= Power(0.5).tags
    assert CBF not in OneMinusExp().tags
    assert {NP, CM, D} <= ExampleG(1.0).tags
    assert BF not in ExampleG(1.0).tags
    ep = example_product()
    assert D in ep.tags and BF not in ep.tags


def test_public_tags_hide_auxiliary():
    for f in catalog().values():
        assert set(public_tags(f.tags)) <= {"NP+", "CM", "BF", "CBF", "D0+", "D0-", "Dinf+", "Dinf-", "D", "E", "S"}


@pytest.mark.parametrize("name", list(catalog()))
def test_json_roundtrip(name):
    f = catalog()[name]
    g = from_json(f.to_json())
    z = np.array([0.3 + 0.2j, 2.0, 5 - 4j])
    np.testing.assert_allclose(g(z), f(z), rtol=1e-15)
    assert g.tags == f.tags


def test_undeclared_tag_rejected():
    d = ExampleG(1.0).to_json()
    d["tags"] = d["tags"] + ["BF"]
    with pytest.raises(TagRuleError):
        from_json(d)


def test_domain():
    with pytest.raises(DomainError):
        OneMinusExp()(-1.0)
    # CBF functions extend to the slit plane
    Power(0.5)(-1 + 0.1j)


@given(right_half)
def test_np_maps_right_half_plane_to_itself(z):
    for f in catalog().values():
        w = f(z)
        assert w.real >= -1e-12 * max(1.0, abs(w))


@given(right_half)
def test_conjugate_symmetry(z):
    for f in catalog().values():
        assert abs(f(z.conjugate()) - f(z).conjugate()) <= 1e-12 * max(1.0, abs(f(z)))


@given(right_half)
def test_derivative_matches_difference(z):
    for f in catalog().values():
        h = 1e-6 * max(1.0, abs(z))
        fd = (f(z + h) - f(z - h)) / (2 * h)
        assert abs(f.deriv(z) - fd) <= 1e-5 * max(1.0, abs(fd))


@given(right_half)
def test_combinators(z):
    a, b = Power(0.5), OneMinusExp()
    assert abs(Sum((a, b))(z) - (a(z) + b(z))) <= 1e-13 * abs(a(z) + b(z))
    assert abs(Product((a, b))(z) - a(z) * b(z)) <= 1e-13 * abs(a(z) * b(z))
    assert abs(Reciprocal(a)(z) - 1 / a(z)) <= 1e-13 / abs(a(z))


def test_limits():
    assert Log1p().limits() == (0.0, math.inf)
    l0, linf = CauchyAtom(1.0).limits()
    assert l0 == 0.0
