import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sectorcalc import classcheck as cc
from sectorcalc.functions import (BF, CBF, ExampleG, Identity, OneMinusExp, Power, Raw, Reciprocal, catalog,
                                  example_product)


def test_kappa_identity_closed_form():
    # r J_theta(r; z) = sin(theta) for every r
    rep = cc.estimate_kappa(Identity(), math.pi / 4)
    assert abs(rep.constants["kappa"] - math.sin(math.pi / 4)) < 1e-6


@given(st.floats(0.05, 1.5))
def test_kappa_identity_any_angle(theta):
    rep = cc.estimate_kappa(Identity(), theta)
    assert abs(rep.constants["kappa"] - math.sin(theta)) < 1e-6


@given(st.floats(0.05, 1.5))
def test_kappa_bernstein_envelope(theta):
    rep = cc.estimate_kappa(OneMinusExp(), theta)
    assert rep.constants["kappa"] <= math.tan(theta) + 1e-6


def test_reciprocal_of_cm_fails_bernstein_at_order_two():
    rep = cc.check_complete_monotone(Reciprocal(ExampleG(1.0)), derivative=True)
    assert not rep.passed
    assert rep.constants["first_violation"]["order"] == 2


def test_cm_check_passes_for_cm():
    assert cc.check_complete_monotone(ExampleG(1.0)).passed


def test_cm_check_catches_non_cm():
    rep = cc.check_complete_monotone(Raw(fn=lambda z: np.sin(z) + 2, name="sin+2"))
    assert not rep.passed


@pytest.mark.parametrize("name", list(catalog()))
def test_brown_bounds(name):
    assert cc.check_brown_bounds(catalog()[name]).passed


@pytest.mark.parametrize("name", [k for k, f in catalog().items() if BF in f.tags])
def test_bernstein_inequalities(name):
    f = catalog()[name]
    assert cc.check_bernstein_imag(f).passed
    assert cc.check_bf_envelope(f).passed


@pytest.mark.parametrize("name", [k for k, f in catalog().items() if CBF in f.tags])
def test_cbf_imag(name):
    assert cc.check_cbf_imag(catalog()[name]).passed


def test_product_bound_pair():
    assert cc.check_product_bound([Power(0.5), OneMinusExp()]).passed


@pytest.mark.parametrize("theta", [0.3, math.pi / 4, 1.2])
def test_d_constants_cos_sin_for_cm(theta):
    f = ExampleG(1.0)
    for cond in ("D0-", "Dinf-"):
        assert cc.check_d_constants(f, theta, cond, 0.0, math.cos(theta), math.sin(theta)).passed


def test_classify_example_g():
    c = cc.classify(ExampleG(1.0))
    assert {"NP+", "CM", "D"} <= set(c.tags)
    assert c.passed
    # the Bernstein test fails, but the function does not claim BF
    assert not c.reports["bernstein"][1].passed
    assert c.reports["bernstein"][0] is None
    assert len(c.kappa) == 3


def test_classify_product_not_bernstein():
    c = cc.classify(example_product())
    assert "D" in c.tags and "BF" not in c.tags
    assert c.passed


def test_report_serialisation(tmp_path):
    rep = cc.check_brown_bounds(Power(0.5))
    d = rep.to_dict()
    assert d["passed"] and "margin" in d["rows"]
    text = rep.to_csv(tmp_path / "r.csv")
    assert text.splitlines()[0].endswith("margin,scaled_margin")
    assert len(text.splitlines()) == rep.margins.size + 1


def test_grid_validation():
    with pytest.raises(ValueError):
        cc.GridSpec(t_min=2.0, t_max=1.0)
    with pytest.raises(ValueError):
        cc.GridSpec(thetas=(0.5, 0.2))
