import cmath
import math

import pytest
from hypothesis import given, strategies as st

from sectorcalc.errors import ParameterError
from sectorcalc.functions import CBF, E, Log1p, OneMinusExp, Power, catalog
from sectorcalc.quad import QuadratureConfig
from sectorcalc.scalarcalc import (AT_INFINITY, AT_ZERO, RepresentationChoice, choose, denominator_margin,
                                   j_integral, log1p_closed_form, oracle, pick_form, scalar_resolvent)

CFG = QuadratureConfig(rel_tol=1e-11)
E_FUNCS = [k for k, f in catalog().items() if E in f.tags]


def polar(r, a):
    return r * cmath.exp(1j * a)


# q = 3: lambda in |arg| < pi/3, z in |arg| < 2 pi/3
lam_st = st.builds(polar, st.floats(1e-2, 1e2), st.floats(-0.98 * math.pi / 3, 0.98 * math.pi / 3))
z_st = st.builds(polar, st.floats(1e-2, 1e2), st.floats(-0.98 * 2 * math.pi / 3, 0.98 * 2 * math.pi / 3))


@pytest.mark.parametrize("name", E_FUNCS)
@given(lam=lam_st, z=z_st)
def test_matches_direct_resolvent(name, lam, z):
    f = catalog()[name]
    ch = RepresentationChoice(3.0, pick_form(f))
    r = scalar_resolvent(f, ch, lam, z, CFG)
    ref = oracle(f, lam, z)
    assert abs(r.value - ref) <= 1e-7 * abs(ref)


@pytest.mark.parametrize("form", [AT_INFINITY, AT_ZERO])
def test_both_forms_agree(form):
    f = Power(0.5)
    r = scalar_resolvent(f, RepresentationChoice(3.0, form), 2 + 1j, 0.5 - 0.3j, CFG)
    assert abs(r.value - oracle(f, 2 + 1j, 0.5 - 0.3j)) < 1e-9


def test_q_independence():
    f = OneMinusExp()
    vals = [scalar_resolvent(f, RepresentationChoice(q), 1.0, 1.0, CFG).value for q in (2.5, 3.0, 4.0)]
    assert max(abs(a - b) for a in vals for b in vals) < 1e-7


def test_cbf_mode_below_two():
    f = Log1p()
    r = scalar_resolvent(f, RepresentationChoice(1.5, pick_form(f), True), 1.0, 1.0, CFG)
    assert abs(r.value - 1 / (1 + math.log(2))) < 1e-9


def test_log1p_closed_forms():
    rt, rs = log1p_closed_form(1.0, 1.0)
    target = 1 / (1 + math.log(2))
    assert abs(rt.value - target) < 1e-7
    assert abs(rs.value - target) < 1e-7


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_log1p_closed_forms_real_points(z, lam):
    rt, rs = log1p_closed_form(z, lam)
    target = 1 / (z + math.log1p(lam))
    assert abs(rt.value - target) < 1e-8 * target
    assert abs(rs.value - target) < 1e-8 * target


def test_sector_checks():
    f = Power(0.5)
    ch = RepresentationChoice(3.0)
    with pytest.raises(ParameterError):
        scalar_resolvent(f, ch, polar(1, 1.2), 1.0)       # lambda outside |arg| < pi/3
    with pytest.raises(ParameterError):
        scalar_resolvent(f, ch, 1.0, polar(1, 2.2))       # z outside |arg| < 2 pi/3


def test_q_range():
    with pytest.raises(ParameterError):
        RepresentationChoice(2.0)
    RepresentationChoice(1.5, cbf_mode=True)
    with pytest.raises(ParameterError):
        RepresentationChoice(1.0, cbf_mode=True)


def test_choose_defaults():
    ch = choose(OneMinusExp(), 1.0)
    assert ch.q == 2.5 and ch.form == AT_INFINITY and not ch.cbf_mode
    # only f(0+) is finite for unbounded functions
    assert choose(Log1p(), 1.0).form == AT_ZERO
    assert choose(Power(0.5), 1.0).form == AT_ZERO


def test_denominator_margin_nonnegative():
    assert denominator_margin(OneMinusExp(), 3.0, polar(1.0, 1.0)) >= 0


def test_j_integral_identity():
    # r J(r; z) = sin(theta)
    r = j_integral(Power(1.0), 0.5, 3.0)
    assert abs(3.0 * r.value - math.sin(0.5)) < 1e-9
