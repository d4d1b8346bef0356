import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sectorcalc.errors import ParameterError, QuadratureError
from sectorcalc.quad import (Factored, QuadratureConfig, integrate_half_line, integrate_interval,
                             integrate_polar_sector, integrate_real_line)


def test_exponential_half_line():
    r = integrate_half_line(lambda t: np.exp(-t))
    assert r.converged
    assert abs(r.value - 1.0) < 1e-12


def test_endpoint_singularity():
    # int_0^inf t^{-1/2}/(1+t) dt = pi
    r = integrate_half_line(lambda t: 1 / (np.sqrt(t) * (1 + t)), -0.5, -1.5)
    assert abs(r.value - math.pi) < 1e-10


def test_polynomial_tails_in_log_variable():
    # 1/(1 + u^2) is the log-variable form of a 1/(t log^2 t) tail
    r = integrate_real_line(lambda u: 1 / (1 + u * u), QuadratureConfig(rel_tol=1e-10))
    assert abs(r.value - math.pi) < 1e-9


def test_mass_beyond_float_range_is_flagged():
    # int_e^inf dt/(t log^2 t) leaves 1/log(1e300) beyond the largest float
    cfg = QuadratureConfig(rel_tol=1e-9, strict=False)
    r = integrate_interval(lambda t: 1 / (t * np.log(t) ** 2), math.e, math.inf, cfg, 0.0, -1.0)
    assert not r.converged
    assert abs(r.value - 1.0) <= r.err


def test_gaussian_real_line():
    r = integrate_real_line(lambda u: np.exp(-u * u))
    assert abs(r.value - math.sqrt(math.pi)) < 1e-12


def test_finite_interval():
    r = integrate_interval(lambda t: np.sin(t), 0.0, math.pi)
    assert abs(r.value - 2.0) < 1e-12


def test_vector_integrand_componentwise():
    def f(t):
        return np.stack([np.exp(-t), np.exp(-2 * t), 1j * np.exp(-3 * t)], axis=1)
    r = integrate_half_line(f)
    np.testing.assert_allclose(r.value, [1.0, 0.5, 1j / 3], atol=1e-12)


def test_factored_matches_plain():
    mats = np.array([[1.0, 2.0], [0.5, -1.0]])

    def plain(t):
        return np.exp(-t)[:, None, None] * mats[None]

    def factored(t):
        arr = np.broadcast_to(mats, (t.size, 2, 2))
        return Factored(np.exp(-t), arr, np.full(t.size, 2.0))
    a = integrate_half_line(plain)
    b = integrate_half_line(factored)
    np.testing.assert_allclose(a.value, mats, atol=1e-12)
    np.testing.assert_allclose(b.value, a.value, atol=1e-13)


def test_non_finite_raises():
    with pytest.raises(QuadratureError):
        integrate_half_line(lambda t: np.where(t > 1, np.nan, 1.0) * np.exp(-t))


def test_polar_sector_area():
    # int_{|s|<theta} int_0^inf e^{-t} dt ds = 2 theta
    r = integrate_polar_sector(lambda t, s: np.exp(-t) + 0 * s, 0.7)
    assert abs(r.value - 1.4) < 1e-10


@pytest.mark.parametrize("kw", [dict(rel_tol=1e-20), dict(abs_tol=0.0), dict(initial_panels=0),
                                dict(half_width=-1.0)])
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        QuadratureConfig(**kw)


@given(st.floats(0.05, 0.95))
def test_beta_integral(a):
    # int_0^inf t^{a-1}/(1+t) dt = pi / sin(pi a)
    r = integrate_half_line(lambda t: t ** (a - 1) / (1 + t), a - 1, a - 2, QuadratureConfig(rel_tol=1e-11))
    assert abs(r.value - math.pi / math.sin(math.pi * a)) <= 1e-9 * math.pi / math.sin(math.pi * a)


@given(st.floats(0.01, 100.0))
def test_laplace_of_one(s):
    r = integrate_half_line(lambda t: np.exp(-s * t))
    assert abs(r.value * s - 1) < 1e-10


@given(st.floats(0.1, 10.0))
def test_tighter_tolerance_is_not_worse(s):
    exact = math.pi / (2 * s)

    def f(t):
        with np.errstate(over="ignore"):
            return 1 / (s * s + t * t)
    errs = []
    for tol in (1e-4, 1e-8, 1e-12):
        r = integrate_half_line(f, cfg=QuadratureConfig(rel_tol=tol))
        errs.append(abs(r.value - exact))
        assert errs[-1] <= max(10 * tol * exact, 1e-14)
    assert errs[-1] <= errs[0] + 1e-15
