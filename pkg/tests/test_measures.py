import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sectorcalc.errors import ParameterError
from sectorcalc.measures import LevyTriple, MeasureSpec, PowerExpDensity, StieltjesTriple


def test_atom_mass():
    assert MeasureSpec(((1.0, 0.25), (2.0, 0.75))).mass() == pytest.approx(1.0)


@given(st.floats(0.1, 10.0), st.floats(0.0, 3.0))
def test_gamma_density_mass(rate, power):
    mu = MeasureSpec((), PowerExpDensity(1.0, power, rate))
    assert mu.mass() == pytest.approx(math.gamma(power + 1) / rate ** (power + 1), rel=1e-9)


def test_json_roundtrip():
    mu = MeasureSpec(((1.0, 0.5),), PowerExpDensity(2.0, 0.5, 1.0))
    back = MeasureSpec.from_json(mu.to_json())
    assert back.mass() == pytest.approx(mu.mass())


def test_validation():
    with pytest.raises(ParameterError):
        MeasureSpec(((-1.0, 1.0),))
    with pytest.raises(ParameterError):
        MeasureSpec(((1.0, 0.0),))
    with pytest.raises(ParameterError):
        LevyTriple(-1.0, 0.0, MeasureSpec())
    # the Levy measure needs int min(1, s) mu(ds) < inf: s^-2.5 near 0 is too singular
    with pytest.raises(ParameterError):
        LevyTriple(0.0, 0.0, MeasureSpec((), PowerExpDensity(1.0, -2.5, 1.0)))


@given(st.floats(0.1, 10.0), st.floats(0.1, 5.0))
def test_stieltjes_to_levy(s, lam):
    # z/(z + s) = int (1 - e^{-zt}) s e^{-ts} dt
    lt = StieltjesTriple(0.0, 0.0, MeasureSpec(((s, 1.0),))).to_levy()
    val = lt.mu.integrate(lambda t: 1 - np.exp(-lam * t), order0=1.0).value
    assert val == pytest.approx(lam / (lam + s), rel=1e-9)
