import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sectorcalc.errors import HypothesisError, ParameterError
from sectorcalc.functions import E, ExampleG, Identity, Log1p, OneMinusExp, Power, catalog, example_product
from sectorcalc.measures import LevyTriple, MeasureSpec, PowerExpDensity
from sectorcalc.opcalc import (CBF_MODE, GENERAL, NodeSolver, OperatorRepChoice, ResolventFamily, barycentre,
                               bernstein_apply, cbf_bound, check_ritt, choose_rep, eigen_oracle_resolvent,
                               general_bound, improved_resolvent, log1p_operator_s_form, operator_resolvent,
                               pick_q, q_interval, sectoriality_bound, semigroup)
from sectorcalc.quad import QuadratureConfig
from sectorcalc.scalarcalc import AT_ZERO
from sectorcalc.sectorial import certify_sectorial, matrix_function


def polar(r, a):
    return r * cmath.exp(1j * a)


def normal_matrix(seed, n=4, angle=math.pi / 5):
    rng = np.random.default_rng(seed)
    ev = np.exp(rng.uniform(-2, 2, n)) * np.exp(1j * rng.uniform(-0.95 * angle, 0.95 * angle, n))
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return Q @ np.diag(ev) @ Q.conj().T


@pytest.fixture(scope="module")
def S():
    return certify_sectorial(normal_matrix(0), math.pi / 5)


z_st = st.builds(polar, st.floats(1e-2, 1e2), st.floats(-0.95 * math.pi / 2, 0.95 * math.pi / 2))
E_FUNCS = [k for k, f in catalog().items() if E in f.tags]


@pytest.mark.parametrize("name", E_FUNCS)
def test_matches_eigen_oracle(S, name):
    f = catalog()[name]
    for z in (1.0, polar(0.3, 1.2), polar(20.0, -1.0)):
        R = operator_resolvent(f, S, z)
        ref = eigen_oracle_resolvent(f, S, z)
        assert np.linalg.norm(R - ref) <= 1e-6 * np.linalg.norm(ref)


@given(z_st, z_st)
def test_resolvent_identity(z1, z2):
    S = certify_sectorial(normal_matrix(1), math.pi / 5)
    fam = ResolventFamily(OneMinusExp(), S, choose_rep(OneMinusExp(), S, theta=math.pi / 2))
    R1, R2 = fam(z1), fam(z2)
    lhs = R1 - R2
    rhs = (z2 - z1) * R1 @ R2
    assert np.linalg.norm(lhs - rhs) <= 1e-7 * max(np.linalg.norm(R1) * np.linalg.norm(R2) * abs(z2 - z1), 1e-12)


@given(z_st)
def test_commutes_with_matrix(z):
    rng = np.random.default_rng(2)
    V = rng.normal(size=(3, 3))
    A = V @ np.diag([0.5, 1.0, 3.0]) @ np.linalg.inv(V)
    S = certify_sectorial(A, 0.0)
    R = operator_resolvent(Power(0.5), S, z)
    assert np.linalg.norm(A @ R - R @ A) <= 1e-8 * np.linalg.norm(A) * np.linalg.norm(R)


def test_power_half_diagonal():
    S = certify_sectorial(np.diag([1.0, 4.0]), 0.0)
    R = operator_resolvent(Power(0.5), S, 1.0, OperatorRepChoice(3.0, AT_ZERO, GENERAL))
    np.testing.assert_allclose(R, np.diag([0.5, 1 / 3]), atol=1e-10)


def test_cbf_path_below_two():
    S = certify_sectorial(np.diag([1.0, math.e - 1]), 0.0)
    ch = OperatorRepChoice(2.0, AT_ZERO, CBF_MODE)
    R = operator_resolvent(Log1p(), S, 1.0, ch)
    np.testing.assert_allclose(np.diag(R), [1 / (1 + math.log(2)), 0.5], atol=1e-9)
    np.testing.assert_allclose(log1p_operator_s_form(S, 1.0), R, atol=1e-8)


def test_node_cache_is_shared(S):
    solver = NodeSolver(S, 3.0)
    ch = choose_rep(Power(0.5), S, q=3.0)
    operator_resolvent(Power(0.5), S, 1.0, ch, solver=solver)
    first = solver.solves
    operator_resolvent(Power(0.5), S, 2.0, ch, solver=solver)
    assert solver.solves - first < first


@given(st.floats(0.0, 0.6 * math.pi), st.floats(0.0, 2.0))
def test_pick_q_is_admissible(omega, theta):
    for mode in (GENERAL, CBF_MODE):
        lo, hi = q_interval(mode, omega, min(theta, math.pi - omega - 1e-3))
        if hi - lo > 1e-6:
            q = pick_q(lo, hi)
            assert lo < q < hi


def test_pick_q_avoids_boundary():
    # pi/(pi - 2 pi/3) rounds to 3.0000000000000004: q must be 4
    lo, hi = q_interval(GENERAL, 0.0, 2 * math.pi / 3)
    assert pick_q(lo, hi) == 4


def test_bound_formulas():
    assert general_bound(math.tan(math.pi / 3), 1.0, math.pi / 2, 3.0) == pytest.approx(99.92, abs=0.01)
    with pytest.raises(HypothesisError):
        cbf_bound(1.0, 0.5, 2.0)
    assert cbf_bound(1.0, 0.5, 3.0) > 0


def test_hypothesis_errors():
    S = certify_sectorial(np.diag([0.0, 1.0]), 0.0)
    with pytest.raises(HypothesisError) as e:
        choose_rep(ExampleG(1.0), S, 1.0)
    assert e.value.case == "injective-or-bf"
    S2 = certify_sectorial(np.diag([1.0, 2.0]), 0.0)
    with pytest.raises(HypothesisError) as e:
        choose_rep(Power(0.5), S2, 1.0, q=1.5)
    assert e.value.case == "q"


def test_sectoriality_bound_dominates():
    S = certify_sectorial(np.diag([1.0, 4.0]), 0.0)
    for f in (Power(0.5), ExampleG(1.0)):
        b, rep = sectoriality_bound(f, S, math.pi / 2, cfg=QuadratureConfig(rel_tol=1e-7))
        assert rep.passed and rep.grid["points"] == 40
        assert b == rep.bound


def test_non_bernstein_product_resolvent(S):
    f = example_product()
    R = operator_resolvent(f, S, polar(1.0, 0.4))
    ref = eigen_oracle_resolvent(f, S, polar(1.0, 0.4))
    assert np.linalg.norm(R - ref) <= 1e-6 * np.linalg.norm(ref)


def test_subordination_atom():
    S = certify_sectorial(np.diag([0.5, 2.0]), 0.0)
    fA = bernstein_apply(LevyTriple(0.0, 0.0, MeasureSpec(((1.0, 1.0),))), S)
    np.testing.assert_allclose(fA, np.diag(1 - np.exp(-np.array([0.5, 2.0]))), atol=1e-10)


@pytest.mark.parametrize("f", [Power(0.5), OneMinusExp(), Log1p(), Identity()])
def test_subordination_matches_oracle(f):
    rng = np.random.default_rng(4)
    V = rng.normal(size=(3, 3))
    S = certify_sectorial(V @ np.diag([0.3, 1.0, 4.0]) @ np.linalg.inv(V), 0.0)
    fA = bernstein_apply(f, S)
    ref = matrix_function(S, f)
    assert np.linalg.norm(fA - ref) <= 1e-8 * np.linalg.norm(ref)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_poisson_semigroup(s):
    S = certify_sectorial(np.diag([0.5, 1.0, 3.0]), 0.0)
    fA = bernstein_apply(OneMinusExp(), S)
    P = semigroup(fA, s)
    lam = np.array([0.5, 1.0, 3.0])
    np.testing.assert_allclose(np.diag(P), np.exp(-s) * np.exp(s * np.exp(-lam)), atol=1e-8)


def test_barycentre_exponential():
    S = certify_sectorial(np.diag([1.0, 2.0, 5.0]), 0.0)
    T = barycentre(S, MeasureSpec((), PowerExpDensity(1.0, 0.0, 1.0)))
    np.testing.assert_allclose(T, np.diag(1 / (1 + np.array([1.0, 2.0, 5.0]))), atol=1e-8)


def test_barycentre_needs_probability():
    S = certify_sectorial(np.diag([1.0, 2.0]), 0.0)
    with pytest.raises(ParameterError):
        barycentre(S, MeasureSpec(((1.0, 2.0),)))


@pytest.mark.parametrize("mu", [MeasureSpec(((1.0, 1.0),)), MeasureSpec((), PowerExpDensity(1.0, 0.0, 1.0))])
def test_barycentre_is_ritt(mu):
    S = certify_sectorial(np.diag([1.0, 2.0]), 0.0)
    r = check_ritt(barycentre(S, mu), math.pi / 2)
    assert r.passed and r.stable and r.spectrum_ok


def test_identity_is_ritt():
    r = check_ritt(np.eye(2), math.pi / 2)
    assert r.passed and r.C == pytest.approx(1.0)


def test_improved_resolvent():
    S = certify_sectorial(np.diag([1.0, 16.0]), 0.0)
    R, _ = improved_resolvent(Identity(), 0.75, S, 1.0)
    np.testing.assert_allclose(R, np.diag([0.5, 1 / 9]), atol=1e-8)


def test_improved_resolvent_rotated():
    rng = np.random.default_rng(4)
    V = rng.normal(size=(4, 4))
    ev = np.array([cmath.exp(1j * math.pi / 3), cmath.exp(-1j * math.pi / 3), 2.0, 3 * cmath.exp(0.5j)])
    S = certify_sectorial(V @ np.diag(ev) @ np.linalg.inv(V), math.pi / 3)
    R, SB = improved_resolvent(Identity(), 0.75, S, 1.0)
    assert SB.omega == pytest.approx(0.75 * math.pi / 3)
    ref = np.linalg.inv(np.eye(4) + matrix_function(S, lambda w: w ** 0.75))
    assert np.linalg.norm(R - ref) <= 1e-8 * np.linalg.norm(ref)
