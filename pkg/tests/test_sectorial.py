import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sectorcalc.errors import CertificationError, ParameterError, SingularSystemError
from sectorcalc.sectorial import (SAFETY, certify_sectorial, contour_apply, eigen_apply, frac_power_resolvent_report,
                                  frac_power_sectorial_bound, fractional_resolvent_kato, load_matrix, m_tilde,
                                  matrix_from_json, matrix_function, matrix_power, matrix_to_json, resolvent)


def polar(r, a):
    return r * cmath.exp(1j * a)


@pytest.fixture(scope="module")
def diag14():
    return certify_sectorial(np.diag([1.0, 4.0]), 0.0)


def test_constants_of_positive_diagonal():
    S = certify_sectorial(np.diag([1.0, 2.0]), 0.0)
    # sup over the ray is sup_t t/|t e^{i pi/2} + lambda| -> 1
    assert abs(S.raw[math.pi / 2] - 1.0) < 1e-6
    assert S.M(math.pi / 2) == pytest.approx(SAFETY * S.raw[math.pi / 2])
    assert S.injective


def test_certification_rejects_wide_spectrum():
    A = np.diag([1.0, cmath.exp(1j * 1.0)])
    with pytest.raises(CertificationError):
        certify_sectorial(A, 0.5)
    assert certify_sectorial(A).omega >= 1.0


def test_zero_eigenvalue_not_injective():
    S = certify_sectorial(np.diag([0.0, 1.0]), 0.0)
    assert not S.injective


def test_resolvent(diag14):
    np.testing.assert_allclose(resolvent(diag14, 1.0), np.diag([0.5, 0.2]), atol=1e-15)
    with pytest.raises(SingularSystemError):
        resolvent(diag14, -4.0)


@given(st.builds(polar, st.floats(1e-2, 1e2), st.floats(-0.97 * math.pi / 2, 0.97 * math.pi / 2)))
def test_kato_matches_oracle(z):
    S = certify_sectorial(np.diag([1.0, 4.0]), 0.0)
    R = fractional_resolvent_kato(S, 0.5, z)
    ref = np.diag([1 / (1 + z), 1 / (2 + z)])
    assert np.abs(R - ref).max() <= 1e-8 * np.abs(ref).max()


def test_power_consistency(diag14):
    B = matrix_power(diag14, 0.5)
    np.testing.assert_allclose(B @ B, diag14.A, atol=1e-14)


@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0))
def test_powers_compose(a, b):
    rng = np.random.default_rng(1)
    V = rng.normal(size=(3, 3))
    A = V @ np.diag([1.0, 2.0, 5.0]) @ np.linalg.inv(V)
    S = certify_sectorial(A, 0.0)
    lhs = matrix_power(S, a) @ matrix_power(S, b)
    np.testing.assert_allclose(lhs, matrix_power(S, a + b), rtol=1e-8, atol=1e-8 * np.abs(lhs).max())


def test_contour_on_jordan_block():
    J = np.array([[4.0, 1.0], [0.0, 4.0]])
    R = contour_apply(J, np.sqrt)
    np.testing.assert_allclose(R, [[2.0, 0.25], [0.0, 2.0]], atol=1e-12)
    with pytest.warns(UserWarning):
        R2 = matrix_function(J, np.sqrt)
    np.testing.assert_allclose(R2, R, atol=1e-12)


def test_contour_agrees_with_eigen():
    rng = np.random.default_rng(3)
    V = rng.normal(size=(4, 4))
    A = V @ np.diag([0.5, 1.0, 2.0, 3.0 + 1j]) @ np.linalg.inv(V)
    a = eigen_apply(A, np.log)[0]
    b = contour_apply(A, np.log)
    np.testing.assert_allclose(a, b, atol=1e-9 * np.abs(a).max())


def test_m_tilde_reference():
    assert m_tilde(1.0, 1.0, math.pi / 6, 2.0, math.pi / 4) == pytest.approx(2.061, abs=1e-3)


@pytest.mark.parametrize("q,psi", [(2.0, math.pi / 4), (1.5, math.pi / 3)])
def test_frac_power_bound_dominates(q, psi):
    rng = np.random.default_rng(7)
    V = rng.normal(size=(4, 4))
    A = V @ np.diag([1.0, 2.0, polar(3.0, 0.3), polar(3.0, -0.3)]) @ np.linalg.inv(V)
    S = certify_sectorial(A, 0.3)
    for variant in ("printed", "proof"):
        mt, rep = frac_power_sectorial_bound(S, q, psi, variant)
        assert rep.margin >= 0


def test_frac_power_resolvent_ratio(diag14):
    rep = frac_power_resolvent_report(diag14, 0.5, math.pi / 4)
    assert rep.passed


def test_matrix_json_roundtrip(tmp_path):
    A = np.array([[1 + 2j, 0.5], [0, 3 - 1j]])
    back = matrix_from_json(matrix_to_json(A))
    np.testing.assert_array_equal(back, A)
    np.testing.assert_array_equal(matrix_from_json([[1, 2], [3, 4]]), [[1, 2], [3, 4]])
    with pytest.raises(ParameterError):
        matrix_from_json([[1, 2, 3]])


def test_matrix_market(tmp_path):
    from scipy.io import mmwrite
    A = np.array([[1 + 1j, 0], [0.5, 2]])
    p = tmp_path / "a.mtx"
    mmwrite(str(p), A)
    np.testing.assert_allclose(load_matrix(str(p)), A)


def test_serialisation(diag14):
    d = diag14.to_dict()
    assert d["injective"] and d["safety_factor"] == SAFETY
    assert len(d["eigenvalues"]) == 2
