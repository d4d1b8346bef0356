"""Dense sectorial matrices: certification, resolvents, fractional powers and the appendix constants."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import CertificationError, ContourError, ParameterError, SingularSystemError
from .functions import FunctionSpec
from .quad import QuadratureConfig, integrate_half_line

SAFETY = 1.05


# ---------------------------------------------------------------- sampling helpers

def _as_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError("A must be a square matrix")
    if not np.all(np.isfinite(A)):
        raise ParameterError("A has non-finite entries")
    return A


def modulus_grid(eigs, n: int = 61, widen: float = 1e3) -> np.ndarray:
    """n log-spaced moduli spanning the spectral modulus range widened by `widen` each way."""
    mods = np.abs(np.asarray(eigs))
    mods = mods[mods > 0]
    lo, hi = (mods.min(), mods.max()) if mods.size else (1.0, 1.0)
    return np.geomspace(lo / widen, hi * widen, n)


def sector_grid(theta: float, moduli, n_angles: int = 5, edge: float = 0.999) -> np.ndarray:
    """Points of the open sector |arg z| < theta: n_angles symmetric rays times the moduli."""
    angs = theta * edge * np.linspace(-1.0, 1.0, n_angles)
    return (np.asarray(moduli)[None, :] * np.exp(1j * angs)[:, None]).ravel()


def _resolvent_norms(A: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """||(A + z)^{-1}||_2 for each z via the smallest singular value."""
    n = A.shape[0]
    M = A[None, :, :] + zs[:, None, None] * np.eye(n)[None]
    s = np.linalg.svd(M, compute_uv=False)
    with np.errstate(divide="ignore"):
        return 1.0 / s[:, -1]


def measure_ray_sup(A, angle: float, moduli) -> float:
    """sup over z = r e^{+-i angle} of ||z (A + z)^{-1}||."""
    A = _as_matrix(A)
    r = np.asarray(moduli, float)
    zs = np.concatenate([r * np.exp(1j * angle), r * np.exp(-1j * angle)])
    return float(np.max(np.abs(zs) * _resolvent_norms(A, zs)))


# ---------------------------------------------------------------- sectorial matrices

@dataclass
class SectorialMatrix:
    """A matrix with certified sector angle and measured resolvent constants.

    ``constants`` maps omega' to the guarded constant SAFETY * sup ||z (A+z)^{-1}||
    over the rays arg z = +-(pi - omega'); ``raw`` holds the unguarded sups.
    The sampled sups bound the true constants from below.
    """
    A: np.ndarray
    omega: float
    eigenvalues: np.ndarray
    constants: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    M_A: float = math.nan
    M_A_raw: float = math.nan
    injective: bool = True
    moduli: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def dense_range(self) -> bool:
        return self.injective

    def M(self, omega_prime: float) -> float:
        """Guarded M(A, omega'), measured on demand and cached."""
        if not (self.omega < omega_prime < math.pi):
            raise ParameterError(f"omega' must lie in (omega, pi) = ({self.omega:.6g}, pi)")
        key = float(omega_prime)
        if key not in self.constants:
            s = measure_ray_sup(self.A, math.pi - key, self.moduli)
            self.raw[key] = s
            self.constants[key] = SAFETY * s
        return self.constants[key]

    def lookup(self, beta: float) -> float:
        """Tabulated constant at the nearest omega' <= beta (M(A, .) is nonincreasing, so this over-estimates)."""
        keys = sorted(k for k in self.constants if self.omega < k <= beta)
        if not keys:
            return self.M(beta)
        return self.constants[keys[-1]]

    def to_dict(self) -> dict:
        return {
            "matrix": matrix_to_json(self.A), "omega": self.omega,
            "eigenvalues": [[complex(e).real, complex(e).imag] for e in self.eigenvalues],
            "constants": {f"{k:.12g}": v for k, v in sorted(self.constants.items())},
            "constants_raw": {f"{k:.12g}": v for k, v in sorted(self.raw.items())},
            "M_A": self.M_A, "M_A_raw": self.M_A_raw, "injective": self.injective,
            "safety_factor": SAFETY,
            "note": "constants are sampled on boundary rays and bound the true suprema from below",
        }


def default_omega_primes(omega: float) -> list[float]:
    out = [omega + k * (math.pi - omega) / 8 for k in range(1, 8)]
    if omega < math.pi / 2:
        out.append(math.pi / 2)
    return sorted(set(out))


def certify_sectorial(A, omega: float | None = None, n_moduli: int = 61, widen: float = 1e3,
                      omega_primes=None, arg_tol: float = 1e-10) -> SectorialMatrix:
    """Check sigma(A) lies in the closed sector of angle omega and measure M(A, omega').

    omega=None takes the largest eigenvalue argument. Zero eigenvalues are
    allowed and mark the matrix non-injective.
    """
    A = _as_matrix(A)
    try:
        eigs = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as e:
        raise CertificationError(f"eigensolver failed: {e}") from e
    scale = max(1.0, float(np.max(np.abs(eigs)))) if eigs.size else 1.0
    nonzero = np.abs(eigs) > 1e-14 * scale
    args = np.abs(np.angle(eigs[nonzero]))
    if omega is None:
        omega = float(args.max()) if args.size else 0.0
        omega = min(omega, math.pi - 1e-12)
    if not (0 <= omega < math.pi):
        raise ParameterError("omega must lie in [0, pi)")
    bad = args > omega + arg_tol
    if np.any(bad):
        worst = float(args.max())
        raise CertificationError(f"spectrum escapes the sector: max |arg lambda| = {worst:.12g} > omega = {omega:.12g}")
    mod = modulus_grid(eigs, n_moduli, widen)
    S = SectorialMatrix(A, float(omega), eigs, injective=bool(np.all(nonzero)), moduli=mod)
    for wp in (default_omega_primes(omega) if omega_primes is None else omega_primes):
        S.M(wp)
    # M(A) = sup_{s > 0} ||s (A + s)^{-1}||, sampled on the positive axis only
    raw = float(np.max(mod * _resolvent_norms(A, mod.astype(complex))))
    S.M_A_raw = raw
    S.M_A = SAFETY * raw
    return S


# ---------------------------------------------------------------- resolvents

def resolvent(S, z: complex, rtol: float = 1e-12) -> np.ndarray:
    """(A + z)^{-1} via a pivoted LU factorization, with a residual check."""
    A = S.A if isinstance(S, SectorialMatrix) else _as_matrix(S)
    n = A.shape[0]
    M = A + complex(z) * np.eye(n)
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            lu = sla.lu_factor(M)
            X = sla.lu_solve(lu, np.eye(n, dtype=complex))
        except (ValueError, np.linalg.LinAlgError, sla.LinAlgWarning) as e:
            cond = np.linalg.cond(M)
            raise SingularSystemError(f"A + z is numerically singular (cond ~ {cond:.3g})", cond) from e
    res = np.linalg.norm(M @ X - np.eye(n), 1)
    cond = np.linalg.norm(M, 1) * np.linalg.norm(X, 1)
    if not np.isfinite(res) or res > n * rtol * max(1.0, cond):
        raise SingularSystemError(f"resolvent residual {res:.3g} too large (cond ~ {cond:.3g})", cond)
    return X


def eigen_apply(A, g: Callable, cond_limit: float = 1e12):
    """g(A) = V g(D) V^{-1}; returns (matrix, eigenvector condition number)."""
    A = _as_matrix(A)
    w, V = np.linalg.eig(A)
    c = np.linalg.cond(V)
    if not np.isfinite(c) or c > cond_limit:
        raise ContourError(f"eigenvector matrix is ill-conditioned (cond {c:.3g}); matrix may be defective")
    gw = np.asarray(g(w), complex)
    return (V * gw[None, :]) @ np.linalg.inv(V), float(c)


def _domain_distance(c: complex) -> float:
    """Distance from c to the cut (-inf, 0]."""
    return abs(c) if c.real >= 0 else abs(c.imag)


def contour_circle(eigs, cut: bool = True) -> tuple[complex, float]:
    """Circle around the spectrum avoiding (-inf, 0].

    Centre: spectral centroid. Radius 1.5 x spread; if that meets the cut,
    the midpoint between spread and the distance to the cut; a single-point
    spectrum gets half the distance to the cut.
    """
    eigs = np.asarray(eigs, complex)
    c = complex(eigs.mean())
    spread = float(np.max(np.abs(eigs - c)))
    dist = _domain_distance(c) if cut else math.inf
    if spread >= dist:
        raise ContourError("no circle around the spectrum avoids (-inf, 0]; use the eigen oracle")
    if spread < 1e-12 * max(1.0, abs(c)):
        rad = 0.5 * dist if math.isfinite(dist) else 1.0
    else:
        rad = 1.5 * spread
        if rad >= dist:
            rad = 0.5 * (spread + dist)
    return c, rad


def contour_apply(A, g: Callable, cut: bool = True, rtol: float = 1e-12, n0: int = 32, nmax: int = 4096):
    """g(A) = (1/2 pi i) int g(lam) (lam - A)^{-1} dlam over a circle; trapezoid rule with doubling."""
    A = _as_matrix(A)
    n = A.shape[0]
    c, rad = contour_circle(np.linalg.eigvals(A), cut)
    I = np.eye(n)
    prev = None
    N = n0
    while True:
        phi = 2 * math.pi * (np.arange(N) + 0.5) / N
        lam = c + rad * np.exp(1j * phi)
        R = np.linalg.solve(lam[:, None, None] * I[None] - A[None], np.broadcast_to(I, (N, n, n)))
        gl = np.asarray(g(lam), complex)
        F = np.einsum("k,kij->ij", gl * rad * np.exp(1j * phi), R) / N
        if prev is not None and np.linalg.norm(F - prev) <= rtol * max(1.0, np.linalg.norm(F)):
            smin = float(np.min(np.linalg.svd(lam[:, None, None] * I[None] - A[None], compute_uv=False)[:, -1]))
            if smin < 1e-8 * max(1.0, np.linalg.norm(A, 2)):
                warnings.warn(f"contour passes close to the spectrum (min singular value {smin:.3g})")
            return F
        if N >= nmax:
            raise ContourError(f"contour rule did not settle with {N} nodes")
        prev = F
        N *= 2


def matrix_function(S, g, method: str = "eigenOracle"):
    """g(A) for a FunctionSpec or a vectorised holomorphic callable.

    eigenOracle diagonalizes and falls back to the contour rule (with a
    warning) when the eigenvector matrix is ill-conditioned.
    """
    A = S.A if isinstance(S, SectorialMatrix) else _as_matrix(S)
    fn = g.__call__ if isinstance(g, FunctionSpec) else g
    cut = True
    if method == "eigenOracle":
        try:
            return eigen_apply(A, fn)[0]
        except ContourError as e:
            warnings.warn(f"{e}; falling back to the contour rule")
            return contour_apply(A, fn, cut)
    if method == "contour":
        return contour_apply(A, fn, cut)
    raise ParameterError("method must be 'eigenOracle' or 'contour'")


def matrix_power(S, q: float, method: str = "eigenOracle") -> np.ndarray:
    """A^q with the principal branch; integer q uses repeated products."""
    A = S.A if isinstance(S, SectorialMatrix) else _as_matrix(S)
    if float(q).is_integer() and q >= 0:
        return np.linalg.matrix_power(A, int(q))
    return matrix_function(A, lambda w: np.power(w.astype(complex), q), method)


# ---------------------------------------------------------------- fractional powers q in (0, 1)

def fractional_resolvent_kato(S, q: float, z: complex, cfg: QuadratureConfig | None = None,
                              psi: float | None = None) -> np.ndarray:
    """(A^q + z)^{-1} for q in (0, 1) from the Kato integral

        sin(pi q)/pi int_0^inf t^q (A + t)^{-1} / ((t^q e^{i pi q} + z)(t^q e^{-i pi q} + z)) dt.
    """
    A = S.A if isinstance(S, SectorialMatrix) else _as_matrix(S)
    if not (0 < q < 1):
        raise ParameterError("q must lie in (0, 1)")
    z = complex(z)
    top = (1 - q) * math.pi
    if psi is not None and not (0 < psi < top):
        raise ParameterError(f"psi must lie in (0, (1-q) pi) = (0, {top:.6g})")
    lim = top if psi is None else psi
    if z == 0 or abs(np.angle(z)) >= lim:
        raise ParameterError(f"z must lie in the sector |arg z| < {lim:.6g}")
    cfg = cfg or QuadratureConfig(rel_tol=1e-11)
    n = A.shape[0]
    I = np.eye(n)
    e1, e2 = np.exp(1j * math.pi * q), np.exp(-1j * math.pi * q)

    def h(t):
        tq = t ** q
        w = tq / ((tq * e1 + z) * (tq * e2 + z))
        R = np.linalg.solve(A[None] + t[:, None, None] * I[None], np.broadcast_to(I, (t.size, n, n)))
        return w[:, None, None] * R
    order0 = q if np.all(np.abs(np.linalg.eigvals(A)) > 0) else q - 1
    res = integrate_half_line(h, order0, -1 - q, cfg)
    return math.sin(math.pi * q) / math.pi * np.asarray(res.value)


# ---------------------------------------------------------------- appendix bounds

@dataclass
class BoundReport:
    formula: str
    inputs: dict
    bound: float
    measured: float
    grid: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        return self.margin >= 0

    def to_dict(self):
        return {"formula": self.formula, "inputs": self.inputs, "bound": self.bound,
                "measured": self.measured, "margin": self.margin, "passed": self.passed,
                "grid": self.grid, "notes": list(self.notes)}


def frac_power_resolvent_bound(M: float, q: float, psi: float, r: float) -> float:
    """(sin pi q / (pi q)) ((pi q + psi) / sin(pi q + psi)) M / r, for q in (0, 1)."""
    if not (0 < q < 1):
        raise ParameterError("q must lie in (0, 1)")
    if not (0 <= psi < (1 - q) * math.pi):
        raise ParameterError("psi must lie in (0, (1-q) pi)")
    if not (r > 0):
        raise ParameterError("r must be positive")
    a = math.pi * q + psi
    return math.sin(math.pi * q) / (math.pi * q) * (a / math.sin(a)) * M / r


def beta_angle(omega: float, q: float, psi: float) -> float:
    return 0.5 * (omega + (math.pi - psi) / q)


def m_tilde(M_A: float, M_beta: float, omega: float, q: float, psi: float, variant: str = "printed") -> float:
    """M(A) + 2 M(A, beta) / (pi cos(beta/2) cos(c)), beta = (omega + (pi - psi)/q)/2.

    variant "printed": c = q beta / 2; variant "proof": c = (q beta + psi)/2,
    the value the contour estimate produces. They coincide at psi = 0.
    """
    if not (q > 1 and q * omega < math.pi):
        raise ParameterError("need q > 1 and q omega < pi")
    if not (0 <= psi < math.pi - q * omega):
        raise ParameterError(f"psi must lie in (0, pi - q omega) = (0, {math.pi - q * omega:.6g})")
    b = beta_angle(omega, q, psi)
    c = q * b / 2 if variant == "printed" else (q * b + psi) / 2
    if variant not in ("printed", "proof"):
        raise ParameterError("variant must be 'printed' or 'proof'")
    return M_A + 2 * M_beta / (math.pi * math.cos(b / 2) * math.cos(c))


def measured_sector_sup(B: np.ndarray, theta: float, moduli, n_angles: int = 5, scaled: bool = True) -> float:
    """sup over a sector grid of ||z (B + z)^{-1}|| (or ||(B + z)^{-1}|| when scaled=False)."""
    zs = sector_grid(theta, moduli, n_angles)
    norms = _resolvent_norms(_as_matrix(B), zs)
    return float(np.max((np.abs(zs) if scaled else 1.0) * norms))


def frac_power_sectorial_bound(S: SectorialMatrix, q: float, psi: float, variant: str = "printed",
                               n_angles: int = 7) -> tuple[float, BoundReport]:
    """M-tilde for A^q (q > 1) and its comparison with sup ||z (A^q + z)^{-1}|| over a Sigma_psi grid."""
    b = beta_angle(S.omega, q, psi)
    M_b = S.M(b)
    mt = m_tilde(S.M_A, M_b, S.omega, q, psi, variant)
    B = matrix_power(S, q)
    mods = modulus_grid(np.abs(S.eigenvalues) ** q, 61, 1e3)
    meas = measured_sector_sup(B, psi, mods, n_angles)
    rep = BoundReport("sectoriality constant of A^q", {"q": q, "psi": psi, "omega": S.omega, "beta": b,
                                                       "M_A": S.M_A, "M_beta": M_b, "variant": variant},
                      mt, meas, {"angles": n_angles, "moduli": len(mods)},
                      ["M constants are ray-sampled with a 1.05 guard"])
    return mt, rep


def frac_power_resolvent_report(S: SectorialMatrix, q: float, psi: float, zs=None,
                                cfg: QuadratureConfig | None = None) -> BoundReport:
    """Worst ratio measured/bound of ||(A^q + z)^{-1}|| over sampled z in Sigma_psi, reported as bound 1."""
    if zs is None:
        zs = sector_grid(psi, modulus_grid(np.abs(S.eigenvalues) ** q, 15, 1e2), 5)
    Aq = matrix_power(S, q)
    worst = 0.0
    for z in zs:
        nrm = np.linalg.norm(np.linalg.inv(Aq + z * np.eye(S.n)), 2)
        worst = max(worst, nrm / frac_power_resolvent_bound(S.M_A, q, psi, abs(z)))
    return BoundReport("fractional power resolvent bound (ratio)", {"q": q, "psi": psi, "M_A": S.M_A},
                       1.0, worst, {"points": len(zs)})


# ---------------------------------------------------------------- matrix I/O

def matrix_to_json(A) -> list:
    A = np.asarray(A, complex)
    return [[[v.real, v.imag] for v in row] for row in A]


def matrix_from_json(data) -> np.ndarray:
    try:
        arr = np.asarray(data, float)
    except (TypeError, ValueError) as e:
        raise ParameterError(f"matrix JSON must be nested numbers: {e}") from e
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return _as_matrix(arr[..., 0] + 1j * arr[..., 1])
    if arr.ndim == 2:
        return _as_matrix(arr)
    raise ParameterError("matrix JSON must be an n x n array of numbers or [re, im] pairs")


def load_matrix(path: str) -> np.ndarray:
    """Dense JSON or Matrix Market (.mtx) input."""
    if str(path).endswith(".mtx"):
        from scipy.io import mmread
        M = mmread(path)
        return _as_matrix(M.toarray() if hasattr(M, "toarray") else M)
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("matrix", data.get("A"))
    return matrix_from_json(data)
