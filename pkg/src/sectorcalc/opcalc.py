"""Operator resolvents (z + f(A))^{-1} from ray representations, and what they feed.

The representation integrates along arg zeta = pi/q:

  atInfinity: (z + f(inf))^{-1} I + (q/pi) int Im f(te^{ipi/q}) t^{q-1} K(t) (A^q + t^q)^{-1} dt
  atZero:     (z + f(0+))^{-1} I - (q/pi) int Im f(te^{ipi/q}) K(t)/t  A^q (A^q + t^q)^{-1} dt

with K(t) = 1/((z + f(te^{ipi/q}))(z + f(te^{-ipi/q}))). Each quadrature node
costs one dense solve with A^q + t^q; solves are cached per node so a family
of resolvents at many z shares them.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import expit

from .classcheck import estimate_kappa
from .errors import (CertificationError, HypothesisError, NumericalOverflowError, ParameterError,
                     SingularSystemError)
from .functions import BF, CBF, E, FunctionSpec, levy_triple_of
from .measures import LevyTriple, MeasureSpec
from .quad import Factored, QuadratureConfig, integrate_half_line, integrate_real_line
from .scalarcalc import AT_INFINITY, AT_ZERO, pick_form, ray_values
from .sectorial import (BoundReport, SectorialMatrix, certify_sectorial, m_tilde, matrix_function,
                        matrix_power, modulus_grid, sector_grid, beta_angle)

GENERAL = "general"
CBF_MODE = "cbf"
INTEGER_PREFERRED = "integerPreferred"
EXPLICIT = "explicit"


# ---------------------------------------------------------------- representation choice

@dataclass(frozen=True)
class OperatorRepChoice:
    q: float
    form: str = AT_INFINITY
    mode: str = GENERAL
    q_strategy: str = INTEGER_PREFERRED

    def __post_init__(self):
        if self.form not in (AT_INFINITY, AT_ZERO):
            raise ParameterError(f"form must be {AT_INFINITY!r} or {AT_ZERO!r}")
        if self.mode not in (GENERAL, CBF_MODE):
            raise ParameterError(f"mode must be {GENERAL!r} or {CBF_MODE!r}")
        if self.q_strategy not in (INTEGER_PREFERRED, EXPLICIT):
            raise ParameterError(f"q_strategy must be {INTEGER_PREFERRED!r} or {EXPLICIT!r}")

    @property
    def psi(self) -> float:
        return math.pi * (1 - 1 / self.q)

    def to_dict(self):
        return {"q": self.q, "form": self.form, "mode": self.mode, "qStrategy": self.q_strategy}


def q_interval(mode: str, omega: float, theta: float = 0.0) -> tuple[float, float]:
    """Open interval of admissible q: (max(pi/(pi - theta), floor), pi/omega)."""
    floor = 2.0 if mode == GENERAL else 1.0
    lo = max(math.pi / (math.pi - theta), floor)
    hi = math.inf if omega == 0 else math.pi / omega
    return lo, hi


def pick_q(lo: float, hi: float, strategy: str = INTEGER_PREFERRED) -> float:
    """Smallest integer in (lo, hi) for integerPreferred, else a point inside."""
    if not lo < hi:
        raise HypothesisError(f"no admissible q: interval ({lo:.6g}, {hi:.6g}) is empty", "q")
    # lo is open; a rounding of pi/(pi - theta) below an integer must not admit it
    k = math.floor(lo + 1e-9 * max(1.0, lo)) + 1
    if strategy == INTEGER_PREFERRED and k < hi:
        return float(k)
    return lo + 0.5 * (hi - lo) if math.isfinite(hi) else lo + 0.5


def _default_mode(f: FunctionSpec) -> str:
    if E in f.tags:
        return GENERAL
    if CBF in f.tags:
        return CBF_MODE
    raise HypothesisError(f"{f.describe()} is neither E-class nor CBF; no representation applies",
                          "injective-or-bf")


def check_hypotheses(f: FunctionSpec, S: SectorialMatrix, choice: OperatorRepChoice, z=None):
    q = choice.q
    if choice.mode == GENERAL:
        if not S.omega < math.pi / 2:
            raise HypothesisError(f"general mode needs omega < pi/2 (omega = {S.omega:.6g})", "angle")
        if BF not in f.tags:
            if E not in f.tags:
                raise HypothesisError(f"{f.describe()} is not E-class", "injective-or-bf")
            if not S.injective:
                raise HypothesisError("A is not injective and f is not Bernstein", "injective-or-bf")
        lo = 2.0
    else:
        if CBF not in f.tags:
            raise HypothesisError(f"CBF mode needs a CBF function, got {f.describe()}", "cbf")
        lo = 1.0
    hi = math.inf if S.omega == 0 else math.pi / S.omega
    if not (lo < q < hi):
        raise HypothesisError(f"q = {q:.6g} outside the admissible interval ({lo:g}, {hi:.6g})", "q")
    if z is not None:
        z = complex(z)
        if z == 0 or abs(np.angle(z)) >= choice.psi:
            raise HypothesisError(f"z must lie in the sector |arg z| < pi - pi/q = {choice.psi:.6g}", "angle")


def choose_rep(f: FunctionSpec, S: SectorialMatrix, z=None, mode: str | None = None, q: float | None = None,
               form: str | None = None, theta: float | None = None) -> OperatorRepChoice:
    """Representation for f at A; theta (default |arg z|) fixes the sector the choice must serve."""
    mode = mode or _default_mode(f)
    if theta is None:
        theta = 0.0 if z is None else abs(float(np.angle(complex(z))))
    if q is None:
        lo, hi = q_interval(mode, S.omega, theta)
        q = pick_q(lo, hi)
        strat = INTEGER_PREFERRED
    else:
        strat = EXPLICIT
    ch = OperatorRepChoice(float(q), pick_form(f, form), mode, strat)
    check_hypotheses(f, S, ch, z)
    return ch


# ---------------------------------------------------------------- node solves

class NodeSolver:
    """Cached node matrices for one (A, q).

    atInfinity nodes hold t^{q-1} (A^q + t^q)^{-1}, atZero nodes
    A^q (A^q + t^q)^{-1}; both are formed so that no power of t overflows.
    """

    def __init__(self, S, q: float, max_bytes: float = 96e6):
        A = S.A if isinstance(S, SectorialMatrix) else np.asarray(S, complex)
        self.A = A
        self.q = float(q)
        self.n = A.shape[0]
        self.B = matrix_power(A, q)
        if not np.all(np.isfinite(self.B)):
            raise NumericalOverflowError("A^q overflowed")
        self.cache = {AT_INFINITY: {}, AT_ZERO: {}}
        self.max_items = max(64, int(max_bytes / (16 * self.n * self.n)))
        self.solves = 0

    def _compute(self, t: np.ndarray, form: str) -> np.ndarray:
        n, q, B = self.n, self.q, self.B
        I = np.eye(n)
        out = np.empty((t.size, n, n), complex)
        small = t < 1.0
        with np.errstate(over="ignore", under="ignore"):
            if np.any(small):
                ts = t[small]
                s = np.maximum(ts ** q, 1e-300)
                M = B[None] + s[:, None, None] * I[None]
                rhs = np.broadcast_to(I if form == AT_INFINITY else B, M.shape)
                X = np.linalg.solve(M, rhs)
                if form == AT_INFINITY:
                    X = X * (ts ** (q - 1))[:, None, None]
                out[small] = X
            if np.any(~small):
                tl = t[~small]
                w = tl ** (-q)
                M = I[None] + w[:, None, None] * B[None]
                if form == AT_INFINITY:
                    X = np.linalg.solve(M, np.broadcast_to(I, M.shape)) / tl[:, None, None]
                else:
                    X = np.linalg.solve(M, w[:, None, None] * B[None])
                out[~small] = X
        self.solves += t.size
        if not np.all(np.isfinite(out)):
            bad = t[~np.isfinite(out.reshape(t.size, -1)).all(axis=1)][0]
            raise SingularSystemError(f"node solve with A^q + t^q failed at t = {bad:.6g}")
        return out

    def _checked(self, t, form):
        try:
            return self._compute(t, form)
        except np.linalg.LinAlgError as e:
            raise SingularSystemError(f"node solve with A^q + t^q is singular near t = {t[0]:.6g}") from e

    def nodes_and_norms(self, t: np.ndarray, form: str, chunk: int = 15):
        """Node matrices at t and the max-abs entry of each one."""
        # keyed by chunks of abscissae: quadrature panels recur across z
        cache = self.cache[form]
        t = np.ascontiguousarray(t, float)
        parts = []
        for i in range(0, t.size, chunk):
            tc = t[i:i + chunk]
            key = tc.tobytes()
            hit = cache.get(key)
            if hit is None:
                val = self._checked(tc, form)
                hit = (val, np.abs(val).reshape(tc.size, -1).max(axis=1))
                if (len(cache) + 1) * chunk > self.max_items:
                    cache.clear()
                cache[key] = hit
            parts.append(hit)
        if len(parts) == 1:
            return parts[0]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def nodes(self, t: np.ndarray, form: str, chunk: int = 15) -> np.ndarray:
        return self.nodes_and_norms(t, form, chunk)[0]


@dataclass
class OperatorResult:
    value: np.ndarray
    err: float
    evaluations: int
    choice: OperatorRepChoice
    head: complex

    def to_dict(self):
        from .sectorial import matrix_to_json
        return {"value": matrix_to_json(self.value), "err": self.err, "evaluations": self.evaluations,
                "choice": self.choice.to_dict()}


def operator_resolvent_full(f: FunctionSpec, S: SectorialMatrix, z: complex,
                            choice: OperatorRepChoice | None = None, cfg: QuadratureConfig | None = None,
                            solver: NodeSolver | None = None) -> OperatorResult:
    z = complex(z)
    if choice is None:
        choice = choose_rep(f, S, z)
    else:
        check_hypotheses(f, S, choice, z)
    cfg = cfg or QuadratureConfig(rel_tol=1e-9)
    q = choice.q
    if solver is None or solver.q != q or solver.A is not S.A:
        solver = NodeSolver(S, q)
    l0, linf = f.limits()
    lim = linf if choice.form == AT_INFINITY else l0
    if lim is None:
        raise ParameterError("the limit needed for the head term is undetermined")
    head = 0j if math.isinf(lim) else 1.0 / (z + lim)
    sign = 1.0 if choice.form == AT_INFINITY else -1.0

    def h(t):
        fp, fm = ray_values(f, t, q)
        w = (q / math.pi) * ((fp - fm) / 2j) / ((z + fp) * (z + fm))
        if choice.form == AT_ZERO:
            w = w / t
        X, norms = solver.nodes_and_norms(t, choice.form)
        return Factored(sign * w, X, norms)

    res = integrate_half_line(h, 0.0, -2.0, cfg)
    val = head * np.eye(S.n) + np.asarray(res.value)
    return OperatorResult(val, res.err, res.evaluations, choice, head)


def operator_resolvent(f: FunctionSpec, S: SectorialMatrix, z: complex, choice: OperatorRepChoice | None = None,
                       cfg: QuadratureConfig | None = None, solver: NodeSolver | None = None) -> np.ndarray:
    """(z + f(A))^{-1} from the ray representation."""
    return operator_resolvent_full(f, S, z, choice, cfg, solver).value


def eigen_oracle_resolvent(f: FunctionSpec, S, z: complex) -> np.ndarray:
    """Per-eigenvalue oracle V diag(1/(z + f(lambda_i))) V^{-1}."""
    z = complex(z)
    return matrix_function(S, lambda w: 1.0 / (z + f(w)))


class ResolventFamily:
    """(z + f(A))^{-1} for many z sharing one representation and node cache."""

    def __init__(self, f: FunctionSpec, S: SectorialMatrix, choice: OperatorRepChoice,
                 cfg: QuadratureConfig | None = None):
        check_hypotheses(f, S, choice)
        self.f, self.S, self.choice = f, S, choice
        self.cfg = cfg or QuadratureConfig(rel_tol=1e-9)
        self.solver = NodeSolver(S, choice.q)

    def __call__(self, z) -> np.ndarray:
        return operator_resolvent(self.f, self.S, z, self.choice, self.cfg, self.solver)


# ---------------------------------------------------------------- sectoriality bounds

def general_bound(kappa: float, Mt: float, theta: float, q: float) -> float:
    """1/sin(pi/q) + q M kappa / (pi cos^2(pi/q) cos^2((pi/q + theta)/2))."""
    p = math.pi / q
    return 1 / math.sin(p) + q * Mt * kappa / (math.pi * math.cos(p) ** 2 * math.cos((p + theta) / 2) ** 2)


def cbf_bound(Mt: float, theta: float, q: float) -> float:
    """1/sin(pi/q) + 2q tan(pi/(2q)) M / (pi cos(pi/q) cos^2((pi/q + theta)/2)).

    The expression is only positive for q > 2 (cos(pi/q) > 0); below that it
    carries no information and is rejected.
    """
    p = math.pi / q
    if not q > 2:       # cos(pi/2) rounds to 6e-17, so test q itself
        raise HypothesisError("the CBF sectoriality bound needs q > 2 to be finite and positive", "q")
    return 1 / math.sin(p) + 2 * q * math.tan(p / 2) * Mt / (math.pi * math.cos(p) * math.cos((p + theta) / 2) ** 2)


def kappa_for(f: FunctionSpec, q: float, cfg: QuadratureConfig | None = None) -> tuple[float, str]:
    """tan(pi/q) for Bernstein f, else the sampled sup of r J_{pi/q}(r; f)."""
    if BF in f.tags:
        return math.tan(math.pi / q), "Bernstein envelope tan(pi/q)"
    rep = estimate_kappa(f, math.pi / q, cfg=cfg)
    k = rep.constants.get("kappa")
    if k is None or not rep.passed or not math.isfinite(k):
        raise HypothesisError(f"kappa estimate for {f.describe()} did not resolve", "kappa")
    return float(k), "sampled sup of r J(r)"


def sigma_grid(theta: float, center_moduli, n_angles: int = 5, n_moduli: int = 8) -> np.ndarray:
    """40-point default grid in the open sector of angle theta."""
    m = np.asarray(center_moduli, float)
    mods = np.geomspace(m.min() / 100, m.max() * 100, n_moduli)
    return sector_grid(theta, mods, n_angles)


def sectoriality_bound(f: FunctionSpec, S: SectorialMatrix, theta: float, q: float | None = None,
                       mode: str | None = None, kappa: float | None = None, cfg: QuadratureConfig | None = None,
                       zs=None, measure: bool = True) -> tuple[float, BoundReport]:
    """Sectoriality constant of f(A) on Sigma_theta and its comparison with measured ||z (z + f(A))^{-1}||."""
    mode = mode or _default_mode(f)
    if not (0 < theta < math.pi - S.omega):
        raise ParameterError(f"theta must lie in (0, pi - omega) = (0, {math.pi - S.omega:.6g})")
    if q is None:
        lo, hi = q_interval(mode, S.omega, theta)
        if mode == CBF_MODE:
            lo = max(lo, 2.0)          # the CBF bound is vacuous for q <= 2
        q = pick_q(lo, hi)
    lo, hi = q_interval(mode, S.omega, theta)
    if not (lo < q < hi):
        raise HypothesisError(f"q = {q:.6g} outside ({lo:.6g}, {hi:.6g})", "q")
    beta = beta_angle(S.omega, q, 0.0)
    Mt = m_tilde(S.M_A, S.M(beta), S.omega, q, 0.0)
    notes = ["M constants are ray-sampled with a 1.05 guard"]
    if mode == CBF_MODE:
        bound = cbf_bound(Mt, theta, q)
        ksrc, kappa = "CBF form", None
    else:
        if kappa is None:
            kappa, ksrc = kappa_for(f, q, cfg)
        else:
            ksrc = "supplied"
        bound = general_bound(kappa, Mt, theta, q)
    notes.append(f"kappa: {ksrc}")
    inputs = {"q": q, "theta": theta, "omega": S.omega, "M_tilde": Mt, "M_A": S.M_A, "M_beta": S.M(beta),
              "beta": beta, "kappa": kappa, "mode": mode, "function": f.describe()}
    measured = math.nan
    grid = {}
    if measure:
        choice = OperatorRepChoice(q, pick_form(f), mode)
        fam = ResolventFamily(f, S, choice, cfg)
        if zs is None:
            fv = np.abs(f(S.eigenvalues.astype(complex)))
            fv = fv[fv > 0]
            zs = sigma_grid(theta, fv if fv.size else [1.0])
        vals = [abs(z) * np.linalg.norm(fam(z), 2) for z in zs]
        measured = float(max(vals))
        grid = {"points": len(zs), "z": [[complex(z).real, complex(z).imag] for z in zs],
                "scaled_norm": vals}
    return bound, BoundReport("sectoriality constant of f(A)", inputs, bound, measured, grid, notes)


# ---------------------------------------------------------------- improving maps

def improved_resolvent(f: FunctionSpec, alpha: float, S: SectorialMatrix, z: complex,
                       cfg: QuadratureConfig | None = None, choice: OperatorRepChoice | None = None):
    """(z + f(A^alpha))^{-1}: A^alpha is certified at angle alpha omega first.

    Returns (resolvent, certified A^alpha).
    """
    if not (0.5 < alpha < 1):
        raise ParameterError("alpha must lie in (1/2, 1)")
    if not S.omega < math.pi / (2 * alpha):
        raise ParameterError(f"need omega < pi/(2 alpha) = {math.pi / (2 * alpha):.6g}")
    if not (S.injective or BF in f.tags):
        raise HypothesisError("A is not injective and f is not Bernstein", "injective-or-bf")
    B = matrix_function(S, lambda w: np.power(w.astype(complex), alpha))
    try:
        SB = certify_sectorial(B, alpha * S.omega, arg_tol=1e-9)
    except CertificationError as e:
        eig = np.linalg.eigvals(B)
        raise CertificationError(f"{e}; eigenvalue arguments of A^alpha: {np.round(np.angle(eig), 12).tolist()}") from e
    return operator_resolvent(f, SB, z, choice, cfg), SB


# ---------------------------------------------------------------- subordination and semigroups

def semigroup_family(A, cond_limit: float = 1e8):
    """t -> e^{-tA} for arrays of t, and t -> I - e^{-tA} without cancellation.

    Diagonalizes once when the eigenvector basis is well conditioned, else
    falls back to one dense exponential per t.
    """
    A = np.asarray(A, complex)
    n = A.shape[0]
    w, V = np.linalg.eig(A)
    if np.isfinite(np.linalg.cond(V)) and np.linalg.cond(V) < cond_limit:
        Vi = np.linalg.inv(V)

        def sg(t, minus=False):
            t = np.asarray(t, float)
            x = -np.outer(t, w)
            d = -np.expm1(x) if minus else np.exp(x)
            return np.einsum("ij,kj,jl->kil", V, d, Vi)
        return sg

    def sg(t, minus=False):
        t = np.asarray(t, float)
        E_ = np.stack([sla.expm(-s * A) for s in t])
        return np.eye(n)[None] - E_ if minus else E_
    return sg


def bernstein_apply(f, S, cfg: QuadratureConfig | None = None) -> np.ndarray:
    """a I + b A + int (I - e^{-tA}) mu(dt) for a Bernstein function or a Levy triple."""
    A = S.A if isinstance(S, SectorialMatrix) else np.asarray(S, complex)
    triple = f if isinstance(f, LevyTriple) else levy_triple_of(f)
    n = A.shape[0]
    out = triple.a * np.eye(n) + triple.b * A
    if triple.mu.is_zero:
        return out.astype(complex)
    cfg = cfg or QuadratureConfig(rel_tol=1e-11, abs_tol=1e-14)
    sg = semigroup_family(A)
    r = triple.mu.integrate(lambda t: sg(t, minus=True), cfg, 1.0, 0.0)
    if not r.converged:
        raise ParameterError(f"Levy integral did not converge (err {r.err:.3g})")
    return out + np.asarray(r.value)


def semigroup(fA, s: float) -> np.ndarray:
    """e^{-s fA} by scaling and squaring."""
    if not s >= 0:
        raise ParameterError("s must be nonnegative")
    fA = np.asarray(fA, complex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out = sla.expm(-s * fA)
    if not np.all(np.isfinite(out)):
        raise NumericalOverflowError(f"e^(-s f(A)) overflowed (||s f(A)|| = {s * np.linalg.norm(fA, 2):.3g})")
    return out


def barycentre(S: SectorialMatrix, mu: MeasureSpec, cfg: QuadratureConfig | None = None,
               mass_tol: float = 1e-9) -> np.ndarray:
    """T = int e^{-tA} mu(dt) for a probability measure mu on [0, inf)."""
    if not S.omega < math.pi / 2:
        raise ParameterError("the barycentre needs omega < pi/2")
    cfg = cfg or QuadratureConfig(rel_tol=1e-12, abs_tol=1e-15)
    mass = mu.mass(cfg)
    if not abs(mass - 1.0) <= mass_tol:
        raise ParameterError(f"mu must be a probability measure (mass {mass:.12g})")
    sg = semigroup_family(S.A)
    r = mu.integrate(lambda t: sg(t), cfg, 0.0, 0.0)
    if not r.converged:
        raise ParameterError(f"barycentre integral did not converge (err {r.err:.3g})")
    return np.asarray(r.value, complex)


def barycentre_generator(mu: MeasureSpec) -> LevyTriple:
    """Levy triple (0, 0, mu restricted to (0, inf)) with T = I - f(A)."""
    atoms = tuple((s, w) for s, w in mu.atoms if s > 0)
    return LevyTriple(0.0, 0.0, MeasureSpec(atoms, mu.density, mu.series))


# ---------------------------------------------------------------- Ritt operators

@dataclass
class RittReport:
    T: np.ndarray
    angle_claim: float
    theta_prime: float
    lam: np.ndarray
    margins: np.ndarray
    scaled: np.ndarray
    C: float
    C_by_decade: list
    stable: bool
    spectrum_ok: bool
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.stable and self.spectrum_ok and math.isfinite(self.C) and np.all(self.margins >= 0))

    def to_dict(self):
        from .sectorial import matrix_to_json
        return {"T": matrix_to_json(self.T), "angle_claim": self.angle_claim, "theta_prime": self.theta_prime,
                "C": self.C, "C_by_decade": self.C_by_decade, "stable": self.stable,
                "spectrum_ok": self.spectrum_ok, "passed": self.passed,
                "lambda": [[complex(l).real, complex(l).imag] for l in self.lam],
                "scaled": self.scaled.tolist(), "margins": self.margins.tolist(), "notes": self.notes}


def check_ritt(T, theta: float, theta_prime: float | None = None, rho_min: float = 1e-6, rho_max: float = 1e-1,
               per_decade: int = 4, n_angles: int = 5, stab_tol: float = 0.05, tol: float = 1e-10) -> RittReport:
    """Ritt resolvent condition near 1 for T, with angle claim pi/2 - theta.

    lambda = 1 - rho e^{i phi}, |phi| < theta', |lambda| <= 1. The fitted C is
    the max of |lambda - 1| ||(lambda - T)^{-1}||; it is stable when the
    running max changes by less than stab_tol over the last two decades.
    """
    T = np.asarray(T, complex)
    if not (0 <= theta <= math.pi / 2):
        raise ParameterError("theta must lie in [0, pi/2]")
    claim = math.pi / 2 - theta
    if theta_prime is None:
        theta_prime = claim + 0.1 * (math.pi / 2 - claim) if claim < math.pi / 2 else claim * 0.999
        theta_prime = max(theta_prime, 1e-3)
    n = T.shape[0]
    ev = np.linalg.eigvals(T)
    one_minus = 1 - ev
    spec_ok = bool(np.all(np.abs(ev) <= 1 + tol) and
                   np.all((np.abs(one_minus) <= tol) | (np.abs(np.angle(one_minus)) <= claim + tol)))
    decades = int(round(math.log10(rho_max / rho_min)))
    rho = np.geomspace(rho_max, rho_min, decades * per_decade + 1)
    phis = theta_prime * 0.999 * np.linspace(-1, 1, n_angles)
    lam = (1 - rho[:, None] * np.exp(1j * phis[None, :]))
    keep = np.abs(lam) <= 1 + 1e-15
    I = np.eye(n)
    scaled = np.full(lam.shape, np.nan)
    for idx in zip(*np.nonzero(keep)):
        l = lam[idx]
        M = l * I - T
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= 1e-14 * max(1.0, s[0]):
            raise SingularSystemError(f"lambda = {l:.6g} is (numerically) in the spectrum of T", s[0] / max(s[-1], 1e-300))
        scaled[idx] = abs(l - 1) / s[-1]
    C = float(np.nanmax(scaled))
    by_dec = []
    for k in range(1, decades + 1):
        sel = rho >= rho_max / 10 ** k * (1 - 1e-12)
        by_dec.append(float(np.nanmax(scaled[sel])))
    stable = len(by_dec) >= 3 and by_dec[-1] <= by_dec[-3] * (1 + stab_tol)
    margins = C / np.abs(lam[keep] - 1) - scaled[keep] / np.abs(lam[keep] - 1)
    return RittReport(T, claim, theta_prime, lam[keep], margins, scaled[keep], C, by_dec, bool(stable), spec_ok,
                      [f"{int(keep.sum())} points, |lambda - 1| in [{rho_min:g}, {rho_max:g}]"])


# ---------------------------------------------------------------- log(1 + A), q = 2

def log1p_operator_s_form(S, z: complex, cfg: QuadratureConfig | None = None) -> np.ndarray:
    """(z + log(1 + A))^{-1} = (2/pi) int_0^{pi/2} s sin s / (((z - log cos s)^2 + s^2) cos s)
    (A^2 cos^2 s + sin^2 s)^{-1} ds, integrated in the logistic variable s = (pi/2) expit(u)."""
    A = S.A if isinstance(S, SectorialMatrix) else np.asarray(S, complex)
    z = complex(z)
    if not z.real > 0:
        raise ParameterError("z must lie in the right half-plane")
    cfg = cfg or QuadratureConfig(rel_tol=1e-10)
    n = A.shape[0]
    A2 = A @ A
    I = np.eye(n)

    def h(u):
        s = (math.pi / 2) * expit(u)
        log_eps = math.log(math.pi / 2) - np.logaddexp(0.0, u)
        eps = np.exp(log_eps)
        sinc = np.sinc(eps / math.pi)
        log_cos = log_eps + np.log(sinc)
        cos_s = eps * sinc
        sin_s = np.sin(s)
        jac_over_cos = s / (math.pi / 2) / sinc
        w = (2 / math.pi) * s * sin_s * jac_over_cos / ((z - log_cos) ** 2 + s ** 2)
        M = (cos_s ** 2)[:, None, None] * A2[None] + (sin_s ** 2)[:, None, None] * I[None]
        return w[:, None, None] * np.linalg.solve(M, np.broadcast_to(I, M.shape))

    return np.asarray(integrate_real_line(h, cfg).value)
