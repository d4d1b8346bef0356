"""Scalar resolvent representations of (z + f(lambda))^{-1}.

Both ray representations integrate along arg zeta = pi/q:

  at infinity:  1/(z + f(inf)) + (q/pi) int Im f(te^{ipi/q}) t^{q-1} K(t) / (lambda^q + t^q) dt
  at zero:      1/(z + f(0+)) - (q/pi) int Im f(te^{ipi/q}) lambda^q K(t) / (t (lambda^q + t^q)) dt

with K(t) = 1/((z + f(te^{ipi/q})) (z + f(te^{-ipi/q}))). The second form
carries a 1/t that the contour argument produces; without it the formula
does not reproduce the resolvent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ParameterError
from .functions import CBF, E, NP, FunctionSpec
from .quad import IntegralResult, QuadratureConfig, integrate_half_line, integrate_real_line

AT_INFINITY = "atInfinity"
AT_ZERO = "atZero"


@dataclass(frozen=True)
class RepresentationChoice:
    q: float
    form: str = AT_INFINITY
    cbf_mode: bool = False

    def __post_init__(self):
        if self.form not in (AT_INFINITY, AT_ZERO):
            raise ParameterError(f"form must be {AT_INFINITY!r} or {AT_ZERO!r}")
        lo = 1.0 if self.cbf_mode else 2.0
        if not (self.q > lo):
            raise ParameterError(f"q must exceed {lo:g} ({'CBF' if self.cbf_mode else 'general'} mode)")

    @property
    def psi(self) -> float:
        return math.pi * (1 - 1 / self.q)


@dataclass
class ScalarResult:
    value: complex
    err: float
    nodes: int
    head: complex
    integral: IntegralResult
    min_denominator_margin: float | None = None

    def to_dict(self):
        return {"value": [self.value.real, self.value.imag], "err": self.err, "nodes": self.nodes}


def default_q(theta: float, cbf_mode: bool = False) -> float:
    """max(pi/(pi - theta) + 0.1, 2.5); in CBF mode the floor is 1.1."""
    return max(math.pi / (math.pi - theta) + 0.1, 1.1 if cbf_mode else 2.5)


def pick_form(f: FunctionSpec, form: str | None = None) -> str:
    """Prefer the head term at infinity when f(inf) is finite, else at 0+."""
    l0, linf = f.limits()
    if form is not None:
        lim = linf if form == AT_INFINITY else l0
        if lim is None:
            raise ParameterError(f"form {form} needs the corresponding limit of f, which is undetermined")
        return form
    if linf is not None and math.isfinite(linf):
        return AT_INFINITY
    if l0 is not None and math.isfinite(l0):
        return AT_ZERO
    if linf is not None:
        return AT_INFINITY
    if l0 is not None:
        return AT_ZERO
    raise ParameterError("neither f(0+) nor f(inf) is determined")


def choose(f: FunctionSpec, z: complex, lam: complex | None = None, q: float | None = None,
           form: str | None = None, cbf_mode: bool | None = None) -> RepresentationChoice:
    if cbf_mode is None:
        cbf_mode = CBF in f.tags and (E not in f.tags or (q is not None and q <= 2))
    if q is None:
        q = default_q(abs(np.angle(z)), cbf_mode)
    return RepresentationChoice(float(q), pick_form(f, form), bool(cbf_mode))


def _head(z, lim):
    if lim is None:
        raise ParameterError("the limit needed for the head term is undetermined")
    return 0j if math.isinf(lim) else 1.0 / (z + lim)


def ray_values(f: FunctionSpec, t: np.ndarray, q: float):
    """f(te^{ipi/q}) and f(te^{-ipi/q}); conjugate symmetry is used for tagged f."""
    w = np.exp(1j * math.pi / q)
    fp = f._eval(t * w)
    fm = np.conj(fp) if NP in f.tags else f._eval(t * np.conj(w))
    return fp, fm


def scalar_integrand(f, choice: RepresentationChoice, lam, z):
    q = choice.q
    lq = complex(lam) ** q

    def g(t):
        fp, fm = ray_values(f, t, q)
        im = (fp - fm) / 2j
        ker = im / ((z + fp) * (z + fm))
        # split at t = 1 so that no power of t overflows
        big = t > 1.0
        with np.errstate(over="ignore", under="ignore"):
            tq = np.where(big, t ** (-q), t ** q)     # t^-q above 1, t^q below
            if choice.form == AT_INFINITY:
                # t^{q-1}/(lam^q + t^q)
                w = np.where(big, 1.0 / (t * (1.0 + lq * tq)), (tq / t) / (tq + lq))
                return (q / math.pi) * ker * w
            # lam^q/(t (lam^q + t^q))
            w = np.where(big, lq * tq / (t * (lq * tq + 1.0)), 1.0 / (t * (1.0 + tq / lq)))
            return -(q / math.pi) * ker * w
    return g


def check_sectors(choice: RepresentationChoice, lam, z):
    q = choice.q
    if not (abs(np.angle(lam)) < math.pi / q) or lam == 0:
        raise ParameterError(f"lambda must lie in the sector |arg| < pi/q = {math.pi / q:.6g}")
    if not (abs(np.angle(z)) < math.pi - math.pi / q) or z == 0:
        raise ParameterError(f"z must lie in the sector |arg| < pi - pi/q = {math.pi - math.pi / q:.6g}")


def scalar_resolvent(f: FunctionSpec, choice: RepresentationChoice, lam: complex, z: complex,
                     cfg: QuadratureConfig | None = None, debug: bool = False) -> ScalarResult:
    """(z + f(lam))^{-1} from a ray representation."""
    cfg = cfg or QuadratureConfig()
    lam = complex(lam)
    z = complex(z)
    if choice.cbf_mode:
        if CBF not in f.tags:
            raise ParameterError("CBF mode needs a CBF-tagged function")
    elif E not in f.tags:
        raise ParameterError("the representation is only absolutely convergent for E-class functions; "
                             "use a function tagged E or CBF mode")
    check_sectors(choice, lam, z)
    l0, linf = f.limits()
    head = _head(z, linf if choice.form == AT_INFINITY else l0)
    g = scalar_integrand(f, choice, lam, z)
    res = integrate_half_line(g, 0.0, -2.0, cfg)
    margin = None
    if debug and not choice.cbf_mode:
        margin = denominator_margin(f, choice.q, z, cfg)
    return ScalarResult(head + complex(res.value), res.err, res.evaluations, head, res, margin)


def denominator_margin(f: FunctionSpec, q: float, z: complex, cfg=None, n: int = 241) -> float:
    """min over a t-grid of |z + f(te^{+-ipi/q})| - cos(psi) cos((theta+psi)/2)(|z| + f(t)), psi = pi/q.

    Raises AssertionError when the lower bound is violated.
    """
    psi = math.pi / q
    th = abs(np.angle(z))
    t = np.geomspace(1e-8, 1e8, n)
    fp, fm = ray_values(f, t, q)
    c = math.cos(psi) * math.cos((th + psi) / 2)
    bound = c * (abs(z) + f.real(t))
    m = np.minimum(np.abs(z + fp), np.abs(z + fm)) - bound
    worst = float(np.min(m / np.maximum(1.0, bound)))
    assert worst >= -1e-12, f"denominator lower bound violated (relative margin {worst:.3g})"
    return worst


def j_integral(f: FunctionSpec, theta: float, r: float, cfg: QuadratureConfig | None = None) -> IntegralResult:
    """J_theta(r; f) = int_0^inf |Im f(te^{i theta})| / ((r + f(t))^2 t) dt."""
    if not (0 < theta < math.pi / 2):
        raise ParameterError("theta must lie in (0, pi/2)")
    if not (r > 0):
        raise ParameterError("r must be positive")
    cfg = cfg or QuadratureConfig()
    w = np.exp(1j * theta)

    def g(t):
        im = np.abs(f._eval(t * w).imag)
        d = r + f.real(t)
        return (im / d) / (d * t)
    return integrate_half_line(g, 0.0, -2.0, cfg)


def oracle(f: FunctionSpec, lam, z):
    return 1.0 / (z + f(lam))


# ---------------------------------------------------------------- log(1 + z), q = 2

def _log1p_t_form(z, lam):
    """(2/pi) t arctan t / (((z + log sqrt(1+t^2))^2 + arctan^2 t)(lam^2 + t^2)) dt, t = e^u."""
    def h(u):
        with np.errstate(over="ignore", under="ignore"):
            e = np.exp(np.minimum(u, 700.0))
            at = np.arctan(e)
            half_log = 0.5 * np.logaddexp(0.0, 2 * u)
            # t * t/(lam^2 + t^2) with t = e^u, written without overflow
            em2 = np.exp(-2 * np.maximum(u, 0.0))
            ep2 = np.exp(2 * np.minimum(u, 0.0))
            ratio = np.where(u > 0, 1.0 / (1.0 + lam ** 2 * em2), ep2 / (ep2 + lam ** 2))
        return (2 / math.pi) * at * ratio / ((z + half_log) ** 2 + at ** 2)
    return h


def _log1p_s_form(z, lam):
    """Same integral after t = tan s; s = (pi/2) expit(u), with cos s = sin(pi/2 - s) in log form."""
    def h(u):
        s = (math.pi / 2) * expit(u)
        log_eps = math.log(math.pi / 2) - np.logaddexp(0.0, u)
        eps = np.exp(log_eps)
        sinc = np.sinc(eps / math.pi)               # sin(eps)/eps
        log_cos = log_eps + np.log(sinc)
        cos_s = eps * sinc
        sin_s = np.sin(s)
        # ds/du = s * eps / (pi/2); the cos^3 s and tan^2 s factors combine into
        # cos s (lam^2 cos^2 s + sin^2 s)
        jac_over_cos = s / (math.pi / 2) / sinc
        return (2 / math.pi) * s * sin_s * jac_over_cos / (
            ((z - log_cos) ** 2 + s ** 2) * (lam ** 2 * cos_s ** 2 + sin_s ** 2))
    return h


def log1p_closed_form(z: complex, lam: complex, cfg: QuadratureConfig | None = None):
    """(t-form, s-form) integrals for 1/(z + log(1 + lam)), both via the q = 2 ray.

    The integrands decay only like 1/(t log^2 t), so both are written in the
    log variable and integrated on the real line.
    """
    cfg = cfg or QuadratureConfig(rel_tol=1e-12)
    z = complex(z)
    lam = complex(lam)
    if not (z.real > 0 and lam.real > 0):
        raise ParameterError("z and lambda must lie in the right half-plane")
    rt = integrate_real_line(_log1p_t_form(z, lam), cfg)
    rs = integrate_real_line(_log1p_s_form(z, lam), cfg)
    return rt, rs
