"""Expression trees for positive Nevanlinna-Pick functions.

Each node is a frozen dataclass. Class tags are never passed in: they are
derived in ``__post_init__`` from the node kind and the children's tags via the
rule table in ``_derive_tags`` methods, then closed under the implications in
``close_tags``.

Nodes provide vectorised evaluation, analytic derivatives, Taylor jets on
(0, inf) (used for complete monotonicity checks) and limiting values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np
from scipy.special import binom, factorial, gamma

from .errors import DomainError, ParameterError, TagRuleError
from .measures import (LevyTriple, MeasureSpec, PowerExpDensity, StieltjesTriple)
from .quad import QuadratureConfig

# ---------------------------------------------------------------- tags

NP = "NP+"
CM = "CM"
BF = "BF"
CBF = "CBF"
D0P = "D0+"
D0M = "D0-"
DIP = "Dinf+"
DIM = "Dinf-"
D = "D"
E = "E"
S = "S"
# auxiliary: the sum/reciprocal closures D_0 and D_inf; D = D_0 and D_inf
D0 = "D0"
DI = "Dinf"

PUBLIC_TAGS = (NP, CM, BF, CBF, D0P, D0M, DIP, DIM, D, E, S)
ALL_TAGS = frozenset(PUBLIC_TAGS + (D0, DI))

_NP_IMPLIED = {D0P, D0M, DIP, DIM, D, E, S, D0, DI, BF}


def close_tags(tags) -> frozenset:
    t = set(tags)
    while True:
        n = len(t)
        if CBF in t:
            t.add(BF)
        if BF in t:
            t |= {NP, D0P, DIP, S}         # Bernstein bound, n = 1 product bound
        if CM in t and NP in t:
            t |= {D0M, DIM}                # CM and NP+ with (b, c) = (cos, sin)
        if t & {D0P, D0M}:
            t.add(D0)
        if t & {DIP, DIM}:
            t.add(DI)
        if D0 in t and DI in t:
            t.add(D)
        if D in t:
            t |= {D0, DI, E}
        if S in t:
            t.add(E)
        if t & _NP_IMPLIED:
            t.add(NP)
        if len(t) == n:
            return frozenset(t)


def public_tags(tags) -> list[str]:
    return [x for x in PUBLIC_TAGS if x in tags]


# ---------------------------------------------------------------- jets
# A jet is an array (n+1, m) of Taylor coefficients f^(k)(t)/k! at m points.

def jet_mul(a, b):
    n = a.shape[0]
    c = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    for k in range(n):
        c[k] = sum(a[j] * b[k - j] for j in range(k + 1))
    return c


def jet_recip(a):
    n = a.shape[0]
    b = np.zeros_like(a)
    b[0] = 1.0 / a[0]
    for k in range(1, n):
        b[k] = -b[0] * sum(a[j] * b[k - j] for j in range(1, k + 1))
    return b


def jet_pow(a, beta):
    n = a.shape[0]
    b = np.zeros_like(a)
    b[0] = a[0] ** beta
    for k in range(1, n):
        b[k] = sum(((beta + 1) * j - k) * a[j] * b[k - j] for j in range(1, k + 1)) / (k * a[0])
    return b


def jet_compose(outer, inner):
    """Jet of g(h(t)) from the jet of g at h(t) and the jet of h at t."""
    n = inner.shape[0]
    d = inner.copy()
    d[0] = 0.0
    out = np.zeros(np.broadcast_shapes(outer.shape, inner.shape), dtype=np.result_type(outer, inner))
    out[0] = outer[0]
    p = np.zeros_like(out)
    p[0] = 1.0
    for k in range(1, n):
        p = jet_mul(p, d)
        out = out + outer[k] * p
    return out


def _pole_jet(t, a, n, mult=1):
    """Jet of (x - a)^(-mult) at x = t, complex a allowed."""
    k = np.arange(n + 1)[:, None]
    x = t[None, :] - a
    if mult == 1:
        return (-1.0) ** k / x ** (k + 1)
    return (-1.0) ** k * (k + 1) / x ** (k + 2)


def _const_jet(t, c, n):
    j = np.zeros((n + 1, t.size))
    j[0] = c
    return j


# ---------------------------------------------------------------- base

def _as_complex(z):
    return np.asarray(z, dtype=complex)


@dataclass(frozen=True)
class FunctionSpec:
    """Base node. Subclasses implement ``_eval``, ``_deriv``, ``_taylor``, ``_limits``."""
    tags: frozenset = field(init=False, default=frozenset(), compare=False, repr=False)
    kind: ClassVar[str] = "FunctionSpec"

    def __post_init__(self):
        self._validate()
        object.__setattr__(self, "tags", close_tags(self._derive_tags()))

    def _validate(self):
        pass

    def _derive_tags(self):
        return set()

    @property
    def children(self) -> tuple:
        return ()

    def params(self) -> dict:
        return {}

    # evaluation --------------------------------------------------------
    def in_domain(self, z) -> np.ndarray:
        z = _as_complex(z)
        if CBF in self.tags:
            return ~((z.imag == 0) & (z.real <= 0))
        return z.real > 0

    def __call__(self, z):
        zz = _as_complex(z)
        if not np.all(self.in_domain(zz)):
            where = "the slit plane C minus (-inf, 0]" if CBF in self.tags else "the open right half-plane"
            raise DomainError(f"{self.kind}: evaluation point outside {where}")
        out = self._eval(zz)
        return out if np.ndim(z) else complex(out)

    def real(self, t):
        """f on (0, inf) as a real array."""
        return np.real(self._eval(_as_complex(t)))

    def deriv(self, z):
        zz = _as_complex(z)
        if not np.all(self.in_domain(zz)):
            raise DomainError(f"{self.kind}: derivative point outside the domain")
        out = self._deriv(zz)
        return out if np.ndim(z) else complex(out)

    def _eval(self, z):
        raise NotImplementedError

    def _deriv(self, z):
        raise NotImplementedError

    def taylor(self, t, n: int):
        """Taylor coefficients f^(k)(t)/k!, k = 0..n, shape (n+1, len(t)); None if unavailable."""
        t = np.atleast_1d(np.asarray(t, float))
        out = self._taylor(t, n)
        return None if out is None else np.real(out)

    def _taylor(self, t, n):
        return None

    @property
    def analytic(self) -> bool:
        return all(c.analytic for c in self.children)

    # limits ------------------------------------------------------------
    def limits(self) -> tuple:
        """(f(0+), f(inf)); entries are floats (possibly inf) or None if undetermined."""
        l0, linf = self._limits()
        if l0 is None:
            l0 = detect_limit(self, 0)
        if linf is None:
            linf = detect_limit(self, 1)
        return l0, linf

    def _limits(self):
        return None, None

    # serialisation ----------------------------------------------------
    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params(),
                "children": [c.to_json() for c in self.children],
                "tags": public_tags(self.tags)}

    def describe(self) -> str:
        ps = ", ".join(f"{k}={v}" for k, v in self.params().items() if not isinstance(v, dict))
        cs = ", ".join(c.describe() for c in self.children)
        inner = ", ".join(x for x in (ps, cs) if x)
        return f"{self.kind}({inner})"


# ---------------------------------------------------------------- limit detector

def detect_limit(f: FunctionSpec, end: int, kmax: int = 160, window: int = 8, rtol: float = 1e-6):
    """Limit of f(t) as t -> 0+ (end=0) or t -> inf (end=1) along t = 2^(-+k/2).

    Returns a float (0.0 or inf allowed) or None. Half-integer powers of two
    are used so that measures supported on a dyadic lattice do not alias into
    a spuriously constant sequence.
    """
    k = np.arange(kmax + 1)
    t = np.power(2.0, (k if end else -k) / 2.0)
    try:
        with np.errstate(all="ignore"):
            v = f.real(t)
    except Exception:
        return None
    v = np.asarray(v, float)
    good = np.isfinite(v) & (v > 0)
    for i in range(window, kmax + 2):
        seg = v[i - window:i]
        if not np.all(good[i - window:i]):
            continue
        if (seg.max() - seg.min()) <= rtol * abs(seg).max():
            return float(seg[-1])
    # stable power-law slope towards 0 or infinity
    seg = v[-window - 1:]
    if np.all(good[-window - 1:]):
        sl = np.diff(np.log(seg))
        if np.all(sl > 0) or np.all(sl < 0):
            if (sl.max() - sl.min()) <= 1e-3 * max(abs(sl).max(), 1e-300) + 1e-9 and abs(sl).min() > 1e-4:
                return math.inf if sl[0] > 0 else 0.0
    return None


def _combine_limit(op, *ls):
    if any(l is None for l in ls):
        return None
    with np.errstate(all="ignore"):
        r = op(*ls)
    return None if (r is None or (isinstance(r, float) and math.isnan(r))) else float(r)


# ---------------------------------------------------------------- atoms

@dataclass(frozen=True)
class Identity(FunctionSpec):
    kind: ClassVar[str] = "Identity"

    def _derive_tags(self):
        return {CBF}

    def _eval(self, z):
        return z.copy()

    def _deriv(self, z):
        return np.ones_like(z)

    def _taylor(self, t, n):
        j = np.zeros((n + 1, t.size))
        j[0] = t
        if n >= 1:
            j[1] = 1.0
        return j

    def _limits(self):
        return 0.0, math.inf


@dataclass(frozen=True)
class Constant(FunctionSpec):
    c: float = 1.0
    kind: ClassVar[str] = "Constant"

    def _validate(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ParameterError("Constant needs c > 0")

    def _derive_tags(self):
        return {CBF, CM}

    def params(self):
        return {"c": self.c}

    def _eval(self, z):
        return np.full_like(z, self.c)

    def _deriv(self, z):
        return np.zeros_like(z)

    def _taylor(self, t, n):
        return _const_jet(t, self.c, n)

    def _limits(self):
        return self.c, self.c


@dataclass(frozen=True)
class Power(FunctionSpec):
    alpha: float = 0.5
    kind: ClassVar[str] = "Power"

    def _validate(self):
        if not (0 < self.alpha <= 1):
            raise ParameterError("Power needs alpha in (0, 1]")

    def _derive_tags(self):
        return {CBF}

    def params(self):
        return {"alpha": self.alpha}

    def _eval(self, z):
        return z ** self.alpha

    def _deriv(self, z):
        return self.alpha * z ** (self.alpha - 1)

    def _taylor(self, t, n):
        k = np.arange(n + 1)[:, None]
        return binom(self.alpha, k) * t[None, :] ** (self.alpha - k)

    def _limits(self):
        return 0.0, math.inf


@dataclass(frozen=True)
class Log1p(FunctionSpec):
    kind: ClassVar[str] = "Log1p"

    def _derive_tags(self):
        return {CBF}

    def _eval(self, z):
        return np.log1p(z)

    def _deriv(self, z):
        return 1.0 / (1.0 + z)

    def _taylor(self, t, n):
        k = np.arange(1, n + 1)[:, None]
        j = np.empty((n + 1, t.size))
        j[0] = np.log1p(t)
        j[1:] = (-1.0) ** (k + 1) / (k * (1.0 + t[None, :]) ** k)
        return j

    def _limits(self):
        return 0.0, math.inf


@dataclass(frozen=True)
class OneMinusExp(FunctionSpec):
    kind: ClassVar[str] = "OneMinusExp"

    def _derive_tags(self):
        return {BF}

    def _eval(self, z):
        return -np.expm1(-z)

    def _deriv(self, z):
        return np.exp(-z)

    def _taylor(self, t, n):
        k = np.arange(1, n + 1)[:, None]
        j = np.empty((n + 1, t.size))
        j[0] = -np.expm1(-t)
        j[1:] = (-1.0) ** (k + 1) * np.exp(-t)[None, :] / factorial(k)
        return j

    def _limits(self):
        return 0.0, 1.0


@dataclass(frozen=True)
class CauchyAtom(FunctionSpec):
    """z (1 + s^2) / (s^2 + z^2)."""
    s: float = 1.0
    kind: ClassVar[str] = "CauchyAtom"

    def _validate(self):
        if not (self.s > 0):
            raise ParameterError("CauchyAtom needs s > 0")

    def _derive_tags(self):
        return {NP, D0P, DIM}

    def params(self):
        return {"s": self.s}

    def _eval(self, z):
        s2 = self.s ** 2
        z = np.asarray(z, complex)
        big = np.abs(z) > self.s
        zb = np.where(big, z, 1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.where(big, (1 + s2) / (s2 / zb + zb), z * (1 + s2) / (s2 + z * z))

    def _deriv(self, z):
        s2 = self.s ** 2
        z = np.asarray(z, complex)
        big = np.abs(z) > self.s
        zb = np.where(big, z, 1.0)
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            w = (self.s / zb) ** 2
            return np.where(big, (1 + s2) * (w - 1) / zb / zb / (1 + w) ** 2,
                            (1 + s2) * (s2 - z * z) / (s2 + z * z) ** 2)

    def _taylor(self, t, n):
        # z/(z^2+s^2) = (1/(z - is) + 1/(z + is))/2
        a = 1j * self.s
        return (1 + self.s ** 2) * np.real(_pole_jet(t, a, n))

    def _limits(self):
        return 0.0, 0.0


@dataclass(frozen=True)
class ExampleG(FunctionSpec):
    """(z + 2t)/(z + t)^2 = 1/(z + t) + t/(z + t)^2."""
    t: float = 1.0
    kind: ClassVar[str] = "ExampleG"

    def _validate(self):
        if not (self.t >= 0):
            raise ParameterError("ExampleG needs t >= 0")

    def _derive_tags(self):
        return {NP, CM}

    def params(self):
        return {"t": self.t}

    def _eval(self, z):
        r = 1.0 / (z + self.t)
        return r * (1.0 + self.t * r)

    def _deriv(self, z):
        w = z + self.t
        return -1.0 / w ** 2 - 2 * self.t / w ** 3

    def _taylor(self, x, n):
        return _pole_jet(x, -self.t, n) + self.t * _pole_jet(x, -self.t, n, 2)

    def _limits(self):
        return (2.0 / self.t if self.t > 0 else math.inf), 0.0


@dataclass(frozen=True)
class MoebiusSeries(FunctionSpec):
    """1 - sum_n c_n ((1 - z)/(1 + z))^n with sum |c_n| <= 1."""
    coeffs: tuple = (1.0,)
    kind: ClassVar[str] = "MoebiusSeries"

    def _validate(self):
        c = tuple(float(x) for x in self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if not c:
            raise ParameterError("MoebiusSeries needs at least one coefficient")
        if sum(abs(x) for x in c) > 1 + 1e-15:
            raise ParameterError("MoebiusSeries needs sum |c_n| <= 1")
        # h(t) > 0 on (0, inf) fails only when the polynomial 1 - P(m) vanishes inside (-1, 1)
        m = np.linspace(-1, 1, 4001)[1:-1]
        if np.any(self._poly(m) <= 0):
            raise ParameterError("MoebiusSeries is not positive on (0, inf) for these coefficients")

    def _derive_tags(self):
        return {NP, D}

    def params(self):
        return {"coeffs": list(self.coeffs)}

    def _poly(self, m):
        out = np.ones_like(m)
        p = np.ones_like(m)
        for c in self.coeffs:
            p = p * m
            out = out - c * p
        return out

    def _eval(self, z):
        return self._poly((1 - z) / (1 + z))

    def _deriv(self, z):
        m = (1 - z) / (1 + z)
        dm = -2.0 / (1 + z) ** 2
        acc = np.zeros_like(z)
        for n, c in enumerate(self.coeffs, start=1):
            acc = acc - c * n * m ** (n - 1)
        return acc * dm

    def _taylor(self, t, n):
        mj = 2.0 * _pole_jet(t, -1.0, n)
        mj[0] -= 1.0
        out = _const_jet(t, 1.0, n)
        p = _const_jet(t, 1.0, n)
        for c in self.coeffs:
            p = jet_mul(p, mj)
            out = out - c * p
        return out

    def _limits(self):
        s = sum(self.coeffs)
        alt = sum(c * (-1) ** n for n, c in enumerate(self.coeffs, start=1))
        return 1.0 - s, 1.0 - alt


# ---------------------------------------------------------------- measure-backed

_MEASURE_CFG = QuadratureConfig(rel_tol=1e-12, abs_tol=1e-15)


def _mass_or_inf(mu: MeasureSpec, cfg) -> float:
    """Total mass of mu, or inf when the declared orders make it infinite."""
    d = mu.density
    if d is not None:
        for p in d.terms():
            if p.lo == 0 and not (p.sing0 > -1):
                return math.inf
            if p.sing_inf is not None and math.isinf(p.hi) and not (p.sing_inf < -1):
                return math.inf
    return mu.mass(cfg)


@dataclass(frozen=True)
class FromLevy(FunctionSpec):
    """a + b z + int (1 - e^{-zs}) mu(ds)."""
    triple: LevyTriple = None
    cfg: QuadratureConfig = field(default=_MEASURE_CFG, compare=False)
    kind: ClassVar[str] = "FromLevy"

    def _validate(self):
        if not isinstance(self.triple, LevyTriple):
            raise ParameterError("FromLevy needs a LevyTriple")
        if self.triple.a == 0 and self.triple.b == 0 and self.triple.mu.is_zero:
            raise ParameterError("the zero function is not NP+")

    def _derive_tags(self):
        return {BF}

    def params(self):
        return self.triple.to_json()

    def _int(self, g, o0, oinf):
        r = self.triple.mu.integrate(g, self.cfg, o0, oinf)
        return r.value

    def _eval(self, z):
        tr = self.triple
        out = tr.a + tr.b * z
        if not tr.mu.is_zero:
            zf = z.ravel()
            v = self._int(lambda s: -np.expm1(-np.outer(s, zf)), 1.0, 0.0)
            out = out + np.reshape(v, z.shape)
        return out

    def _deriv(self, z):
        tr = self.triple
        out = np.full_like(z, tr.b)
        if not tr.mu.is_zero:
            zf = z.ravel()
            v = self._int(lambda s: s[:, None] * np.exp(-np.outer(s, zf)), 1.0, 0.0)
            out = out + np.reshape(v, z.shape)
        return out

    def _taylor(self, t, n):
        tr = self.triple
        j = np.zeros((n + 1, t.size))
        j[0] = self.real(t)
        if n >= 1:
            j[1] = tr.b
        if n >= 1 and not tr.mu.is_zero:
            k = np.arange(1, n + 1)
            sign = (-1.0) ** (k + 1) / factorial(k)

            def g(s):
                e = np.exp(-np.outer(s, t))                      # (m, nt)
                return sign[None, :, None] * s[:, None, None] ** k[None, :, None] * e[:, None, :]
            j[1:] = j[1:] + np.real(self._int(g, 1.0, 0.0))
        return j

    def _limits(self):
        # f(0+) = a by dominated convergence; f(inf) = a + b*inf + mass
        tr = self.triple
        mass = _mass_or_inf(tr.mu, self.cfg)
        linf = math.inf if (tr.b > 0 or math.isinf(mass)) else tr.a + mass
        return float(tr.a), linf


@dataclass(frozen=True)
class FromStieltjes(FunctionSpec):
    """a + b z + int z/(z + s) nu(ds)."""
    triple: StieltjesTriple = None
    cfg: QuadratureConfig = field(default=_MEASURE_CFG, compare=False)
    kind: ClassVar[str] = "FromStieltjes"

    def _validate(self):
        if not isinstance(self.triple, StieltjesTriple):
            raise ParameterError("FromStieltjes needs a StieltjesTriple")
        if self.triple.a == 0 and self.triple.b == 0 and self.triple.nu.is_zero:
            raise ParameterError("the zero function is not NP+")

    def _derive_tags(self):
        return {CBF}

    def params(self):
        return self.triple.to_json()

    def _int(self, g, o0, oinf):
        return self.triple.nu.integrate(g, self.cfg, o0, oinf).value

    def _eval(self, z):
        tr = self.triple
        out = tr.a + tr.b * z
        if not tr.nu.is_zero:
            zf = z.ravel()
            v = self._int(lambda s: zf[None, :] / (zf[None, :] + s[:, None]), 0.0, -1.0)
            out = out + np.reshape(v, z.shape)
        return out

    def _deriv(self, z):
        tr = self.triple
        out = np.full_like(z, tr.b)
        if not tr.nu.is_zero:
            zf = z.ravel()
            v = self._int(lambda s: s[:, None] / (zf[None, :] + s[:, None]) ** 2, 1.0, -1.0)
            out = out + np.reshape(v, z.shape)
        return out

    def _taylor(self, t, n):
        tr = self.triple
        j = np.zeros((n + 1, t.size))
        j[0] = self.real(t)
        if n >= 1:
            j[1] = tr.b
        if n >= 1 and not tr.nu.is_zero:
            k = np.arange(1, n + 1)[None, :, None]

            def g(s):
                x = t[None, None, :] + s[:, None, None]
                return -s[:, None, None] * (-1.0) ** k / x ** (k + 1)
            j[1:] = j[1:] + np.real(self._int(g, 1.0, -2.0))
        return j

    def _limits(self):
        tr = self.triple
        mass = _mass_or_inf(tr.nu, self.cfg)
        linf = math.inf if (tr.b > 0 or math.isinf(mass)) else tr.a + mass
        return float(tr.a), linf


@dataclass(frozen=True)
class FromCauchyMeasure(FunctionSpec):
    """a z + b/z + 2 z int (1 + s^2)/(s^2 + z^2) mu(ds), mu finite."""
    a: float = 0.0
    b: float = 0.0
    mu: MeasureSpec = MeasureSpec()
    cfg: QuadratureConfig = field(default=_MEASURE_CFG, compare=False)
    kind: ClassVar[str] = "FromCauchyMeasure"

    def _validate(self):
        if self.a < 0 or self.b < 0:
            raise ParameterError("FromCauchyMeasure needs a, b >= 0")
        if any(s <= 0 for s, _ in self.mu.atoms):
            raise ParameterError("FromCauchyMeasure: atoms must lie in (0, inf)")
        d = self.mu.density
        if d is not None:
            for p in d.terms():
                if p.lo == 0 and not (p.sing0 > -1):
                    raise ParameterError("FromCauchyMeasure: measure must be finite near 0")
                if p.sing_inf is not None and math.isinf(p.hi) and not (p.sing_inf < -1):
                    raise ParameterError("FromCauchyMeasure: measure must be finite near infinity")
        if self.a == 0 and self.b == 0 and self.mu.is_zero:
            raise ParameterError("the zero function is not NP+")

    def compact_support(self) -> bool:
        if self.mu.is_zero:
            return True
        lo, hi = self.mu.support_bounds()
        return lo > 0 and math.isfinite(hi)

    def _derive_tags(self):
        tags = {NP}
        if self.compact_support():
            if self.mu.is_zero:
                tags |= {D}
            elif self.a == 0 and self.b == 0:
                tags |= {D0P, DIM}
            else:
                tags |= {D}
        return tags

    def params(self):
        return {"a": self.a, "b": self.b, "measure": self.mu.to_json()}

    def _kernel_sum(self, z, deriv=False):
        zf = z.ravel()
        mu = self.mu

        def g(s):
            s = s[:, None]
            s2 = s * s
            zz = zf[None, :]
            if deriv:
                return 2 * (1 + s2) * (s2 - zz * zz) / (s2 + zz * zz) ** 2
            return 2 * zz * (1 + s2) / (s2 + zz * zz)

        if mu.is_zero:
            return np.zeros_like(z)
        v = mu.integrate(g, self.cfg, 0.0, 0.0).value
        return np.reshape(v, z.shape)

    def _eval(self, z):
        out = self.a * z + self._kernel_sum(z)
        if self.b:
            out = out + self.b / z
        return out

    def _deriv(self, z):
        out = self.a + self._kernel_sum(z, deriv=True)
        if self.b:
            out = out - self.b / z ** 2
        return out

    def _taylor(self, t, n):
        j = np.zeros((n + 1, t.size))
        if n >= 1:
            j[1] = self.a
        j[0] = self.a * t
        if self.b:
            j = j + self.b * _pole_jet(t, 0.0, n)
        if not self.mu.is_zero:
            k = np.arange(n + 1)[None, :, None]

            def g(s):
                x = t[None, None, :] - 1j * s[:, None, None]
                w = 2 * (1 + s ** 2)[:, None, None]
                return w * np.real((-1.0) ** k / x ** (k + 1))
            j = j + np.real(self.mu.integrate(g, self.cfg, 0.0, 0.0).value)
        return j

    def _limits(self):
        l0 = math.inf if self.b > 0 else None
        linf = math.inf if self.a > 0 else None
        if self.compact_support():
            if self.b == 0:
                l0 = 0.0
            if self.a == 0:
                linf = 0.0
        return l0, linf


# ---------------------------------------------------------------- combinators

def _all(children, tag):
    return all(tag in c.tags for c in children)


def product_weight(f: FunctionSpec):
    """Weight sum alpha_j beta_j of a product of Bernstein powers f_j(z^a)^b, or None.

    A product with total weight <= 1 lies in D. Constants contribute 0 since
    c = c(z^a)^b with a arbitrarily small.
    """
    if isinstance(f, Identity):
        return 1.0
    if isinstance(f, Power):
        return f.alpha
    if isinstance(f, Constant):
        return 0.0
    if isinstance(f, (ArgPower, PowerOf)):
        w = product_weight(f.f)
        return None if w is None else w * (f.alpha if isinstance(f, ArgPower) else f.beta)
    if isinstance(f, Product):
        ws = [product_weight(c) for c in f.factors]
        return None if any(w is None for w in ws) else sum(ws)
    if isinstance(f, Scale):
        return product_weight(f.f)
    if BF in f.tags:
        return 1.0
    return None


def np_range_check(f: FunctionSpec) -> bool:
    """Sampled witness that f maps C+ into C+ and (0, inf) into (0, inf)."""
    r = np.geomspace(1e-3, 1e3, 25)
    th = np.linspace(-0.49 * np.pi, 0.49 * np.pi, 15)
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    try:
        with np.errstate(all="ignore"):
            w = f._eval(z)
            x = f._eval(r.astype(complex))
    except Exception:
        return False
    ok = np.all(np.isfinite(w)) and np.all(w.real > 0)
    ok = ok and np.all(x.real > 0) and np.all(np.abs(x.imag) <= 1e-12 * np.abs(x.real))
    return bool(ok)


_SIGN_SWAP_RECIP = {D0P: D0M, D0M: D0P, DIP: DIM, DIM: DIP}
_SIGN_SWAP_INV = {D0P: DIM, DIM: D0P, D0M: DIP, DIP: D0M}


def _weight_tags(f):
    w = product_weight(f)
    if w is not None and w <= 1 + 1e-12:
        return {NP, D, D0P, DIP}
    return set()


@dataclass(frozen=True)
class Sum(FunctionSpec):
    terms: tuple = ()
    kind: ClassVar[str] = "Sum"

    def _validate(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ParameterError("Sum needs at least one term")

    @property
    def children(self):
        return self.terms

    def _derive_tags(self):
        ts = set()
        for tag in (NP, E, D, D0, DI, BF, CBF, CM, S):
            if _all(self.terms, tag):
                ts.add(tag)
        return ts

    def _eval(self, z):
        return sum(c._eval(z) for c in self.terms)

    def _deriv(self, z):
        return sum(c._deriv(z) for c in self.terms)

    def _taylor(self, t, n):
        js = [c._taylor(t, n) for c in self.terms]
        return None if any(j is None for j in js) else sum(js)

    def _limits(self):
        ls = [c.limits() for c in self.terms]
        return (_combine_limit(lambda *x: sum(x), *[l[0] for l in ls]),
                _combine_limit(lambda *x: sum(x), *[l[1] for l in ls]))


@dataclass(frozen=True)
class Scale(FunctionSpec):
    c: float = 1.0
    f: FunctionSpec = None
    kind: ClassVar[str] = "Scale"

    def _validate(self):
        if not (self.c > 0):
            raise ParameterError("Scale needs c > 0")

    @property
    def children(self):
        return (self.f,)

    def params(self):
        return {"c": self.c}

    def _derive_tags(self):
        return set(self.f.tags)

    def _eval(self, z):
        return self.c * self.f._eval(z)

    def _deriv(self, z):
        return self.c * self.f._deriv(z)

    def _taylor(self, t, n):
        j = self.f._taylor(t, n)
        return None if j is None else self.c * j

    def _limits(self):
        l0, li = self.f.limits()
        return _combine_limit(lambda x: self.c * x, l0), _combine_limit(lambda x: self.c * x, li)


@dataclass(frozen=True)
class Product(FunctionSpec):
    factors: tuple = ()
    kind: ClassVar[str] = "Product"

    def _validate(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ParameterError("Product needs at least one factor")

    @property
    def children(self):
        return self.factors

    def _derive_tags(self):
        ts = set()
        if len(self.factors) == 1:
            return set(self.factors[0].tags)
        if _all(self.factors, CM):
            ts.add(CM)
        ts |= _weight_tags(self)
        if D not in ts and _all(self.factors, BF) and np_range_check(self):
            ts |= {NP, D0P, DIP}
        return ts

    def _eval(self, z):
        out = np.ones_like(z)
        for c in self.factors:
            out = out * c._eval(z)
        return out

    def _deriv(self, z):
        vals = [c._eval(z) for c in self.factors]
        ders = [c._deriv(z) for c in self.factors]
        out = np.zeros_like(z)
        for i in range(len(vals)):
            term = ders[i]
            for j, v in enumerate(vals):
                if j != i:
                    term = term * v
            out = out + term
        return out

    def _taylor(self, t, n):
        js = [c._taylor(t, n) for c in self.factors]
        if any(j is None for j in js):
            return None
        out = js[0]
        for j in js[1:]:
            out = jet_mul(out, j)
        return out

    def _limits(self):
        ls = [c.limits() for c in self.factors]

        def prod(*x):
            if any(v == 0 for v in x) and any(math.isinf(v) for v in x):
                return None
            return math.prod(x)
        return _combine_limit(prod, *[l[0] for l in ls]), _combine_limit(prod, *[l[1] for l in ls])


@dataclass(frozen=True)
class Reciprocal(FunctionSpec):
    f: FunctionSpec = None
    kind: ClassVar[str] = "Reciprocal"

    @property
    def children(self):
        return (self.f,)

    def _derive_tags(self):
        ft = self.f.tags
        ts = {t for t in (NP, E, D, D0, DI, S) if t in ft}
        ts |= {_SIGN_SWAP_RECIP[t] for t in (D0P, D0M, DIP, DIM) if t in ft}
        if BF in ft:
            ts |= {CM, NP}
        return ts

    def _eval(self, z):
        return 1.0 / self.f._eval(z)

    def _deriv(self, z):
        return -self.f._deriv(z) / self.f._eval(z) ** 2

    def _taylor(self, t, n):
        j = self.f._taylor(t, n)
        return None if j is None else jet_recip(j)

    def _limits(self):
        def inv(x):
            return math.inf if x == 0 else (0.0 if math.isinf(x) else 1.0 / x)
        l0, li = self.f.limits()
        return _combine_limit(inv, l0), _combine_limit(inv, li)


@dataclass(frozen=True)
class Compose(FunctionSpec):
    """g(f(z))."""
    g: FunctionSpec = None
    f: FunctionSpec = None
    kind: ClassVar[str] = "Compose"

    @property
    def children(self):
        return (self.g, self.f)

    def _derive_tags(self):
        g, f = self.g.tags, self.f.tags
        ts = set()
        if NP in g and NP in f:
            ts.add(NP)
        if BF in g and BF in f:
            ts.add(BF)
        if CM in g and BF in f:
            ts.add(CM)
        return ts

    def _eval(self, z):
        return self.g._eval(self.f._eval(z))

    def _deriv(self, z):
        return self.g._deriv(self.f._eval(z)) * self.f._deriv(z)

    def _taylor(self, t, n):
        jf = self.f._taylor(t, n)
        if jf is None:
            return None
        jg = self.g._taylor(np.real(jf[0]), n)
        return None if jg is None else jet_compose(jg, jf)

    def _limits(self):
        gl = None

        def at(x):
            nonlocal gl
            if x == 0:
                gl = gl or self.g.limits()
                return gl[0]
            if math.isinf(x):
                gl = gl or self.g.limits()
                return gl[1]
            return float(np.real(self.g._eval(np.array([complex(x)]))[0]))
        l0, li = self.f.limits()
        return (None if l0 is None else at(l0)), (None if li is None else at(li))


@dataclass(frozen=True)
class PowerOf(FunctionSpec):
    """f(z)^beta, principal branch."""
    beta: float = 0.5
    f: FunctionSpec = None
    kind: ClassVar[str] = "PowerOf"

    def _validate(self):
        if not (0 < self.beta <= 1):
            raise ParameterError("PowerOf needs beta in (0, 1]")

    @property
    def children(self):
        return (self.f,)

    def params(self):
        return {"beta": self.beta}

    def _derive_tags(self):
        ft = self.f.tags
        ts = {t for t in (NP, D0P, D0M, DIP, DIM) if t in ft}
        if BF in ft:
            ts.add(BF)
        ts |= _weight_tags(self)
        return ts

    def _eval(self, z):
        return self.f._eval(z) ** self.beta

    def _deriv(self, z):
        v = self.f._eval(z)
        return self.beta * v ** (self.beta - 1) * self.f._deriv(z)

    def _taylor(self, t, n):
        j = self.f._taylor(t, n)
        return None if j is None else jet_pow(j, self.beta)

    def _limits(self):
        l0, li = self.f.limits()
        p = lambda x: x ** self.beta
        return _combine_limit(p, l0), _combine_limit(p, li)


@dataclass(frozen=True)
class ArgPower(FunctionSpec):
    """f(z^alpha)."""
    alpha: float = 0.5
    f: FunctionSpec = None
    kind: ClassVar[str] = "ArgPower"

    def _validate(self):
        if not (0 < self.alpha <= 1):
            raise ParameterError("ArgPower needs alpha in (0, 1]")

    @property
    def children(self):
        return (self.f,)

    def params(self):
        return {"alpha": self.alpha}

    def _derive_tags(self):
        ft = self.f.tags
        ts = {t for t in (NP, E, D, D0, DI, D0P, D0M, DIP, DIM, BF, CM) if t in ft}
        ts |= _weight_tags(self)
        return ts

    def _eval(self, z):
        return self.f._eval(z ** self.alpha)

    def _deriv(self, z):
        return self.f._deriv(z ** self.alpha) * self.alpha * z ** (self.alpha - 1)

    def _taylor(self, t, n):
        inner = Power(self.alpha)._taylor(t, n)
        jf = self.f._taylor(inner[0], n)
        return None if jf is None else jet_compose(jf, inner)

    def _limits(self):
        return self.f.limits()


@dataclass(frozen=True)
class ArgInversion(FunctionSpec):
    """f(1/z)."""
    f: FunctionSpec = None
    kind: ClassVar[str] = "ArgInversion"

    @property
    def children(self):
        return (self.f,)

    def _derive_tags(self):
        ft = self.f.tags
        ts = {t for t in (NP, E, D, S) if t in ft}
        ts |= {_SIGN_SWAP_INV[t] for t in (D0P, D0M, DIP, DIM) if t in ft}
        if D0 in ft:
            ts.add(DI)
        if DI in ft:
            ts.add(D0)
        return ts

    def _eval(self, z):
        return self.f._eval(1.0 / z)

    def _deriv(self, z):
        return -self.f._deriv(1.0 / z) / z ** 2

    def _taylor(self, t, n):
        inner = _pole_jet(t, 0.0, n)
        jf = self.f._taylor(inner[0], n)
        return None if jf is None else jet_compose(jf, inner)

    def _limits(self):
        l0, li = self.f.limits()
        return li, l0


@dataclass(frozen=True, eq=False)
class Raw(FunctionSpec):
    """An arbitrary vectorised callable; carries no tags and is not serialisable."""
    fn: Callable = None
    name: str = "raw"
    dfn: Callable | None = None
    kind: ClassVar[str] = "Raw"

    def _eval(self, z):
        return np.asarray(self.fn(z), dtype=complex)

    def _deriv(self, z):
        if self.dfn is not None:
            return np.asarray(self.dfn(z), dtype=complex)
        return central_difference(self._eval, z)

    @property
    def analytic(self):
        return self.dfn is not None

    def in_domain(self, z):
        return np.ones(np.shape(z), bool)

    def to_json(self):
        raise ParameterError("Raw functions cannot be serialised")

    def describe(self):
        return f"Raw({self.name})"


def central_difference(fn, z, rel_step: float = 1e-3):
    """First derivative by central differences with one Richardson step."""
    z = _as_complex(z)
    a = np.abs(z)
    h = rel_step * np.where(a > 0, a, 1.0)

    def cd(hh):
        return (fn(z + hh) - fn(z - hh)) / (2 * hh)
    return (4 * cd(h / 2) - cd(h)) / 3


@dataclass
class DerivativeResult:
    value: complex | np.ndarray
    numeric: bool


def eval_derivative(f: FunctionSpec, z) -> DerivativeResult:
    return DerivativeResult(f.deriv(z), not f.analytic)


# ---------------------------------------------------------------- builders

def levy_triple_of(f: FunctionSpec) -> LevyTriple:
    """Levy triple of a catalog Bernstein atom."""
    if isinstance(f, Identity):
        return LevyTriple(0.0, 1.0, MeasureSpec())
    if isinstance(f, Constant):
        return LevyTriple(f.c, 0.0, MeasureSpec())
    if isinstance(f, OneMinusExp):
        return LevyTriple(0.0, 0.0, MeasureSpec(((1.0, 1.0),)))
    if isinstance(f, Power):
        if f.alpha == 1:
            return LevyTriple(0.0, 1.0, MeasureSpec())
        a = f.alpha
        return LevyTriple(0.0, 0.0, MeasureSpec((), PowerExpDensity(a / gamma(1 - a), -1 - a)))
    if isinstance(f, Log1p):
        return LevyTriple(0.0, 0.0, MeasureSpec((), PowerExpDensity(1.0, -1.0, 1.0)))
    if isinstance(f, FromLevy):
        return f.triple
    if isinstance(f, FromStieltjes):
        return f.triple.to_levy()
    raise ParameterError(f"no Levy triple known for {f.describe()}")


def stieltjes_triple_of(f: FunctionSpec) -> StieltjesTriple:
    if isinstance(f, Identity):
        return StieltjesTriple(0.0, 1.0, MeasureSpec())
    if isinstance(f, Constant):
        return StieltjesTriple(f.c, 0.0, MeasureSpec())
    if isinstance(f, Power):
        if f.alpha == 1:
            return StieltjesTriple(0.0, 1.0, MeasureSpec())
        a = f.alpha
        return StieltjesTriple(0.0, 0.0, MeasureSpec((), PowerExpDensity(math.sin(math.pi * a) / math.pi, a - 1)))
    if isinstance(f, Log1p):
        return StieltjesTriple(0.0, 0.0, MeasureSpec((), PowerExpDensity(1.0, -1.0, 0.0, 1.0)))
    if isinstance(f, FromStieltjes):
        return f.triple
    raise ParameterError(f"no Stieltjes triple known for {f.describe()}")


_KINDS = {cls.kind: cls for cls in (
    Identity, Constant, Power, Log1p, OneMinusExp, CauchyAtom, ExampleG, MoebiusSeries,
    FromLevy, FromStieltjes, FromCauchyMeasure, Sum, Scale, Product, Reciprocal, Compose,
    PowerOf, ArgPower, ArgInversion)}


def build_combinator(kind: str, children, **params) -> FunctionSpec:
    """Build a combinator node; its tags follow from the rule table."""
    children = list(children)
    if kind == "Sum":
        return Sum(tuple(children))
    if kind == "Product":
        return Product(tuple(children))
    if kind == "Scale":
        return Scale(float(params["c"]), children[0])
    if kind == "Reciprocal":
        return Reciprocal(children[0])
    if kind == "Compose":
        g, f = children
        return Compose(g, f)
    if kind == "PowerOf":
        return PowerOf(float(params["beta"]), children[0])
    if kind == "ArgPower":
        return ArgPower(float(params["alpha"]), children[0])
    if kind == "ArgInversion":
        return ArgInversion(children[0])
    raise ParameterError(f"unknown combinator {kind!r}")


def from_json(d: dict) -> FunctionSpec:
    """Rebuild a node from its JSON tree; declared tags must be derivable."""
    from .measures import LevyTriple as LT, MeasureSpec as MS, StieltjesTriple as ST
    if not isinstance(d, dict) or "kind" not in d:
        raise ParameterError("function JSON needs a 'kind' field")
    kind = d["kind"]
    p = d.get("params", {}) or {}
    kids = [from_json(c) for c in d.get("children", [])]
    if kind in ("Identity", "Log1p", "OneMinusExp"):
        node = _KINDS[kind]()
    elif kind == "Constant":
        node = Constant(float(p["c"]))
    elif kind == "Power":
        node = Power(float(p["alpha"]))
    elif kind == "CauchyAtom":
        node = CauchyAtom(float(p["s"]))
    elif kind == "ExampleG":
        node = ExampleG(float(p["t"]))
    elif kind == "MoebiusSeries":
        node = MoebiusSeries(tuple(p["coeffs"]))
    elif kind == "FromLevy":
        node = FromLevy(LT(float(p.get("a", 0)), float(p.get("b", 0)), MS.from_json(p["measure"])))
    elif kind == "FromStieltjes":
        node = FromStieltjes(ST(float(p.get("a", 0)), float(p.get("b", 0)), MS.from_json(p["measure"])))
    elif kind == "FromCauchyMeasure":
        node = FromCauchyMeasure(float(p.get("a", 0)), float(p.get("b", 0)), MS.from_json(p["measure"]))
    elif kind in ("Sum", "Product", "Scale", "Reciprocal", "Compose", "PowerOf", "ArgPower", "ArgInversion"):
        node = build_combinator(kind, kids, **p)
    else:
        raise ParameterError(f"unknown function kind {kind!r}")
    declared = set(d.get("tags") or [])
    unknown = declared - set(PUBLIC_TAGS)
    if unknown:
        raise TagRuleError(f"unknown tags {sorted(unknown)}")
    missing = declared - node.tags
    if missing:
        raise TagRuleError(f"declared tags {sorted(missing)} are not derivable for {node.describe()}")
    return node


# ---------------------------------------------------------------- catalog

def catalog() -> dict[str, FunctionSpec]:
    """The named test functions used across checks and acceptance runs."""
    return {
        "Identity": Identity(),
        "Power(1/2)": Power(0.5),
        "Power(3/4)": Power(0.75),
        "OneMinusExp": OneMinusExp(),
        "Log1p": Log1p(),
        "ExampleG(1)": ExampleG(1.0),
        "CauchyAtom(1)": CauchyAtom(1.0),
        "MoebiusSeries(c1=1)": MoebiusSeries((1.0,)),
    }


def example_product() -> FunctionSpec:
    """sqrt(z) * sqrt(1 - e^{-z}): in D, not Bernstein."""
    return Product((Power(0.5), PowerOf(0.5, OneMinusExp())))


def root_product(f: FunctionSpec, alpha: float) -> FunctionSpec:
    """(f(z^alpha)^{1/(2 alpha)})^2 as a product of two equal factors (total weight 1)."""
    half = PowerOf(1.0 / (2 * alpha), ArgPower(alpha, f))
    return Product((half, half))
