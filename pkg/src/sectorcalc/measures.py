"""Positive measures on [0, inf): atoms plus a piecewise-smooth density.

Densities declare their behaviour at both ends (``sing0``: density ~ s^sing0
near 0; ``sing_inf``: density ~ s^sing_inf near infinity, or None for
exponential decay / bounded support). Quadrature reads these orders instead of
discovering them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma, gammaincc

from .errors import ParameterError
from .quad import IntegralResult, QuadratureConfig, integrate_interval


class Density:
    lo: float = 0.0
    hi: float = math.inf

    def __call__(self, s):
        raise NotImplementedError

    @property
    def sing0(self) -> float:
        raise NotImplementedError

    @property
    def sing_inf(self) -> float | None:
        raise NotImplementedError

    def terms(self) -> tuple:
        return (self,)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerExpDensity(Density):
    """coef * s^power * exp(-rate s) on (lo, hi)."""
    coef: float
    power: float = 0.0
    rate: float = 0.0
    lo: float = 0.0
    hi: float = math.inf

    def __post_init__(self):
        if not (self.coef > 0):
            raise ParameterError("density coefficient must be positive")
        if not (0 <= self.lo < self.hi) or self.rate < 0:
            raise ParameterError("need 0 <= lo < hi and rate >= 0")

    def __call__(self, s):
        s = np.asarray(s, float)
        inside = (s > self.lo) & (s < self.hi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = self.coef * np.power(s, self.power) * np.exp(-self.rate * s)
        return np.where(inside, v, 0.0)

    @property
    def sing0(self):
        return self.power if self.lo == 0 else 0.0

    @property
    def sing_inf(self):
        return self.power if (math.isinf(self.hi) and self.rate == 0) else None

    def to_json(self):
        return {"kind": "power_exp",
                "params": {"coef": self.coef, "power": self.power, "rate": self.rate,
                           "lo": self.lo, "hi": None if math.isinf(self.hi) else self.hi},
                "sing0": self.sing0, "singInf": self.sing_inf}


@dataclass(frozen=True)
class SumDensity(Density):
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ParameterError("empty density sum")

    def __call__(self, s):
        return sum(p(s) for p in self.parts)

    def terms(self):
        return tuple(t for p in self.parts for t in p.terms())

    @property
    def lo(self):
        return min(p.lo for p in self.parts)

    @property
    def hi(self):
        return max(p.hi for p in self.parts)

    @property
    def sing0(self):
        return min(p.sing0 for p in self.parts if p.lo == self.lo) if self.lo == 0 else 0.0

    @property
    def sing_inf(self):
        vals = [p.sing_inf for p in self.parts if p.sing_inf is not None]
        return max(vals) if vals else None

    def to_json(self):
        return {"kind": "sum", "params": {"parts": [p.to_json() for p in self.parts]},
                "sing0": self.sing0, "singInf": self.sing_inf}


@dataclass(frozen=True)
class LaplaceOfPowerExp(Density):
    """m(t) = int s e^{-ts} nu(ds) for nu = coef s^p e^{-k s} on (lo, hi).

    This turns a Stieltjes density into the Levy density of the same complete
    Bernstein function, in closed form through the incomplete gamma function.
    """
    nu: PowerExpDensity

    def __post_init__(self):
        if not (self.nu.power + 2 > 0):
            raise ParameterError("Laplace conversion needs power > -2")

    def __call__(self, t):
        t = np.asarray(t, float)
        nu = self.nu
        a = nu.power + 2.0
        x = t + nu.rate
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            upper = gammaincc(a, x * nu.lo) if nu.lo > 0 else np.ones_like(x)
            lower = gammaincc(a, x * nu.hi) if math.isfinite(nu.hi) else np.zeros_like(x)
            v = nu.coef * gamma(a) * np.power(x, -a) * (upper - lower)
        return np.where(t > 0, v, 0.0)

    @property
    def sing0(self):
        nu = self.nu
        if nu.rate == 0 and math.isinf(nu.hi):
            return -(nu.power + 2.0)
        return 0.0

    @property
    def sing_inf(self):
        nu = self.nu
        if nu.lo > 0 or nu.rate > 0:
            return None
        return -(nu.power + 2.0)

    def to_json(self):
        return {"kind": "stieltjes_levy", "params": {"nu": self.nu.to_json()},
                "sing0": self.sing0, "singInf": self.sing_inf}


def density_from_json(d: dict | None) -> Density | None:
    if d is None:
        return None
    kind = d["kind"]
    p = d.get("params", {})
    if kind == "power_exp":
        hi = p.get("hi")
        return PowerExpDensity(float(p["coef"]), float(p.get("power", 0.0)), float(p.get("rate", 0.0)),
                               float(p.get("lo", 0.0)), math.inf if hi is None else float(hi))
    if kind == "sum":
        return SumDensity(tuple(density_from_json(x) for x in p["parts"]))
    if kind == "stieltjes_levy":
        return LaplaceOfPowerExp(density_from_json(p["nu"]))
    raise ParameterError(f"unknown density kind {kind!r}")


@dataclass(frozen=True)
class GeometricAtoms:
    """Infinite atom series sum_{n>=0} w0 q^n delta_{s0 r^n}, with 0 < q < 1, 0 < r < 1.

    The atoms accumulate at 0, so the support is not bounded away from 0.
    """
    s0: float
    r: float
    w0: float
    q: float

    def __post_init__(self):
        if not (self.s0 > 0 and 0 < self.r < 1 and self.w0 > 0 and 0 < self.q < 1):
            raise ParameterError("GeometricAtoms needs s0, w0 > 0 and ratios in (0, 1)")

    def truncation(self) -> int:
        # keep atoms down to s = 1e-200 (kernels such as z/(s^2+z^2) weigh small
        # atoms by 1/|z|) or until the weights underflow
        n_loc = math.log(1e-200 / self.s0) / math.log(self.r)
        n_w = math.log(1e-300 / self.w0) / math.log(self.q)
        return int(min(max(n_loc, 0), n_w, 20000)) + 1

    def nodes(self):
        n = np.arange(self.truncation())
        return self.s0 * self.r ** n, self.w0 * self.q ** n

    def to_json(self):
        return {"s0": self.s0, "r": self.r, "w0": self.w0, "q": self.q}


@dataclass(frozen=True)
class MeasureSpec:
    atoms: tuple = ()          # ((s, w), ...)
    density: Density | None = None
    series: GeometricAtoms | None = None

    def __post_init__(self):
        atoms = tuple((float(s), float(w)) for s, w in self.atoms)
        for s, w in atoms:
            if not (s >= 0 and math.isfinite(s)):
                raise ParameterError(f"atom location {s} must be a finite nonnegative real")
            if not (w > 0):
                raise ParameterError(f"atom weight {w} must be positive")
        object.__setattr__(self, "atoms", atoms)

    @property
    def is_zero(self) -> bool:
        return not self.atoms and self.density is None and self.series is None

    def support_bounds(self) -> tuple[float, float]:
        locs = [s for s, _ in self.atoms]
        lo = min(locs) if locs else math.inf
        hi = max(locs) if locs else 0.0
        if self.series is not None:
            lo, hi = 0.0, max(hi, self.series.s0)
        if self.density is not None:
            lo = min(lo, self.density.lo)
            hi = max(hi, self.density.hi)
        return lo, hi

    def integrate(self, g: Callable, cfg: QuadratureConfig | None = None,
                  order0: float = 0.0, order_inf: float = 0.0) -> IntegralResult:
        """int g(s) measure(ds) where g(s) ~ s^order0 at 0 and s^order_inf at inf.

        g is vectorised over s and may return trailing axes.
        """
        cfg = cfg or QuadratureConfig()
        # densities may behave like s^-2 at 0: keep s^p finite
        cfg = cfg.replace(t_min=max(cfg.t_min, 1e-150))
        total = 0.0
        err = 0.0
        panels = 0
        conv = True
        if self.atoms:
            s = np.array([a[0] for a in self.atoms])
            w = np.array([a[1] for a in self.atoms])
            vals = np.asarray(g(s))
            total = total + np.tensordot(w, vals, axes=(0, 0))
        if self.series is not None:
            s, w = self.series.nodes()
            total = total + np.tensordot(w, np.asarray(g(s)), axes=(0, 0))
        if self.density is not None:
            for part in self.density.terms():
                p0 = order0 + part.sing0 if part.lo == 0 else 0.0
                pinf = -50.0 if part.sing_inf is None else order_inf + part.sing_inf
                if math.isfinite(part.hi):
                    r = integrate_interval(lambda s: _rows(g(s), part(s)), part.lo, part.hi, cfg, p0, 0.0)
                else:
                    r = integrate_interval(lambda s: _rows(g(s), part(s)), part.lo, math.inf, cfg, p0,
                                           min(pinf, -1.0))
                total = total + r.value
                err += r.err
                panels += r.panels
                conv = conv and r.converged
        return IntegralResult(total, err, panels, conv)

    def mass(self, cfg: QuadratureConfig | None = None) -> float:
        return float(np.real(self.integrate(lambda s: np.ones_like(s), cfg).value))

    def to_json(self) -> dict:
        out = {"atoms": [{"s": s, "w": w} for s, w in self.atoms],
               "density": None if self.density is None else self.density.to_json()}
        if self.series is not None:
            out["series"] = self.series.to_json()
        return out

    @staticmethod
    def from_json(d: dict) -> "MeasureSpec":
        atoms = tuple((a["s"], a["w"]) for a in d.get("atoms", []))
        ser = d.get("series")
        return MeasureSpec(atoms, density_from_json(d.get("density")),
                           None if ser is None else GeometricAtoms(**ser))


def _rows(vals, w):
    vals = np.asarray(vals)
    return vals * w.reshape((-1,) + (1,) * (vals.ndim - 1))


def _check_moment(mu: MeasureSpec, name: str, weight: Callable, order0: float, order_inf: float,
                  cfg: QuadratureConfig | None):
    """Verify int weight d(mu) < inf from the declared orders and by quadrature."""
    d = mu.density
    if d is not None:
        for part in d.terms():
            if part.lo == 0 and not (part.sing0 + order0 > -1):
                raise ParameterError(f"{name}: density order {part.sing0} at 0 makes the moment diverge")
            if part.sing_inf is not None and math.isinf(part.hi) and not (part.sing_inf + order_inf < -1):
                raise ParameterError(f"{name}: density order {part.sing_inf} at infinity makes the moment diverge")
    r = mu.integrate(weight, (cfg or QuadratureConfig()).replace(strict=False), order0, order_inf)
    if not (r.converged and np.isfinite(r.value)):
        raise ParameterError(f"{name}: moment integral did not converge (err {r.err:.3g})")
    return float(np.real(r.value))


@dataclass(frozen=True)
class LevyTriple:
    """f(z) = a + b z + int (1 - e^{-zs}) mu(ds)."""
    a: float
    b: float
    mu: MeasureSpec

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ParameterError("Levy triple needs a, b >= 0")
        if any(s <= 0 for s, _ in self.mu.atoms):
            raise ParameterError("Levy measure atoms must lie in (0, inf)")
        _check_moment(self.mu, "Levy measure", lambda s: s / (1 + s), 1.0, 0.0, None)

    def to_json(self):
        return {"a": self.a, "b": self.b, "measure": self.mu.to_json()}


@dataclass(frozen=True)
class StieltjesTriple:
    """phi(z) = a + b z + int z/(z+s) nu(ds)."""
    a: float
    b: float
    nu: MeasureSpec

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ParameterError("Stieltjes triple needs a, b >= 0")
        if any(s <= 0 for s, _ in self.nu.atoms):
            raise ParameterError("Stieltjes measure atoms must lie in (0, inf)")
        _check_moment(self.nu, "Stieltjes measure", lambda s: 1 / (1 + s), 0.0, -1.0, None)

    def to_levy(self) -> LevyTriple:
        """Levy triple of the same function: m(t) = int s e^{-ts} nu(ds)."""
        parts = [PowerExpDensity(w * s, 0.0, s) for s, w in self.nu.atoms]
        if self.nu.density is not None:
            for p in self.nu.density.terms():
                if not isinstance(p, PowerExpDensity):
                    raise ParameterError("only power-exponential Stieltjes densities convert in closed form")
                parts.append(LaplaceOfPowerExp(p))
        dens = None if not parts else (parts[0] if len(parts) == 1 else SumDensity(tuple(parts)))
        return LevyTriple(self.a, self.b, MeasureSpec((), dens))

    def to_json(self):
        return {"a": self.a, "b": self.b, "measure": self.nu.to_json()}
