"""Grid falsifiers for the function-class inequalities.

Each check evaluates a family of inequalities ``quantity <= bound`` on a
finite grid and stores ``bound - quantity`` per grid point. Pass/fail uses the
scaled margin ``(bound - quantity) / scale`` where the scale is the larger of
the two sides, so one tolerance works across eight decades of t. A pass is
evidence, not proof.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ParameterError, QuadratureError
from .functions import BF, CBF, CM, NP, FunctionSpec, Product, Raw, public_tags
from .quad import QuadratureConfig, integrate_half_line, integrate_polar_sector

_TINY = 1e-300


@dataclass(frozen=True)
class GridSpec:
    t_min: float = 1e-4
    t_max: float = 1e4
    n_t: int = 161
    thetas: tuple = (math.pi / 6, math.pi / 4, math.pi / 3)
    cbf_thetas: tuple = (math.pi / 2, 2 * math.pi / 3, 5 * math.pi / 6)
    r_min: float = 1e-3
    r_max: float = 1e3
    n_r: int = 61

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(float(x) for x in self.thetas))
        object.__setattr__(self, "cbf_thetas", tuple(float(x) for x in self.cbf_thetas))
        if not (0 < self.t_min < self.t_max) or not (0 < self.r_min < self.r_max):
            raise ParameterError("grids need 0 < min < max")
        if self.n_t < 2 or self.n_r < 2:
            raise ParameterError("grids need at least two points")
        for name, ths, top in (("thetas", self.thetas, math.pi / 2), ("cbf_thetas", self.cbf_thetas, math.pi)):
            if any(not (0 < x < top) for x in ths):
                raise ParameterError(f"{name} must lie strictly inside (0, {top:.6g})")
            if any(b <= a for a, b in zip(ths, ths[1:])):
                raise ParameterError(f"{name} must be strictly increasing")

    @property
    def t(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.n_t)

    @property
    def r(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r_max, self.n_r)

    def replace(self, **kw) -> "GridSpec":
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)


@dataclass
class ClassReport:
    check: str
    function: str
    margins: np.ndarray
    scaled: np.ndarray
    columns: dict
    tol: float
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    grid: dict | None = None

    @property
    def worst(self) -> float:
        return float(np.min(self.scaled)) if self.scaled.size else math.inf

    @property
    def worst_index(self) -> int | None:
        return int(np.argmin(self.scaled)) if self.scaled.size else None

    @property
    def worst_at(self) -> dict | None:
        i = self.worst_index
        if i is None:
            return None
        return {k: _plain(v[i]) for k, v in self.columns.items()}

    @property
    def passed(self) -> bool:
        return self.worst >= -self.tol

    def summary(self) -> str:
        flag = "pass" if self.passed else "FAIL"
        return f"{self.check} [{self.function}]: {flag} worst={self.worst:.3g} tol={self.tol:g} at {self.worst_at}"

    def to_dict(self) -> dict:
        return {
            "check": self.check, "function": self.function, "passed": self.passed,
            "tol": self.tol, "worst": _plain(self.worst), "worst_at": self.worst_at,
            "constants": _plain(self.constants), "notes": list(self.notes),
            "failures": list(self.failures), "grid": self.grid,
            "rows": {**{k: _plain(v) for k, v in self.columns.items()},
                     "margin": _plain(self.margins), "scaled_margin": _plain(self.scaled)},
        }

    def to_json(self, path=None, indent=None) -> str:
        s = json.dumps(self.to_dict(), indent=indent)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s)
        return s

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        names = list(self.columns)
        w.writerow(names + ["margin", "scaled_margin"])
        for i in range(self.margins.size):
            w.writerow([_plain(self.columns[k][i]) for k in names] + [repr(float(self.margins[i])),
                                                                     repr(float(self.scaled[i]))])
        s = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(s)
        return s


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class _Rows:
    """Accumulates (columns, margin, scale) blocks for a report."""

    def __init__(self):
        self.cols: dict[str, list] = {}
        self.margins: list = []
        self.scales: list = []

    def add(self, margin, scale, **cols):
        margin = np.atleast_1d(np.asarray(margin, float))
        scale = np.broadcast_to(np.asarray(scale, float), margin.shape)
        n = margin.size
        for k in set(self.cols) | set(cols):
            v = cols.get(k, None)
            block = np.broadcast_to(np.asarray(v, dtype=object if v is None or isinstance(v, str) else None),
                                    margin.shape).ravel().tolist()
            if k not in self.cols:
                self.cols[k] = [None] * len(self.margins)
            self.cols[k].extend(block)
        self.margins.extend(margin.ravel().tolist())
        self.scales.extend(scale.ravel().tolist())
        return n

    def report(self, check, f, tol, grid=None, **kw) -> ClassReport:
        m = np.asarray(self.margins, float)
        s = np.maximum(np.asarray(self.scales, float), _TINY)
        with np.errstate(invalid="ignore"):
            sc = np.where(np.isnan(m), -np.inf, m / s)
        m = np.where(np.isnan(m), -np.inf, m)
        cols = {k: np.asarray(v, dtype=object) for k, v in self.cols.items()}
        return ClassReport(check, _name(f), m, sc, cols, tol,
                           grid=grid.to_dict() if isinstance(grid, GridSpec) else grid, **kw)


def _name(f):
    if isinstance(f, (list, tuple)):
        return " * ".join(_name(g) for g in f)
    return f.describe() if isinstance(f, FunctionSpec) else getattr(f, "__name__", "callable")


def as_spec(f) -> FunctionSpec:
    if isinstance(f, FunctionSpec):
        return f
    if callable(f):
        return Raw(f, getattr(f, "__name__", "raw"))
    raise ParameterError("expected a FunctionSpec or a vectorised callable")


def _values(f: FunctionSpec, z, failures: list, label: str):
    """f(z) with failures recorded per point as NaN instead of raising."""
    z = np.asarray(z, complex)
    try:
        with np.errstate(all="ignore"):
            return np.asarray(f(z), complex).reshape(z.shape)
    except Exception:
        pass
    out = np.full(z.shape, np.nan + 0j)
    for i, zi in np.ndenumerate(z):
        try:
            out[i] = f(complex(zi))
        except Exception as e:  # evaluation failures are reported, not fatal
            failures.append({"at": label, "z": [zi.real, zi.imag], "error": f"{type(e).__name__}: {e}"})
    return out


def _derivs(f: FunctionSpec, z, failures: list, label: str):
    z = np.asarray(z, complex)
    try:
        with np.errstate(all="ignore"):
            return np.asarray(f.deriv(z), complex).reshape(z.shape)
    except Exception as e:
        failures.append({"at": label, "error": f"{type(e).__name__}: {e}"})
        return np.full(z.shape, np.nan + 0j)


def _scale(*xs):
    return np.maximum.reduce([np.abs(np.asarray(x, float)) for x in xs])


# ---------------------------------------------------------------- NP+ range

def check_np_range(f, grid: GridSpec | None = None, tol: float = 1e-10) -> ClassReport:
    """Re f(z) > 0 and |arg f(z)| <= theta for z = t e^{+-i theta}, plus f(t) > 0."""
    f = as_spec(f)
    grid = grid or GridSpec()
    t = grid.t
    rows, fails = _Rows(), []
    for th in (0.0,) + grid.thetas:
        for sgn in ((1,) if th == 0 else (1, -1)):
            v = _values(f, t * np.exp(1j * sgn * th), fails, f"theta={sgn * th:.6g}")
            rows.add(v.real, np.abs(v), kind="re_positive", t=t, theta=sgn * th)
            rows.add(th - np.abs(np.angle(v)), 1.0, kind="sector", t=t, theta=sgn * th)
    consts = {}
    try:
        consts["value_at_1"] = complex(f(1.0)).real
    except Exception:
        pass
    return rows.report("np_range", f, tol, grid, constants=consts, failures=fails)


# ---------------------------------------------------------------- two-point bounds

def brown_bounds(fr_abs, ft, r, t, theta):
    """Lower and upper bounds on |f(r e^{i theta})| in terms of f(t)."""
    rho = np.minimum(r / t, t / r)
    c2 = math.cos(2 * theta)
    case_a = c2 >= rho ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.abs(math.sin(2 * theta) / (t ** 2 - r ** 2 * np.exp(2j * theta)))
        lo = np.where(case_a, rho * ft, ft * r * t * k)
        hi = np.where(case_a, ft / rho, ft / (r * t * k))
    return lo, hi, case_a


def check_brown_bounds(f, grid: GridSpec | None = None, tol: float = 1e-10, n_pairs: int = 41) -> ClassReport:
    """Two-sided bounds relating |f(r e^{i theta})| to f(t) on (r, t, theta) triples.

    The (r, t) pairs use a geometric subgrid of n_pairs points spanning the
    t-grid; the branch follows the sign of cos 2 theta - rho^2.
    """
    f = as_spec(f)
    grid = grid or GridSpec()
    pts = np.geomspace(grid.t_min, grid.t_max, n_pairs)
    R, T = np.meshgrid(pts, pts, indexing="ij")
    R, T = R.ravel(), T.ravel()
    rows, fails = _Rows(), []
    ft = _values(f, T, fails, "f(t)").real
    for th in (0.0,) + grid.thetas:
        fr = np.abs(_values(f, R * np.exp(1j * th), fails, f"theta={th:.6g}"))
        lo, hi, case_a = brown_bounds(fr, ft, R, T, th)
        branch = np.where(case_a, "a", "b")
        rows.add(fr - lo, _scale(fr, lo), kind="lower", branch=branch, r=R, t=T, theta=th)
        rows.add(hi - fr, _scale(fr, hi), kind="upper", branch=branch, r=R, t=T, theta=th)
    return rows.report("brown_bounds", f, tol, grid, failures=fails,
                       notes=[f"(r, t) pairs on a {n_pairs}-point geometric subgrid"])


# ---------------------------------------------------------------- complete monotonicity

def _stencil(p: int, k: int) -> np.ndarray:
    """Central weights on offsets -p..p for the k-th derivative (unit step)."""
    j = np.arange(-p, p + 1, dtype=float)
    V = np.vander(j, 2 * p + 1, increasing=True).T
    rhs = np.zeros(2 * p + 1)
    rhs[k] = math.factorial(k)
    return np.linalg.solve(V, rhs)


def fd_derivatives(fn: Callable, t: np.ndarray, n: int, rel_steps=(0.08, 0.02, 0.005, 1e-3, 2e-4),
                   rtol: float = 1e-3):
    """Derivatives 0..n of a real function by central differences with a Richardson step.

    Each relative step h is paired with h/2; per point the step whose two
    estimates agree best is kept. Returns (derivs (n+1, m), unstable (n+1, m)
    bool); a derivative is unstable when the kept pair still differs by more
    than rtol relative to max(|f^(k)|, |f(t)| / t^k).
    """
    t = np.asarray(t, float)
    f0 = np.real(fn(t))
    out = np.zeros((n + 1, t.size))
    bad = np.zeros((n + 1, t.size), bool)
    out[0] = f0
    for k in range(1, n + 1):
        p = (k + 1) // 2 + 2
        w = _stencil(p, k)
        offs = np.arange(-p, p + 1)
        s = 2 * ((2 * p + 2 - k) // 2)

        def est(hh):
            vals = np.real(fn(t[None, :] + offs[:, None] * hh[None, :]))
            return (w[:, None] * vals).sum(axis=0) / hh ** k
        best_gap = np.full(t.size, np.inf)
        for rs in rel_steps:
            h = rs * t
            d1, d2 = est(h), est(h / 2)
            rich = (2 ** s * d2 - d1) / (2 ** s - 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                gap = np.abs(d1 - d2) / np.maximum(np.abs(rich), np.abs(f0) / t ** k)
            gap = np.where(d1 == d2, 0.0, gap)
            take = gap < best_gap
            out[k, take] = rich[take]
            best_gap = np.where(take, gap, best_gap)
        bad[k] = ~(best_gap <= rtol)
    return out, bad


def check_complete_monotone(g, points=None, max_order: int | None = None, tol: float = 1e-10,
                            derivative: bool = False) -> ClassReport:
    """Sign pattern (-1)^n g^(n)(t) >= 0 for n <= max_order.

    With derivative=True the pattern is g >= 0 and (-1)^(n-1) g^(n) >= 0 for
    n >= 1, i.e. g' is completely monotone (the Bernstein test). Orders are
    always those of g. Closed-form jets allow orders up to 6, finite
    differences up to 4.
    """
    g = as_spec(g)
    t = np.asarray(GridSpec().t if points is None else points, float)
    if np.any(t <= 0):
        raise ParameterError("points must be positive")
    jets = g.taylor(t, 6) if g.analytic else None
    notes = []
    if jets is not None:
        cap = 6
        n = cap if max_order is None else min(max_order, cap)
        fact = np.array([math.factorial(k) for k in range(n + 1)], float)
        d = jets[:n + 1] * fact[:, None]
        unstable = np.zeros_like(d, bool)
        notes.append("derivatives from closed-form jets")
    else:
        cap = 4
        n = cap if max_order is None else min(max_order, cap)
        d, unstable = fd_derivatives(lambda x: g.real(x), t, n)
        notes.append("derivatives from central differences with Richardson refinement")
    if max_order is not None and max_order > cap:
        notes.append(f"max_order {max_order} capped at {cap}")
    fact = np.array([math.factorial(k) for k in range(n + 1)], float)
    normed = d * t[None, :] ** np.arange(n + 1)[:, None] / fact[:, None]
    scale = np.max(np.abs(normed), axis=0)
    rows = _Rows()
    first = None
    for k in range(n + 1):
        sgn = (-1.0) ** (k - 1) if (derivative and k >= 1) else (-1.0) ** k
        m = sgn * d[k]
        rows.add(m, scale * fact[k] / t ** k, order=k, t=t, unstable=unstable[k])
        viol = np.flatnonzero(sgn * normed[k] / np.maximum(scale, _TINY) < -tol)
        if first is None and viol.size:
            first = {"order": k, "t": float(t[viol[0]])}
    if unstable.any():
        notes.append(f"differentiation unstable at {int(unstable.sum())} (order, point) pairs")
    rep = rows.report("bernstein_derivative" if derivative else "complete_monotone", g, tol,
                      {"points": t.size, "max_order": n}, notes=notes)
    rep.constants["first_violation"] = first
    rep.constants["unstable"] = int(unstable.sum())
    return rep


# ---------------------------------------------------------------- imaginary-part bounds

def check_bernstein_imag(f, grid: GridSpec | None = None, tol: float = 1e-8, n_factors: int = 1) -> ClassReport:
    """|Im f(t e^{i theta})| <= |sin theta| / cos(theta)^(2(n-1)) t f'(t cos theta).

    n_factors = 1 is the Bernstein bound; larger n is the bound for a product
    of n Bernstein functions.
    """
    f = as_spec(f)
    grid = grid or GridSpec()
    t = grid.t
    rows, fails = _Rows(), []
    for th in grid.thetas:
        lhs = np.abs(_values(f, t * np.exp(1j * th), fails, f"theta={th:.6g}").imag)
        dp = _derivs(f, t * math.cos(th), fails, "derivative").real
        rhs = abs(math.sin(th)) / math.cos(th) ** (2 * (n_factors - 1)) * t * dp
        rows.add(rhs - lhs, _scale(rhs, lhs), t=t, theta=th)
    notes = [] if f.analytic else ["derivative by central differences"]
    name = "bernstein_imag" if n_factors == 1 else f"product_imag(n={n_factors})"
    return rows.report(name, f, tol, grid, failures=fails, notes=notes)


def check_product_bound(fs, grid: GridSpec | None = None, tol: float = 1e-8) -> ClassReport:
    """Imaginary-part bound for a product of n Bernstein functions."""
    fs = [as_spec(f) for f in fs]
    if not fs:
        raise ParameterError("need at least one factor")
    for f in fs:
        if BF not in f.tags:
            raise ParameterError(f"{f.describe()} is not tagged Bernstein")
    F = fs[0] if len(fs) == 1 else Product(tuple(fs))
    rep = check_bernstein_imag(F, grid, tol, n_factors=len(fs))
    rep.check = "product_bound"
    rep.function = _name(fs)
    return rep


def check_cbf_imag(phi, grid: GridSpec | None = None, tol: float = 1e-10) -> ClassReport:
    """Two-sided modulus bound with cos(theta/2) and |Im phi| <= 2 tan(theta/2) t phi'(t), theta in (0, pi)."""
    phi = as_spec(phi)
    if isinstance(phi, FunctionSpec) and not isinstance(phi, Raw) and CBF not in phi.tags:
        raise ParameterError("check_cbf_imag needs a CBF-tagged function")
    grid = grid or GridSpec()
    t = grid.t
    rows, fails = _Rows(), []
    ft = _values(phi, t, fails, "phi(t)").real
    dp = _derivs(phi, t, fails, "derivative").real
    for th in sorted(set(grid.thetas + grid.cbf_thetas)):
        v = _values(phi, t * np.exp(1j * th), fails, f"theta={th:.6g}")
        a = np.abs(v)
        c = math.cos(th / 2)
        rows.add(a - ft * c, _scale(a, ft * c), kind="modulus_lower", t=t, theta=th)
        rows.add(ft / c - a, _scale(a, ft / c), kind="modulus_upper", t=t, theta=th)
        rhs = 2 * math.tan(th / 2) * t * dp
        lhs = np.abs(v.imag)
        rows.add(rhs - lhs, _scale(rhs, lhs), kind="imag", t=t, theta=th)
    return rows.report("cbf_imag", phi, tol, grid, failures=fails)


def bf_envelope_kappa(theta: float) -> float:
    return min(2 * math.e / (math.e - 1), 1 / math.cos(theta))


def check_bf_envelope(f, grid: GridSpec | None = None, tol: float = 1e-10) -> ClassReport:
    """f(t) cos th <= f(t cos th) <= |f(t e^{i th})| <= k f(t) <= k f(t cos th) / cos th, k = min(2e/(e-1), 1/cos th)."""
    f = as_spec(f)
    grid = grid or GridSpec()
    t = grid.t
    rows, fails = _Rows(), []
    ft = _values(f, t, fails, "f(t)").real
    for th in grid.thetas:
        c = math.cos(th)
        k = bf_envelope_kappa(th)
        fc = _values(f, t * c, fails, "f(t cos)").real
        a = np.abs(_values(f, t * np.exp(1j * th), fails, f"theta={th:.6g}"))
        chain = [ft * c, fc, a, k * ft, k * fc / c]
        for i, (lo, hi) in enumerate(zip(chain, chain[1:])):
            rows.add(hi - lo, _scale(hi, lo), link=i + 1, t=t, theta=th)
    return rows.report("bf_envelope", f, tol, grid, failures=fails)


# ---------------------------------------------------------------- D classes

D_CONDITIONS = {"D0+": (0, 1), "D0-": (0, -1), "Dinf+": (1, 1), "Dinf-": (1, -1)}


@dataclass(frozen=True)
class DSearchConfig:
    b_min: float = 1e-2
    b_max: float = 1e2
    n_b: int = 21
    include_cos: bool = True       # also try b = cos(theta)
    growth_tol: float = 0.1        # allowed growth of the ratio towards the limiting end
    block: float = 0.125           # fraction of the t-grid used for the end-growth test

    def bs(self, theta: float) -> np.ndarray:
        b = np.geomspace(self.b_min, self.b_max, self.n_b)
        if self.include_cos:
            b = np.union1d(b, [math.cos(theta)])
        return b


def _d_candidate(im, t, dpb, dpt, end, sgn, a, b, cfg: DSearchConfig):
    """Evaluate one (condition, a, b); return c or None when inapplicable."""
    n = t.size
    if end == 0:
        sel = t < a
        mono = t < a / b
    else:
        sel = t > a
        mono = t > a / b
    nb = max(3, int(cfg.block * n))
    if sel.sum() < 2 * nb:
        return None
    if np.any(sgn * dpt[mono] < 0):
        return None
    den = sgn * t[sel] * dpb[sel]
    if np.any(~(den > 0)):
        return None
    ratio = im[sel] / den
    if not np.all(np.isfinite(ratio)):
        return None
    if end == 0:
        edge, inner = ratio[:nb], ratio[nb:2 * nb]
    else:
        edge, inner = ratio[-nb:], ratio[-2 * nb:-nb]
    c = float(ratio.max())
    growth = float(edge.max() - (1 + cfg.growth_tol) * inner.max())
    return c, growth, max(float(inner.max()), _TINY)


def d_condition_margins(f, theta: float, cond: str, a: float, b: float, c: float, t: np.ndarray):
    """c (+-t f'(bt)) - |Im f(t e^{i theta})| on the condition's interval, and the monotonicity flag."""
    f = as_spec(f)
    end, sgn = D_CONDITIONS[cond]
    t = np.asarray(t, float)
    sel = t < a if end == 0 else t > a
    ts = t[sel]
    im = np.abs(f(ts * np.exp(1j * theta)).imag)
    rhs = c * sgn * ts * f.deriv(b * ts).real
    mono_pts = t[t < a / b] if end == 0 else t[t > a / b]
    mono = bool(np.all(sgn * f.deriv(mono_pts).real >= 0)) if mono_pts.size else True
    return ts, rhs - im, _scale(rhs, im), mono


def check_d_constants(f, theta: float, cond: str, a: float, b: float, c: float,
                      grid: GridSpec | None = None, tol: float = 1e-10) -> ClassReport:
    """The D-class inequality at given constants (a, b, c)."""
    grid = grid or GridSpec()
    ts, m, s, mono = d_condition_margins(f, theta, cond, a, b, c, grid.t)
    rows = _Rows()
    rows.add(m, s, t=ts, theta=theta)
    if not mono:
        rows.add(-1.0, 1.0, t=np.nan, theta=theta)
    return rows.report(f"d_constants[{cond}]", as_spec(f), tol, grid,
                       constants={"a": a, "b": b, "c": c, "monotone": mono})


def check_d_class(f, thetas=None, search: DSearchConfig | None = None, grid: GridSpec | None = None,
                  tol: float = 0.0) -> ClassReport:
    """Search (a, b, c) for each of the four D conditions at each angle.

    a ranges over the decade points of the t-grid plus "whole grid"; the
    widest passing interval is kept per b, and the best b minimises c (ties:
    b closest to 1). A condition passes when c is finite, the precondition
    monotonicity holds, and the ratio does not grow by more than growth_tol
    towards the limiting end of the grid. The report has one row per angle
    and end (0, inf); the margin is the end-growth margin of the better sign.
    """
    f = as_spec(f)
    grid = grid or GridSpec()
    search = search or DSearchConfig()
    thetas = grid.thetas if thetas is None else tuple(thetas)
    t = grid.t
    fails: list = []
    dpt = _derivs(f, t, fails, "derivative").real
    lo_d = math.ceil(math.log10(grid.t_min))
    hi_d = math.floor(math.log10(grid.t_max))
    decades = [10.0 ** k for k in range(lo_d, hi_d + 1)]
    a_lists = {0: [math.inf] + decades[::-1], 1: [0.0] + decades}
    rows = _Rows()
    table = {}
    for th in thetas:
        if not (0 < th < math.pi / 2):
            raise ParameterError("theta must lie in (0, pi/2)")
        im = np.abs(_values(f, t * np.exp(1j * th), fails, f"theta={th:.6g}").imag)
        entry = {}
        for cond, (end, sgn) in D_CONDITIONS.items():
            best = None
            rho_best = math.inf
            for b in search.bs(th):
                dpb = _derivs(f, b * t, fails, "derivative").real
                for a in a_lists[end]:
                    res = _d_candidate(im, t, dpb, dpt, end, sgn, a, b, search)
                    if res is None:
                        continue
                    c, growth, inner = res
                    if growth > tol * inner:
                        continue
                    full = (a == math.inf) if end == 0 else (a == 0.0)
                    if full:
                        rho_best = min(rho_best, c * max(b, 1 / b))
                    key = (c, abs(math.log(b)))
                    if best is None or key < best["key"]:
                        best = {"key": key, "a": a, "b": float(b), "c": c, "growth": growth / inner,
                                "full": full}
                    break  # widest passing interval for this b
            if best is not None:
                best.pop("key")
                best["c_rho_full"] = rho_best
            entry[cond] = best
        table[f"{th:.12g}"] = entry
        for end, label in ((0, "D0"), (1, "Dinf")):
            cands = [entry[c] for c, (e, _) in D_CONDITIONS.items() if e == end and entry[c] is not None]
            m = max((-x["growth"] for x in cands), default=-math.inf)
            rows.add(m, 1.0, theta=th, end=label)
    notes = ["conditions at infinity are tested on [a, t_max] only",
             "a pass is evidence on the grid, not a proof of membership"]
    return rows.report("d_class", f, tol, grid, constants={"conditions": table}, notes=notes, failures=fails)


def d_kappa_bound(report: ClassReport, theta: float) -> float:
    """min c * max(b, 1/b) over full-coverage passing conditions at theta (inf if none)."""
    entry = report.constants["conditions"].get(f"{theta:.12g}", {})
    return min((e["c_rho_full"] for e in entry.values() if e is not None), default=math.inf)


# ---------------------------------------------------------------- kappa and S

def r_times_j(f: FunctionSpec, theta: float, r: np.ndarray, cfg: QuadratureConfig | None = None):
    """r J_theta(r; f) for a vector of r, as one vector-valued integral."""
    cfg = cfg or QuadratureConfig(rel_tol=1e-8)
    r = np.asarray(r, float)
    w = np.exp(1j * theta)

    def g(tt):
        with np.errstate(over="ignore"):
            im = np.abs(f._eval(tt * w).imag)[:, None]
            d = r[None, :] + f.real(tt)[:, None]
            return r[None, :] * (im / d) / (d * tt[:, None])
    return integrate_half_line(g, 0.0, -2.0, cfg)


def estimate_kappa(f, theta: float, grid: GridSpec | None = None, cfg: QuadratureConfig | None = None,
                   stab_tol: float = 0.05, tol: float = 0.0) -> ClassReport:
    """kappa_hat = max over the r-grid of r J_theta(r; f).

    Stability: values at every r must stay below (1 + stab_tol) times the
    maximum over the grid trimmed by one decade at both ends.
    """
    f = as_spec(f)
    if not (0 < theta < math.pi / 2):
        raise ParameterError("theta must lie in (0, pi/2)")
    grid = grid or GridSpec()
    r = grid.r
    rows = _Rows()
    cfg = (cfg or QuadratureConfig(rel_tol=1e-8)).replace(strict=False)
    notes, fails = [], []
    try:
        res = r_times_j(f, theta, r, cfg)
    except QuadratureError as e:
        rows.add(-math.inf, 1.0, r=np.nan, theta=theta, r_j=np.nan)
        return rows.report("kappa", f, tol, grid, constants={"kappa": math.inf, "kappa_trimmed": math.inf},
                           notes=[f"J integral failed; E falsified at theta={theta:.6g}"],
                           failures=[{"at": "J", "error": str(e)}])
    vals = np.asarray(res.value, float)
    inner = (r >= r[0] * 10) & (r <= r[-1] / 10)
    k_in = float(vals[inner].max()) if inner.any() else float(vals.max())
    k = float(vals.max())
    rows.add(k_in * (1 + stab_tol) - vals, max(k_in, _TINY), r=r, theta=theta, r_j=vals)
    if not res.converged:
        # typically a logarithmic tail that outruns the floating point range
        notes.append(f"J integral not resolved (error estimate {res.err:.3g}); values are lower bounds")
        fails.append({"at": "J", "error": f"not converged, err={res.err:.3g}"})
        rows.add(-math.inf, 1.0, r=np.nan, theta=theta, r_j=np.nan)
    return rows.report("kappa", f, tol, grid, notes=notes, failures=fails,
                       constants={"kappa": k, "kappa_trimmed": k_in, "theta": theta, "quad_err": res.err})


def _sph_integrand(f: FunctionSpec, r: float):
    def g(t, s):
        z = t * np.exp(1j * s)
        with np.errstate(all="ignore"):
            m = np.abs(f._eval(z))
            a = np.abs(f._deriv(z))
            W = np.maximum(r, m)
            wr = np.minimum(r, m) / W
            return (a / W) * (r / W) / (1 + wr * wr)
    return g


def check_spherical_s(f, theta: float, grid: GridSpec | None = None, cfg: QuadratureConfig | None = None,
                      n_r: int = 13, stab_tol: float = 0.05, tol: float = 1e-8) -> ClassReport:
    """I(r) = int over the sector of S(f/r) dm/|z|, its stability in r, and J <= I / (2 r cos^2 theta)."""
    f = as_spec(f)
    if not (0 < theta < math.pi / 2):
        raise ParameterError("theta must lie in (0, pi/2)")
    grid = grid or GridSpec()
    cfg = (cfg or QuadratureConfig(rel_tol=1e-8)).replace(strict=False)
    r = np.geomspace(grid.r_min, grid.r_max, n_r)
    rows, fails = _Rows(), []
    I = np.full(r.size, np.nan)
    for i, ri in enumerate(r):
        try:
            res = integrate_polar_sector(_sph_integrand(f, ri), theta, cfg)
        except QuadratureError as e:
            fails.append({"at": f"r={ri:.6g}", "error": str(e)})
            continue
        I[i] = float(res.value)
        if not res.converged:
            fails.append({"at": f"r={ri:.6g}", "error": f"sector integral not converged, err={res.err:.3g}"})
    jr = r_times_j(f, theta, r, cfg)
    rj = np.asarray(jr.value, float)
    if not jr.converged:
        fails.append({"at": "J", "error": f"not converged, err={jr.err:.3g}"})
    chain = I / (2 * math.cos(theta) ** 2)        # r times the right side of the chain
    rows.add(chain - rj, _scale(chain, rj), kind="j_chain", r=r, theta=theta)
    inner = (r >= r[0] * 10) & (r <= r[-1] / 10)
    c_in = float(np.nanmax(I[inner])) if np.any(inner & np.isfinite(I)) else float(np.nanmax(I))
    rows.add(c_in * (1 + stab_tol) - I, max(c_in, _TINY), kind="stability", r=r, theta=theta)
    if fails:
        rows.add(-math.inf, 1.0, kind="quadrature", r=np.nan, theta=theta)
    return rows.report("spherical_s", f, tol, grid, failures=fails,
                       constants={"C_theta": float(np.nanmax(I)), "C_theta_trimmed": c_in,
                                  "integrals": I.tolist(), "theta": theta})


# ---------------------------------------------------------------- pipeline

@dataclass
class Classification:
    """Declared tags, the falsifier reports run against them, and a kappa table."""
    function: str
    tags: list
    reports: dict
    kappa: list

    @property
    def contradicted(self) -> list:
        """Checks that failed although the function carries the tag they test."""
        return [k for k, (tag, rep) in self.reports.items() if tag is not None and not rep.passed]

    @property
    def passed(self) -> bool:
        return not self.contradicted

    def to_dict(self) -> dict:
        return {"function": self.function, "tags": self.tags, "passed": self.passed,
                "contradicted": self.contradicted,
                "checks": {k: {"tag": tag, "passed": rep.passed, "worst": _plain(rep.worst),
                               "worst_at": rep.worst_at, "constants": _plain(rep.constants)}
                           for k, (tag, rep) in self.reports.items()},
                "kappa": self.kappa}


def classify(f, thetas=None, grid: GridSpec | None = None, cfg: QuadratureConfig | None = None) -> Classification:
    """Run every falsifier that applies and tabulate kappa_hat over thetas.

    A failed check only contradicts the declared tags when the function
    carries the tag being tested; the others are recorded as information
    (for example the Bernstein test on a completely monotone function).
    """
    f = as_spec(f)
    grid = grid or GridSpec()
    thetas = tuple(thetas) if thetas is not None else (math.pi / 8, math.pi / 4, 3 * math.pi / 8)
    tags = set(f.tags)

    def own(tag):
        return tag if tag in tags else None

    reports = {"np_range": (own(NP), check_np_range(f, grid)),
               "completely_monotone": (own(CM), check_complete_monotone(f)),
               "bernstein": (own(BF), check_complete_monotone(f, derivative=True))}
    if NP in tags:
        reports["brown_bounds"] = (NP, check_brown_bounds(f, grid))
        reports["d_class"] = (None, check_d_class(f, grid=grid))
    if BF in tags:
        reports["bernstein_imag"] = (BF, check_bernstein_imag(f, grid))
        reports["bf_envelope"] = (BF, check_bf_envelope(f, grid))
    if CBF in tags:
        reports["cbf_imag"] = (CBF, check_cbf_imag(f, grid))
    kappa = []
    if NP in tags:
        for th in thetas:
            rep = estimate_kappa(f, th, grid, cfg)
            row = {"theta": th, "kappa_hat": rep.constants["kappa"], "stable": rep.passed}
            if BF in tags:
                row["bf_bound"] = math.tan(th) if th < math.pi / 2 else math.inf
            kappa.append(row)
    return Classification(_name(f), public_tags(tags), reports, kappa)
