"""Batch front door: run one JSON job and write JSON results plus a CSV table.

A job file looks like

    {"command": "op-resolvent", "function": "Log1p", "matrix": "A.json",
     "params": {"z": [[1, 0.5]]}, "quad": {"rel_tol": 1e-9}, "tol": 1e-6,
     "output": {"name": "log1p_run"}}

"function" is a catalog name or a function JSON tree, "matrix" a path
(relative to the job file) or an inline array. Exit status: 0 when every
check passes, 1 on a negative margin or an oracle mismatch, 2 on bad input.

Heavy modules are imported after the flags are parsed so that --threads
reaches the BLAS library before it loads.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

log = logging.getLogger("sectorcalc")

OUT_DIR_ENV = "SECTORCALC_OUT_DIR"
COMMANDS = ("classify", "scalar-resolvent", "op-resolvent", "constants", "subordinate",
            "barycentre", "ritt", "semigroup", "verify")
DEFAULT_TOL = {"scalar-resolvent": 1e-7, "op-resolvent": 1e-6, "subordinate": 1e-8, "semigroup": 1e-8,
               "barycentre": 1e-8, "ritt": 0.05, "verify": None, "classify": None, "constants": 0.0}
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class JobError(Exception):
    """Malformed job input; field names the offending entry."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


class Job:
    """Field access on the job dict that reports the path of bad entries."""

    def __init__(self, data: dict, base: Path, tol: float | None = None, quad_rel_tol: float | None = None,
                 seed: int = 0):
        if not isinstance(data, dict):
            raise JobError("job", "top level must be a JSON object")
        self.data = data
        self.base = base
        self.command = data.get("command")
        if self.command not in COMMANDS:
            raise JobError("job.command", f"must be one of {', '.join(COMMANDS)} (got {self.command!r})")
        self.params = data.get("params") or {}
        if not isinstance(self.params, dict):
            raise JobError("job.params", "must be an object")
        tol_in = tol if tol is not None else data.get("tol", DEFAULT_TOL[self.command])
        if tol_in is not None and not (isinstance(tol_in, (int, float)) and tol_in >= 0):
            raise JobError("job.tol", "must be a nonnegative number")
        self.tol = tol_in
        self.seed = seed
        self._quad_rel_tol = quad_rel_tol

    def quad(self, default_rel: float = 1e-10):
        from .quad import QuadratureConfig
        q = dict(self.data.get("quad") or {})
        q.setdefault("rel_tol", default_rel)
        if self._quad_rel_tol is not None:
            q["rel_tol"] = self._quad_rel_tol
        try:
            return QuadratureConfig(**q)
        except TypeError as e:
            raise JobError("job.quad", str(e)) from e
        except ValueError as e:
            raise JobError("job.quad", str(e)) from e

    def param(self, name, default=None, required=False):
        if name not in self.params:
            if required:
                raise JobError(f"job.params.{name}", "is required for this command")
            return default
        return self.params[name]

    def number(self, name, default=None, required=False, lo=-math.inf, hi=math.inf):
        v = self.param(name, default, required)
        if v is None:
            return None
        if not isinstance(v, (int, float)) or not (lo <= v <= hi):
            raise JobError(f"job.params.{name}", f"must be a number in [{lo:g}, {hi:g}]")
        return float(v)

    def complex_(self, name, required=False, default=None):
        return _complex(self.param(name, default, required), f"job.params.{name}")

    def complex_list(self, name):
        v = self.param(name)
        if v is None:
            return None
        if not isinstance(v, list) or not v:
            raise JobError(f"job.params.{name}", "must be a nonempty list of [re, im] pairs")
        return [_complex(x, f"job.params.{name}[{i}]") for i, x in enumerate(v)]

    def function(self, required=True):
        from .functions import catalog, from_json
        spec = self.data.get("function")
        if spec is None:
            if required:
                raise JobError("job.function", "is required for this command")
            return None
        if isinstance(spec, str):
            cat = catalog()
            if spec not in cat:
                raise JobError("job.function", f"unknown catalog name {spec!r}; known: {', '.join(cat)}")
            return cat[spec]
        try:
            return from_json(spec)
        except (ValueError, KeyError, TypeError) as e:
            raise JobError("job.function", str(e)) from e

    def measure(self, name="measure"):
        from .measures import MeasureSpec
        d = self.param(name, required=True)
        try:
            return MeasureSpec.from_json(d)
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            raise JobError(f"job.params.{name}", str(e)) from e

    def matrix(self):
        from .sectorial import certify_sectorial, load_matrix, matrix_from_json
        m = self.data.get("matrix")
        if m is None:
            raise JobError("job.matrix", "is required for this command")
        try:
            if isinstance(m, str):
                path = (self.base / m) if not os.path.isabs(m) else Path(m)
                if not path.exists():
                    raise JobError("job.matrix", f"file {str(path)!r} does not exist")
                A = load_matrix(str(path))
            else:
                A = matrix_from_json(m)
        except JobError:
            raise
        except (ValueError, OSError) as e:
            raise JobError("job.matrix", str(e)) from e
        omega = self.data.get("omega")
        if omega is not None and not (isinstance(omega, (int, float)) and 0 <= omega < math.pi):
            raise JobError("job.omega", "must be a number in [0, pi)")
        from .errors import CertificationError
        try:
            return certify_sectorial(A, omega)
        except (ValueError, CertificationError) as e:
            raise JobError("job.matrix", f"certification failed: {e}") from e


def _complex(v, field):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise JobError(field, "must be a number or a [re, im] pair")


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


# ---------------------------------------------------------------- commands
# each returns (passed, result dict, csv header, csv rows)

def cmd_classify(job: Job):
    from .classcheck import classify
    f = job.function()
    thetas = job.param("thetas")
    if thetas is not None and (not isinstance(thetas, list)
                               or any(not isinstance(t, (int, float)) or not 0 < t < math.pi / 2 for t in thetas)):
        raise JobError("job.params.thetas", "must be a list of angles in (0, pi/2)")
    c = classify(f, thetas, cfg=job.quad(1e-10))
    rows = []
    for r in c.kappa:
        bound = r.get("bf_bound", math.nan)
        rows.append([r["theta"], r["kappa_hat"], bound, bound - r["kappa_hat"] if "bf_bound" in r else math.nan])
    return c.passed, c.to_dict(), ["theta", "kappa_hat", "bernstein_kappa_bound", "margin"], rows


def cmd_scalar(job: Job):
    from .scalarcalc import RepresentationChoice, oracle, pick_form, scalar_resolvent
    f = job.function()
    q = job.number("q", required=True, lo=0)
    form = job.param("form")
    lam = job.complex_("lambda", required=True)
    z = job.complex_("z", required=True)
    cbf = job.param("cbf_mode")
    if cbf is None:
        from .functions import CBF, E
        cbf = CBF in f.tags and (E not in f.tags or q <= 2)
    try:
        choice = RepresentationChoice(q, pick_form(f, form), bool(cbf))
    except ValueError as e:
        raise JobError("job.params", str(e)) from e
    res = scalar_resolvent(f, choice, lam, z, job.quad(1e-12))
    ref = complex(oracle(f, lam, z))
    rel = abs(res.value - ref) / abs(ref)
    out = {**res.to_dict(), "oracle": _pair(ref), "rel_error": rel, "tol": job.tol,
           "choice": {"q": choice.q, "form": choice.form, "cbf_mode": choice.cbf_mode}}
    row = [lam.real, lam.imag, z.real, z.imag, res.value.real, res.value.imag, rel, job.tol - rel]
    return rel <= job.tol, out, ["lambda_re", "lambda_im", "z_re", "z_im", "value_re", "value_im",
                                 "rel_error", "margin"], [row]


def _random_sector(rng, n, theta, r_lo=1e-1, r_hi=1e1):
    import numpy as np
    r = np.exp(rng.uniform(math.log(r_lo), math.log(r_hi), n))
    a = rng.uniform(-0.98 * theta, 0.98 * theta, n)
    return list(r * np.exp(1j * a))


def cmd_op_resolvent(job: Job):
    import numpy as np
    from .sectorial import matrix_to_json as dump_matrix
    from .opcalc import choose_rep, eigen_oracle_resolvent, operator_resolvent_full, NodeSolver
    f = job.function()
    S = job.matrix()
    zs = job.complex_list("z")
    theta = job.number("theta", default=math.pi / 2, lo=0, hi=math.pi)
    if zs is None:
        rng = np.random.default_rng(job.seed)
        zs = _random_sector(rng, int(job.number("n_random", 20, lo=1)), theta)
    th = max(abs(float(np.angle(z))) for z in zs)
    try:
        choice = choose_rep(f, S, None, job.param("mode"), job.number("q"), job.param("form"), th)
    except ValueError as e:
        raise JobError("job.params", str(e)) from e
    solver = NodeSolver(S, choice.q)
    cfg = job.quad(1e-9)
    results, rows, ok = [], [], True
    for z in zs:
        r = operator_resolvent_full(f, S, z, choice, cfg, solver)
        ref = eigen_oracle_resolvent(f, S, z)
        rel = float(np.linalg.norm(r.value - ref) / np.linalg.norm(ref))
        ok = ok and rel <= job.tol
        results.append({"z": _pair(z), "value": dump_matrix(r.value), "err": r.err,
                        "evaluations": r.evaluations, "rel_error_vs_oracle": rel})
        rows.append([z.real, z.imag, rel, job.tol, job.tol - rel])
    out = {"choice": choice.to_dict(), "matrix": S.to_dict(), "results": results, "tol": job.tol}
    return ok, out, ["z_re", "z_im", "rel_error_vs_oracle", "tolerance", "margin"], rows


def cmd_constants(job: Job):
    from .opcalc import sectoriality_bound
    from .sectorial import frac_power_sectorial_bound
    S = job.matrix()
    f = job.function(required=False)
    rows, bounds, ok = [], [], True
    if f is not None:
        thetas = job.param("thetas")
        if thetas is None:
            thetas = [t for t in (math.pi / 3, math.pi / 2, 2 * math.pi / 3) if t < math.pi - S.omega]
        cfg = job.quad(1e-7)
        for i, th in enumerate(thetas):
            if not isinstance(th, (int, float)):
                raise JobError(f"job.params.thetas[{i}]", "must be a number")
            try:
                b, rep = sectoriality_bound(f, S, float(th), job.number("q"), job.param("mode"), cfg=cfg)
            except ValueError as e:
                raise JobError(f"job.params.thetas[{i}]", str(e)) from e
            ok = ok and rep.passed
            bounds.append(rep.to_dict())
            rows.append(["sectoriality_of_f(A)", th, rep.inputs["q"], rep.measured, b, rep.margin])
    for i, p in enumerate(job.param("powers") or []):
        try:
            q, psi = float(p["q"]), float(p["psi"])
            mt, rep = frac_power_sectorial_bound(S, q, psi, p.get("variant", "printed"))
        except (KeyError, TypeError, ValueError) as e:
            raise JobError(f"job.params.powers[{i}]", str(e)) from e
        ok = ok and rep.passed
        bounds.append(rep.to_dict())
        rows.append(["sectoriality_of_A^q", psi, q, rep.measured, mt, rep.margin])
    out = {"certificate": S.to_dict(), "bounds": bounds}
    return ok, out, ["quantity", "theta", "q", "measured", "bound", "margin"], rows


def _levy_or_function(job: Job):
    from .measures import LevyTriple, MeasureSpec
    lv = job.param("levy")
    if lv is not None:
        try:
            return LevyTriple(float(lv.get("a", 0)), float(lv.get("b", 0)), MeasureSpec.from_json(lv["measure"])), None
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise JobError("job.params.levy", str(e)) from e
    f = job.function()
    from .functions import BF
    if BF not in f.tags:
        raise JobError("job.function", f"{f.describe()} is not tagged Bernstein; subordination needs a BF")
    return f, f


def cmd_subordinate(job: Job):
    import numpy as np
    from .sectorial import matrix_to_json as dump_matrix
    from .opcalc import bernstein_apply
    from .sectorial import matrix_function
    S = job.matrix()
    src, f = _levy_or_function(job)
    fA = bernstein_apply(src, S, job.quad(1e-11))
    out = {"fA": dump_matrix(fA)}
    ok, rows = True, []
    if f is not None:
        ref = matrix_function(S, f)
        rel = float(np.linalg.norm(fA - ref) / max(np.linalg.norm(ref), 1e-300))
        ok = rel <= job.tol
        out.update(rel_error_vs_oracle=rel, tol=job.tol)
        rows.append([S.n, rel, job.tol - rel])
    return ok, out, ["n", "rel_error_vs_oracle", "margin"], rows


def cmd_semigroup(job: Job):
    import numpy as np
    from .sectorial import matrix_to_json as dump_matrix
    from .opcalc import bernstein_apply, semigroup
    from .sectorial import matrix_function
    S = job.matrix()
    src, f = _levy_or_function(job)
    s_list = job.param("s", [0.5, 1.0, 2.0])
    if not isinstance(s_list, list) or any(not isinstance(s, (int, float)) or s < 0 for s in s_list):
        raise JobError("job.params.s", "must be a list of nonnegative numbers")
    fA = bernstein_apply(src, S, job.quad(1e-11))
    ok, rows, res = True, [], []
    for s in s_list:
        P = semigroup(fA, s)
        item = {"s": s, "value": dump_matrix(P)}
        if f is not None:
            ref = matrix_function(S, lambda w, s=s: np.exp(-s * f(w)))
            rel = float(np.linalg.norm(P - ref) / np.linalg.norm(ref))
            ok = ok and rel <= job.tol
            item["rel_error_vs_oracle"] = rel
            rows.append([s, rel, job.tol - rel])
        res.append(item)
    return ok, {"results": res, "tol": job.tol}, ["s", "rel_error_vs_oracle", "margin"], rows


def _barycentre(job: Job):
    from .opcalc import barycentre
    S = job.matrix()
    mu = job.measure()
    try:
        T = barycentre(S, mu, job.quad(1e-12))
    except ValueError as e:
        raise JobError("job.params.measure", str(e)) from e
    return S, mu, T


def cmd_barycentre(job: Job):
    import numpy as np
    from .sectorial import matrix_to_json as dump_matrix
    from .sectorial import matrix_function
    S, mu, T = _barycentre(job)
    cfg = job.quad(1e-12)
    ref = matrix_function(S, lambda w: np.asarray(mu.integrate(lambda t: np.exp(-np.outer(t, w)), cfg).value))
    rel = float(np.linalg.norm(T - ref) / np.linalg.norm(ref))
    out = {"T": dump_matrix(T), "rel_error_vs_oracle": rel, "tol": job.tol}
    return rel <= job.tol, out, ["n", "rel_error_vs_oracle", "margin"], [[S.n, rel, job.tol - rel]]


def cmd_ritt(job: Job):
    from .opcalc import check_ritt
    S, mu, T = _barycentre(job)
    theta = job.number("theta", math.pi / 2 - S.omega, lo=0, hi=math.pi / 2)
    r = check_ritt(T, theta, job.number("theta_prime"), job.number("rho_min", 1e-6, lo=0),
                   job.number("rho_max", 1e-1, lo=0), stab_tol=job.tol)
    rows = [[abs(l - 1), math.degrees(math.atan2(-(l - 1).imag, -(l - 1).real)), sc, r.C, m]
            for l, sc, m in zip(r.lam, r.scaled, r.margins)]
    return r.passed, r.to_dict(), ["distance_to_1", "angle_deg", "scaled_resolvent_norm", "fitted_C",
                                   "margin_over_distance"], rows


def cmd_verify(job: Job):
    from .acceptance import run_all
    only = job.param("criteria")
    crits = run_all(seed=job.seed, only=only, log=lambda s: print(s, flush=True))
    res = [c.to_dict() for c in crits]
    for d in res:
        d.pop("runtime", None)          # keep the JSON reproducible
    rows = [[c.number, c.name, c.metric, c.tolerance, c.passed] for c in crits]
    return all(c.passed for c in crits), {"criteria": res}, ["criterion", "name", "metric", "tolerance", "passed"], rows


HANDLERS = {"classify": cmd_classify, "scalar-resolvent": cmd_scalar, "op-resolvent": cmd_op_resolvent,
            "constants": cmd_constants, "subordinate": cmd_subordinate, "barycentre": cmd_barycentre,
            "ritt": cmd_ritt, "semigroup": cmd_semigroup, "verify": cmd_verify}


# ---------------------------------------------------------------- driver

def _json_default(o):
    import numpy as np
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_outputs(out_dir: Path, name: str, result: dict, header, rows) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    jp = out_dir / f"{name}.json"
    cp = out_dir / f"{name}.csv"
    with open(jp, "w") as fh:
        json.dump(result, fh, indent=2, default=_json_default, allow_nan=True)
        fh.write("\n")
    with open(cp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in r])
    return jp, cp


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sectorcalc", description=__doc__.split("\n")[0])
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="overrides the job's command; 'verify' needs no job file")
    p.add_argument("--job", help="JSON job file")
    p.add_argument("--tol", type=float, help="pass/fail tolerance override")
    p.add_argument("--quad-rel-tol", type=float, help="relative tolerance of the quadrature")
    p.add_argument("--out-dir", help=f"output directory (the {OUT_DIR_ENV} variable wins)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomised test points")
    p.add_argument("--threads", type=int, help="BLAS/OpenMP thread count")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return 2
        for v in _THREAD_VARS:
            os.environ[v] = str(args.threads)
        if "numpy" in sys.modules:
            log.warning("numpy was already loaded; --threads may not take effect")
    try:
        if args.job:
            path = Path(args.job)
            if not path.exists():
                raise JobError("--job", f"file {args.job!r} does not exist")
            try:
                data = json.loads(path.read_text())
            except json.JSONDecodeError as e:
                raise JobError("--job", f"invalid JSON ({e})") from e
            base = path.resolve().parent
        elif args.command:
            data, base = {}, Path.cwd()
        else:
            raise JobError("--job", "give a job file or a command")
        if args.command:
            data = {**data, "command": args.command}
        job = Job(data, base, args.tol, args.quad_rel_tol, args.seed)
        if job.command != "verify" and not args.job:
            raise JobError("--job", f"command {job.command!r} needs a job file")
        output = data.get("output") or {}
        if not isinstance(output, dict):
            raise JobError("job.output", "must be an object")
        out_dir = Path(os.environ.get(OUT_DIR_ENV) or args.out_dir or output.get("dir") or ".")
        name = output.get("name") or job.command
        t0 = time.perf_counter()
        passed, result, header, rows = HANDLERS[job.command](job)
    except JobError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError) as e:
        # library-level parameter errors surface as input errors
        print(f"input error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except ArithmeticError as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        from .errors import SectorCalcError
        if not isinstance(e, SectorCalcError):
            raise
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    result = {"command": job.command, "passed": bool(passed), **result}
    jp, cp = write_outputs(out_dir, name, result, header, rows)
    log.info("%s finished in %.2fs", job.command, time.perf_counter() - t0)
    print(f"{job.command}: {'PASS' if passed else 'FAIL'} -> {jp} , {cp}")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
