"""``mflab`` command line: run one task from a JSON config and write reports."""
import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, MflabError

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

TASKS = ("verify-pointwise", "verify-integral", "geodesic", "closed-orbit", "jacobi", "index-scan", "lyapunov", "optical")

_vec = {"type": "array", "items": {"type": "number"}, "minItems": 2}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "mflab run config",
    "type": "object",
    "additionalProperties": False,
    "required": ["task"],
    "properties": {
        "task": {"enum": list(TASKS)},
        "system": {
            "type": "object",
            "description": "either {'named': name, ...params} or a full system object with 'metric'",
        },
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1, "maximum": 100000},
        "field": {"type": "object"},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"N_x": {"type": "integer", "minimum": 4}, "N_f": {"type": "integer", "minimum": 4}},
        },
        "int_nabla": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"h": {"type": "object"}, "theta": {"type": "object"}},
        },
        "start": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x"],
            "properties": {"x": _vec, "y": _vec, "theta": {"type": "number"}},
        },
        "T": _pos,
        "T_guess": _pos,
        "T_total": {"type": "number", "minimum": 50},
        "integrator_tol": {"type": "number", "minimum": 1e-12, "maximum": 1e-4},
        "outputs": {"type": "integer", "minimum": 2, "maximum": 1000001},
        "init": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "profile": {
            "type": "object",
            "required": ["T"],
            "additionalProperties": False,
            "properties": {
                "T": _pos,
                "terms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["k"],
                        "properties": {"k": {"type": "integer", "minimum": 0}, "cos": {"type": "number"},
                                       "sin": {"type": "number"}},
                    },
                },
            },
        },
        "basis": {"type": "integer", "minimum": 1, "maximum": 64},
        "optical": {
            "type": "object",
            "required": ["h_terms"],
            "additionalProperties": False,
            "properties": {
                "h_terms": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["powers"],
                        "additionalProperties": False,
                        "properties": {
                            "powers": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                       "minItems": 2, "maxItems": 2},
                            "freq": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                            "cos": {"type": "number"},
                            "sin": {"type": "number"},
                        },
                    },
                },
                "fiber_res": {"type": "integer", "minimum": 16},
            },
        },
        "base_points": {"type": "array", "items": _vec},
        "gauge_points": {"type": "array", "items": _vec},
        "thresholds": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}


def canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    validate(cfg)
    return cfg


def validate(cfg):
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config key {where!r}: {e.message}")


def build_system(cfg):
    from .specs import MagneticSystem
    from .systems import NAMED

    d = cfg.get("system")
    if d is None:
        raise ConfigError("config key 'system' is required for this task")
    if "named" in d:
        name = d["named"]
        if name not in NAMED:
            raise ConfigError(f"config key 'system/named': unknown system {name!r}")
        params = {k: v for k, v in d.items() if k != "named"}
        try:
            return NAMED[name](**params)
        except TypeError as e:
            raise ConfigError(f"config key 'system': {e}") from None
    return MagneticSystem.from_json(d)


def _field(cfg):
    from .semibasic import field_from_json
    from .systems import sample_field

    return field_from_json(cfg["field"]) if "field" in cfg else sample_field()


def _start(cfg, sys):
    from .surface import sm_points

    st = cfg.get("start")
    if st is None:
        raise ConfigError("config key 'start' is required for this task")
    x = np.asarray(st["x"], dtype=float)
    if x.size != sys.dim:
        raise ConfigError("config key 'start/x' has the wrong dimension")
    if "y" in st:
        y = np.asarray(st["y"], dtype=float)
        y = y / sys.metric.F(x[None], y[None])[0]
    elif sys.dim == 2:
        _, yy = sm_points(sys.metric, x[None], float(st.get("theta", 0.0)))
        y = yy[0]
    else:
        raise ConfigError("config key 'start' needs 'y' outside dimension 2")
    return np.concatenate([x, y])


class Result:
    def __init__(self):
        self.checks = []
        self.results = {}
        self.tables = {}
        self.timings = []

    def check(self, name, value, threshold, op="<="):
        ok = bool(value <= threshold) if op == "<=" else bool(value >= threshold)
        self.checks.append({"name": name, "value": float(value), "threshold": float(threshold), "op": op,
                            "passed": ok})

    def timed(self, stage, fn, *a, **k):
        t0 = time.perf_counter()
        out = fn(*a, **k)
        self.timings.append((stage, time.perf_counter() - t0))
        return out


# tasks -------------------------------------------------------------------------


def task_verify_pointwise(cfg, res, threads):
    from .finsler import Geometry
    from .identities import pestov_nd_terms, xnabla_terms
    from .report import IdentityReport
    from .semibasic import commutation_reports
    from .surface import Frame2D, pestov_2d_terms, sm_points

    sys_ = build_system(cfg)
    u = _field(cfg)
    rng = np.random.default_rng(cfg.get("seed", 0))
    n = sys_.dim
    N = cfg.get("samples", 1000)
    if sys_.metric.periodic:
        x = rng.uniform(0, 2 * np.pi, (N, n))
    elif sys_.metric.kind == "constant_curvature" and sys_.metric.K0 < 0:
        x = rng.uniform(-0.5, 0.5, (N, n)) / np.sqrt(-sys_.metric.K0)
    else:
        x = rng.uniform(-2.0, 2.0, (N, n))
    if n == 2:
        x, y = sm_points(sys_.metric, x, rng.uniform(0, 2 * np.pi, N))
    else:
        y = rng.normal(size=(N, n))
        y = y / sys_.metric.F(x, y)[:, None]
    tol = cfg.get("thresholds", {}).get("residual", 1e-7)

    def job(name):
        geo = Geometry(sys_, x, y, 4)
        uj = u.build(geo)
        if name == "pestov_nd":
            return [IdentityReport.build(name, *pestov_nd_terms(geo, uj))]
        if name == "xnabla":
            return [IdentityReport.build(name, *xnabla_terms(geo, uj))]
        if name == "pestov_2d":
            return [IdentityReport.build(name, *pestov_2d_terms(Frame2D(geo), uj))]
        return commutation_reports(geo, uj)

    names = ["pestov_nd", "xnabla"] + (["pestov_2d"] if n == 2 else []) + ["commutation"]
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        outs = list(ex.map(job, names))
    res.timings.append(("identities", time.perf_counter() - t0))
    reports = [r for o in outs for r in o]
    rows = []
    for r in reports:
        res.check(r.name, r.residual, tol)
        res.results[r.name] = r.to_json()
        rows.append([r.name, r.residual, r.rel_residual])
    res.tables["pointwise"] = (["identity", "residual", "rel_residual"], rows)


def task_verify_integral(cfg, res, threads):
    from .identities import (build_grid, gauss_ostrogradskii, int_nabla_checks, integral_identity_2d,
                             integral_identity_nd)
    from .coeffs import TrigTerm
    from .semibasic import SemibasicVectorField, field_from_json, linear, pullback

    sys_ = build_system(cfg)
    u = _field(cfg)
    g = cfg.get("grid", {})
    grid = res.timed("grid", build_grid, sys_, g.get("N_x", 24), g.get("N_f", 24))
    tol = cfg.get("thresholds", {}).get("residual", 1e-6)
    inab = cfg.get("int_nabla", {})
    h = field_from_json(inab["h"]) if "h" in inab else pullback(TrigTerm((1, 0), 1.0))
    th = field_from_json(inab["theta"]) if "theta" in inab else linear((1, TrigTerm((0, 0), 0.3)))
    jobs = [
        ("integral_nd", lambda: [integral_identity_nd(sys_, u, grid)]),
        ("gauss_ostrogradskii", lambda: list(gauss_ostrogradskii(sys_, SemibasicVectorField.vertical_gradient(sys_, u), grid))),
        ("int_nabla", lambda: list(int_nabla_checks(sys_, h, th, grid))),
    ]
    if sys_.dim == 2:
        jobs.insert(0, ("integral_2d", lambda: [integral_identity_2d(sys_, u, grid)]))
    grid.weights  # computed once before fan-out

    def run(job):
        t0 = time.perf_counter()
        out = job[1]()
        return out, time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        outs = list(ex.map(run, jobs))
    rows = []
    for (name, _), (reps, dt) in zip(jobs, outs):
        res.timings.append((name, dt))
        for r in reps:
            res.check(r.name, r.residual, tol)
            res.results[r.name] = r.to_json()
            rows.append([r.name, grid.N_x, grid.N_f, float(r.lhs), float(r.rhs), r.residual, r.rel_residual])
    res.tables["integral"] = (["identity", "N_x", "N_f", "lhs", "rhs", "residual", "rel_residual"], rows)


def task_geodesic(cfg, res, threads):
    from .magnetic import integrate

    sys_ = build_system(cfg)
    z0 = _start(cfg, sys_)
    T = cfg.get("T", 2 * np.pi)
    te = np.linspace(0.0, T, cfg.get("outputs", 101))
    tr = res.timed("integrate", integrate, sys_, z0, T, cfg.get("integrator_tol", 1e-10), te)
    res.results["stats"] = {k: (float(v) if isinstance(v, float) else v) for k, v in tr.stats.items()}
    res.check("F_drift", tr.stats["F_drift"], cfg.get("thresholds", {}).get("F_drift", 1e-8))
    n = sys_.dim
    head = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
    res.tables["trajectory"] = (head, tr.to_csv_rows().tolist())


def task_closed_orbit(cfg, res, threads):
    from .errors import MissingPrimitive
    from .magnetic import action, find_closed_orbit

    sys_ = build_system(cfg)
    z0 = _start(cfg, sys_)
    orb = res.timed("newton", find_closed_orbit, sys_, z0, cfg.get("T_guess", 2 * np.pi))
    out = orb.to_json()
    try:
        out["action"] = res.timed("action", action, sys_, orb)
    except MissingPrimitive:
        out["action"] = None
    out["lattice_shift"] = [float(v) for v in orb.lattice_shift]
    res.results["orbit"] = out
    res.check("closure", orb.closure_residual, cfg.get("thresholds", {}).get("closure", 1e-8))
    n = sys_.dim
    res.tables["orbit"] = (["T"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["residual"],
                           [[orb.T, *orb.initial.x, *orb.initial.y, orb.closure_residual]])


def task_jacobi(cfg, res, threads):
    from .jacobi import jacobi_2d

    sys_ = build_system(cfg)
    z0 = _start(cfg, sys_)
    T = cfg.get("T", 10.0)
    te = np.linspace(0.0, T, cfg.get("outputs", 101))
    ts, y, yd = res.timed("jacobi_2d", jacobi_2d, sys_, z0, cfg.get("init", [0.0, 1.0]), T, te,
                          cfg.get("integrator_tol", 1e-10))
    res.results["final"] = {"t": float(ts[-1]), "y": float(y[-1]), "ydot": float(yd[-1])}
    res.tables["jacobi"] = (["t", "y", "ydot"], np.column_stack([ts, y, yd]).tolist())


def task_index_scan(cfg, res, threads):
    from .jacobi import QProfile, index_positivity_scan

    if "profile" not in cfg:
        raise ConfigError("config key 'profile' is required for index-scan")
    prof = QProfile.from_json(cfg["profile"])
    m = cfg.get("basis", 16)
    ev = res.timed("scan", index_positivity_scan, prof, m)
    res.results["min_eigenvalue"] = ev
    res.results["basis"] = m
    thr = cfg.get("thresholds", {})
    if "min_eigenvalue" in thr:
        res.check("min_eigenvalue", ev, thr["min_eigenvalue"], ">=")
    res.tables["index_scan"] = (["basis", "min_eigenvalue"], [[m, ev]])


def task_lyapunov(cfg, res, threads):
    from .jacobi import lyapunov

    sys_ = build_system(cfg)
    z0 = _start(cfg, sys_)
    r = res.timed("lyapunov", lyapunov, sys_, z0, cfg.get("T_total", 100.0))
    res.results["exponent"] = r.exponent
    thr = cfg.get("thresholds", {})
    if "expected" in thr:
        res.check("exponent_error", abs(r.exponent - thr["expected"]), thr.get("tolerance", 0.02))
    res.tables["lyapunov"] = (["t", "running_estimate"], [list(p) for p in r.trace])


def task_optical(cfg, res, threads):
    from .optical import OpticalSpec, barycenter, convexity, gauge, shifted

    if "optical" not in cfg:
        raise ConfigError("config key 'optical' is required for the optical task")
    spec = OpticalSpec.from_json(cfg["optical"])
    pts = cfg.get("base_points", [[0.0, 0.0]])
    sh = shifted(spec)
    rows = []
    for x in pts:
        b = barycenter(spec, x)
        kappa = convexity(spec, x)
        gs = [gauge(sh, x, p) for p in cfg.get("gauge_points", [])]
        rows.append([*x, *b, kappa, *gs])
        res.check(f"convexity[{x[0]:.17g},{x[1]:.17g}]", kappa, 0.0, ">=")
    head = ["x1", "x2", "beta1", "beta2", "min_curvature"] + [f"gauge{i}" for i in range(len(cfg.get("gauge_points", [])))]
    res.results["barycenters"] = [[float(r[2]), float(r[3])] for r in rows]
    res.tables["optical"] = (head, rows)


RUNNERS = {
    "verify-pointwise": task_verify_pointwise,
    "verify-integral": task_verify_integral,
    "geodesic": task_geodesic,
    "closed-orbit": task_closed_orbit,
    "jacobi": task_jacobi,
    "index-scan": task_index_scan,
    "lyapunov": task_lyapunov,
    "optical": task_optical,
}


# output ------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def run(cfg, out_dir, threads=1):
    """Run the configured task; returns ``(exit_code, report_dict)``."""
    validate(cfg)
    res = Result()
    RUNNERS[cfg["task"]](cfg, res, threads)
    ok = all(c["passed"] for c in res.checks)
    report = {
        "tool": "mflab",
        "version": __version__,
        "config_hash": config_hash(cfg),
        "task": cfg["task"],
        "passed": ok,
        "checks": res.checks,
        "results": _jsonable(res.results),
    }
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_csv(os.path.join(out_dir, "summary.csv"), ["check", "value", "op", "threshold", "passed"],
              [[c["name"], c["value"], c["op"], c["threshold"], c["passed"]] for c in res.checks])
    for name, (head, rows) in res.tables.items():
        write_csv(os.path.join(out_dir, f"{name}.csv"), head, rows)
    # wall times vary run to run, so they live apart from the reproducible files
    write_csv(os.path.join(out_dir, "timings.csv"), ["stage", "wall_time_s"], res.timings)
    return (EXIT_OK if ok else EXIT_FAILED), report


def main(argv=None):
    ap = argparse.ArgumentParser(prog="mflab", description="Magnetic Finsler flow laboratory")
    ap.add_argument("--version", action="version", version=f"mflab {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a task from a JSON config")
    r.add_argument("--config", required=True, metavar="PATH")
    r.add_argument("--out", default="mflab_out", metavar="DIR")
    r.add_argument("--threads", type=int, default=1, metavar="N")
    r.add_argument("--quiet", action="store_true")
    sub.add_parser("schema", help="print the config JSON schema")
    args = ap.parse_args(argv)
    if args.cmd == "schema":
        print(json.dumps(SCHEMA, indent=2, sort_keys=True))
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        code, report = run(cfg, args.out, args.threads)
    except ConfigError as e:
        print(f"mflab: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MflabError as e:
        print(f"mflab: numeric error ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # precondition violations raised by the library (dimension, ranges)
        print(f"mflab: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"mflab: numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        for c in report["checks"]:
            mark = "PASS" if c["passed"] else "FAIL"
            print(f"{mark} {c['name']}: {c['value']:.3e} {c['op']} {c['threshold']:.3e}")
        print(f"{cfg['task']}: {'passed' if report['passed'] else 'failed'} -> {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
