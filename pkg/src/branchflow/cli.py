"""Command-line surface.

Exit codes: 0 success, 1 configuration or I/O error, 2 invalid triangulation,
3 branch-structure violation, 4 flow degenerated, 5 time or iteration budget
exhausted, 6 no stationary point exists.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dynamics, packing, potential, solve, surface, verify
from .errors import BranchflowError, DocumentError, DomainError
from .geometry import EUCLIDEAN, HYPERBOLIC
from .packing import Normalization, PackingMetric
from .potential import PotentialKind

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVALID = 2
EXIT_BRANCH_VIOLATION = 3
EXIT_DEGENERATED = 4
EXIT_BUDGET = 5
EXIT_NO_STATIONARY_POINT = 6


class CliError(Exception):
    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _sig(x):
    """Round-trip binary64 through 17 significant digits (lossless)."""
    return float(f"{float(x):.17g}")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        if np.issubdtype(obj.dtype, np.integer):
            return obj.tolist()
        return [_sig(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return _sig(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _dump(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _config_hash(config):
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# -- argument plumbing ---------------------------------------------------------


def _add_surface_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", choices=surface.FIXTURE_NAMES)
    src.add_argument("--file", help="triangulation document (JSON)")
    p.add_argument("--default-weight", type=float, default=0.0,
                   help="uniform edge weight for fixtures (default 0)")
    p.add_argument("--branch", action="append", default=[], metavar="I:ORDER",
                   help="branch point assignment, repeatable")


def _add_metric_args(p):
    p.add_argument("--geometry", choices=(EUCLIDEAN, HYPERBOLIC),
                   default=EUCLIDEAN)
    p.add_argument("--metric", help="metric file (JSON with 'u' or 'r')")
    p.add_argument("--uniform", type=float, default=None, metavar="U",
                   help="start from the constant metric u = U")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the random start (used when no metric given)")


def _load_surface(args):
    if args.fixture:
        wt = surface.builtin(args.fixture, default_weight=args.default_weight)
        branch_doc = {}
    else:
        try:
            text = Path(args.file).read_text()
        except OSError as exc:
            raise CliError(f"cannot read {args.file}: {exc}")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(f"invalid JSON in {args.file}: {exc}")
        try:
            wt = surface.load_triangulation(doc)
        except DocumentError as exc:
            raise CliError(str(exc))
        except BranchflowError as exc:
            raise CliError(str(exc), EXIT_INVALID)
        branch_doc = doc.get("branch") or {}
    pairs = [(int(i), int(b)) for i, b in branch_doc.items()]
    for item in args.branch:
        try:
            i, b = item.split(":")
            pairs.append((int(i), int(b)))
        except ValueError:
            raise CliError(f"bad --branch value {item!r}; expected I:ORDER")
    try:
        beta = surface.BranchAssignment.from_pairs(wt.vertex_count, pairs)
    except BranchflowError as exc:
        raise CliError(str(exc))
    return wt, beta


def _resolve_metric(args, wt, geom):
    if args.metric:
        try:
            doc = json.loads(Path(args.metric).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read metric {args.metric}: {exc}")
        return _metric_from_doc(doc, wt.vertex_count, geom)
    if args.uniform is not None:
        u = np.full(wt.vertex_count, args.uniform, dtype=float)
    else:
        rng = np.random.default_rng(args.seed)
        u = verify.random_u(geom, wt.vertex_count, rng)
    return PackingMetric.from_u(geom, u)


def _metric_from_doc(doc, n, geom):
    if doc.get("geometry", geom) != geom:
        raise CliError(
            f"metric geometry {doc.get('geometry')!r} does not match {geom!r}")
    try:
        if "u" in doc:
            u = np.asarray(doc["u"], dtype=float)
            if u.shape != (n,):
                raise CliError(f"metric 'u' must have length {n}")
            return PackingMetric.from_u(geom, u)
        if "r" in doc:
            r = np.asarray(doc["r"], dtype=float)
            if r.shape != (n,):
                raise CliError(f"metric 'r' must have length {n}")
            return PackingMetric(geom, r)
    except (DomainError, ValueError) as exc:
        raise CliError(str(exc))
    raise CliError("metric file must contain 'u' or 'r'")


def _metric_doc(metric):
    return {
        "geometry": metric.geom,
        "u": metric.u,
        "r": metric.r,
    }


def _parse_normalization(text):
    if text == "literal":
        return Normalization.literal()
    if text == "branched":
        return Normalization.branched()
    if text.startswith("explicit="):
        try:
            return Normalization.explicit(float(text.split("=", 1)[1]))
        except ValueError:
            raise CliError(f"bad explicit normalization {text!r}")
    raise CliError(
        f"bad --normalization {text!r}; expected literal, branched, explicit=S")


def _resolve_rbar(args, wt, beta, kind_tag, alpha):
    spec = args.rbar
    if spec is None:
        raise CliError(f"flow kind {kind_tag} requires --rbar")
    geom = potential.kind_geometry(kind_tag)
    n = wt.vertex_count
    if spec.startswith("const="):
        try:
            return np.full(n, float(spec.split("=", 1)[1]))
        except ValueError:
            raise CliError(f"bad --rbar {spec!r}")
    if spec.startswith("from-metric="):
        path = spec.split("=", 1)[1]
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read metric {path}: {exc}")
        metric = _metric_from_doc(doc, n, geom)
        if kind_tag.startswith("area"):
            return packing.area_curvature(wt, metric, alpha, beta).R_HA
        return packing.alpha_curvature(wt, metric, alpha, beta).B
    try:
        doc = json.loads(Path(spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read rbar {spec}: {exc}")
    values = doc["rbar"] if isinstance(doc, dict) else doc
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n,):
        raise CliError(f"rbar must have length {n}")
    return arr


def _build_kind(args, wt, beta):
    tag = args.flow_kind
    geom = potential.kind_geometry(tag)
    norm = None
    rbar = None
    if tag in ("main_E", "main_H", "sinh_variant_H"):
        norm = (_parse_normalization(args.normalization)
                if args.normalization else packing.default_normalization(geom))
        if args.rbar:
            raise CliError(f"--rbar does not apply to flow kind {tag}")
    else:
        if args.normalization:
            raise CliError(f"--normalization does not apply to flow kind {tag}")
        rbar = _resolve_rbar(args, wt, beta, tag, args.alpha)
    try:
        return PotentialKind(tag, args.alpha, beta, normalization=norm, rbar=rbar)
    except BranchflowError as exc:
        raise CliError(str(exc))


def _out_dir(args):
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ---------------------------------------------------------------


def cmd_validate(args):
    wt, beta = _load_surface(args)
    report = surface.validate(wt)
    payload = {
        "checks": report.checks,
        "euler_characteristic": report.euler_characteristic,
        "vertices": wt.vertex_count,
        "edges": wt.edge_count,
        "faces": wt.face_count,
        "degrees": report.degrees,
        "branch_orders": beta.orders,
    }
    code = EXIT_OK if report.ok else EXIT_INVALID
    if args.check_branch and code == EXIT_OK:
        check = surface.check_branch_structure(wt, beta, args.cycle_bound)
        payload["branch_check"] = {
            "status": check.status,
            "violating_cycle": check.violating_cycle,
            "cycles_examined": check.cycles_examined,
            "skipped_nonseparating": check.skipped_nonseparating,
            "length_bound": check.length_bound,
        }
        if check.status == "violated":
            code = EXIT_BRANCH_VIOLATION
    sys.stdout.write(_dump(payload))
    return code


def cmd_curvature(args):
    wt, beta = _load_surface(args)
    metric = _resolve_metric(args, wt, args.geometry)
    norm = (_parse_normalization(args.normalization)
            if args.normalization else packing.default_normalization(args.geometry))
    cf = packing.alpha_curvature(wt, metric, args.alpha, beta)
    af = packing.area_curvature(wt, metric, args.alpha, beta)
    s = packing.normalization(norm, wt, metric, args.alpha, beta)
    payload = {
        "geometry": args.geometry,
        "alpha": args.alpha,
        "chi": wt.euler_characteristic(),
        "normalization": norm.tag,
        "u": metric.u,
        "r": metric.r,
        "K": cf.K,
        "B": cf.B,
        "A": af.A,
        "R_HA": af.R_HA,
        "s_alpha": s,
        "total_K": float(cf.K.sum()),
    }
    sys.stdout.write(_dump(payload))
    return EXIT_OK


def _write_trajectory(path, spec, traj):
    geom = spec.geom
    g_names = ("G_v", "G_w") if geom == EUCLIDEAN else ("G_p", "G_q")
    with open(path, "w") as fh:
        for rec in traj.records:
            row = {
                "type": "record",
                "t": rec.t, "u": rec.u, "r": rec.r, "K": rec.K, "B": rec.B,
                "s_alpha": rec.s_alpha, "omega_inf": rec.omega_inf,
                "potential": rec.potential,
                g_names[0]: rec.G_hi, g_names[1]: rec.G_lo,
            }
            fh.write(json.dumps(_jsonable(row), sort_keys=True) + "\n")
        fh.write(json.dumps(_jsonable({"type": "summary", "status": traj.status,
                                       "detail": traj.detail}),
                            sort_keys=True) + "\n")


def cmd_flow(args):
    wt, beta = _load_surface(args)
    kind = _build_kind(args, wt, beta)
    geom = potential.kind_geometry(args.flow_kind)
    metric = _resolve_metric(args, wt, geom)
    try:
        spec = dynamics.FlowSpec(
            wt, args.flow_kind, args.alpha, beta, metric,
            normalization=kind.normalization, rbar=kind.rbar,
        )
        cfg = dynamics.IntegratorConfig(
            method=args.method, step=args.step, atol=args.atol, rtol=args.rtol,
            max_time=args.max_time, convergence_tol=args.tol,
        )
    except BranchflowError as exc:
        raise CliError(str(exc))
    traj = dynamics.integrate(spec, cfg)
    out = _out_dir(args)
    _write_trajectory(out / "trajectory.jsonl", spec, traj)
    summary = {
        "command": "flow",
        "status": traj.status,
        "detail": traj.detail,
        "records": len(traj.records),
        "final_time": traj.final.t,
        "final_omega_inf": traj.final.omega_inf,
        "chi": wt.euler_characteristic(),
        "normalization": kind.normalization.tag if kind.normalization else None,
        "seed": args.seed,
    }
    try:
        rate = dynamics.estimate_rate(traj)
        summary["rate"] = {"lambda": rate.decay_rate, "r_squared": rate.r_squared}
    except BranchflowError as exc:
        summary["rate"] = {"error": str(exc)}
    if args.flow_kind in ("main_E", "main_H", "sinh_variant_H"):
        probe = dynamics.literal_normalization_probe(spec, traj)
        summary["probe"] = {
            "expected_constant": probe.expected_constant,
            "max_deviation": probe.max_deviation,
            "running_infimum": probe.running_infimum,
            "obstructed": probe.obstructed,
        }
    summary["config_hash"] = _config_hash(_flow_config(args))
    (out / "summary.json").write_text(_dump(summary))
    sys.stdout.write(_dump(summary))
    if traj.status == "converged":
        return EXIT_OK
    if traj.status == "degenerated":
        return EXIT_DEGENERATED
    return EXIT_BUDGET


def _flow_config(args):
    return {
        "command": "flow", "fixture": args.fixture, "file": args.file,
        "default_weight": args.default_weight, "branch": sorted(args.branch),
        "flow_kind": args.flow_kind, "alpha": args.alpha,
        "normalization": args.normalization, "rbar": args.rbar,
        "metric": args.metric, "uniform": args.uniform, "seed": args.seed,
        "method": args.method, "step": args.step, "atol": args.atol,
        "rtol": args.rtol, "max_time": args.max_time, "tol": args.tol,
    }


def cmd_solve(args):
    wt, beta = _load_surface(args)
    kind = _build_kind(args, wt, beta)
    geom = potential.kind_geometry(args.flow_kind)
    metric = _resolve_metric(args, wt, geom)
    try:
        cfg = solve.SolveConfig(metric, tolerance=args.tol,
                                max_iterations=args.max_iterations)
        if args.flow_kind in ("main_E", "main_H"):
            result = solve.stationary_metric(wt, kind, cfg)
        elif args.flow_kind == "sinh_variant_H":
            raise CliError("sinh_variant_H has no stationary-point solver")
        else:
            result = solve.solve_prescribed(wt, kind, cfg)
    except BranchflowError as exc:
        raise CliError(str(exc))
    out = _out_dir(args)
    summary = {
        "command": "solve",
        "status": result.status,
        "residual": result.residual,
        "iterations": result.iterations,
        "certificate": result.certificate,
        "obstruction": result.obstruction,
        "chi": wt.euler_characteristic(),
        "normalization": kind.normalization.tag if kind.normalization else None,
        "seed": args.seed,
        "config_hash": _config_hash(_solve_config(args)),
    }
    if result.metric is not None:
        (out / "metric.json").write_text(_dump(_metric_doc(result.metric)))
    (out / "summary.json").write_text(_dump(summary))
    sys.stdout.write(_dump(summary))
    if result.status == "found":
        return EXIT_OK
    if result.status == "no_stationary_point":
        return EXIT_NO_STATIONARY_POINT
    return EXIT_BUDGET


def _solve_config(args):
    return {
        "command": "solve", "fixture": args.fixture, "file": args.file,
        "default_weight": args.default_weight, "branch": sorted(args.branch),
        "flow_kind": args.flow_kind, "alpha": args.alpha,
        "normalization": args.normalization, "rbar": args.rbar,
        "metric": args.metric, "uniform": args.uniform, "seed": args.seed,
        "tol": args.tol, "max_iterations": args.max_iterations,
    }


def cmd_verify(args):
    try:
        report = verify.run_suite(args.suite, seed=args.seed)
    except DomainError as exc:
        raise CliError(str(exc))
    for check in report.checks:
        mark = "ok  " if check.ok else "FAIL"
        sys.stdout.write(f"{mark} {check.name}  margin={check.margin:.6g}\n")
    sys.stdout.write(
        f"suite {report.suite} seed {report.seed}: "
        f"{'PASS' if report.passed else 'FAIL'}\n")
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_export(args):
    try:
        lines = Path(args.trajectory).read_text().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read {args.trajectory}: {exc}")
    rows, status = [], None
    for line in lines:
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CliError(f"malformed trajectory line: {exc}")
        if rec.get("type") == "summary":
            status = rec.get("status")
        elif rec.get("type") == "record":
            rows.append(rec)
        else:
            raise CliError(f"unknown record type {rec.get('type')!r}")
    if not rows:
        raise CliError("trajectory stream contains no records")
    n = len(rows[0]["u"])
    g_keys = [k for k in ("G_v", "G_w", "G_p", "G_q") if k in rows[0]]
    header = (["t"]
              + [f"r_{i}" for i in range(n)]
              + [f"K_{i}" for i in range(n)]
              + [f"B_{i}" for i in range(n)]
              + ["omega_inf", "potential"] + g_keys + ["status"])
    out_path = Path(args.out) if args.out else Path(args.trajectory).with_suffix(".csv")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, rec in enumerate(rows):
            terminal = status if k == len(rows) - 1 else ""
            writer.writerow(
                [rec["t"]] + list(rec["r"]) + list(rec["K"]) + list(rec["B"])
                + [rec["omega_inf"], rec["potential"]]
                + [rec[g] for g in g_keys] + [terminal])
    sys.stdout.write(f"wrote {out_path} ({len(rows)} rows)\n")
    return EXIT_OK


def _sweep_one(payload):
    argv, out = payload
    with open(os.devnull, "w") as sink, contextlib.redirect_stdout(sink):
        code = main(argv + ["--out", out])
    return out, code


def cmd_sweep(args):
    alphas = [float(a) for a in args.alphas.split(",")] if args.alphas else [args.alpha]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    out = _out_dir(args)
    jobs = []
    for alpha in alphas:
        for seed in seeds:
            sub = out / f"alpha{alpha:g}_seed{seed}"
            argv = ["flow"]
            argv += ["--fixture", args.fixture] if args.fixture else ["--file", args.file]
            argv += ["--default-weight", str(args.default_weight)]
            for b in args.branch:
                argv += ["--branch", b]
            argv += ["--flow-kind", args.flow_kind, "--alpha", str(alpha),
                     "--seed", str(seed), "--method", args.method,
                     "--step", str(args.step), "--atol", str(args.atol),
                     "--rtol", str(args.rtol), "--max-time", str(args.max_time),
                     "--tol", str(args.tol)]
            if args.normalization:
                argv += ["--normalization", args.normalization]
            if args.rbar:
                argv += ["--rbar", args.rbar]
            jobs.append((argv, str(sub)))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    merged = []
    worst = EXIT_OK
    for run_dir, code in sorted(results):
        summary = json.loads((Path(run_dir) / "summary.json").read_text())
        merged.append({"run": Path(run_dir).name, "exit_code": code,
                       "status": summary["status"],
                       "config_hash": summary["config_hash"]})
        worst = max(worst, code)
    (out / "sweep.json").write_text(_dump({"runs": merged}))
    sys.stdout.write(_dump({"runs": merged}))
    return worst


# -- parser --------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="branchflow",
        description="Branched alpha-curvature flows on weighted triangulated surfaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a triangulation document")
    _add_surface_args(p)
    p.add_argument("--check-branch", action="store_true",
                   help="check the branch-structure cycle inequality")
    p.add_argument("--cycle-bound", type=int, default=8,
                   help="max simple-cycle length examined (default 8)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("curvature", help="curvature report for one metric")
    _add_surface_args(p)
    _add_metric_args(p)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--normalization", default=None)
    p.set_defaults(func=cmd_curvature)

    def add_flow_like(p, solver=False):
        _add_surface_args(p)
        _add_metric_args(p)
        p.add_argument("--flow-kind", required=True, choices=dynamics.FLOW_KINDS)
        p.add_argument("--alpha", type=float, default=0.0)
        p.add_argument("--normalization", default=None,
                       help="literal | branched | explicit=S (main kinds)")
        p.add_argument("--rbar", default=None,
                       help="FILE | from-metric=PATH | const=S (prescribed kinds)")
        p.add_argument("--out", default=None, help="output directory")
        if solver:
            p.add_argument("--tol", type=float, default=1e-10)
            p.add_argument("--max-iterations", type=int, default=100)
        else:
            p.add_argument("--method", default="rk45_adaptive",
                           choices=("rk45_adaptive", "rk4_fixed"))
            p.add_argument("--step", type=float, default=0.01)
            p.add_argument("--atol", type=float, default=1e-9)
            p.add_argument("--rtol", type=float, default=1e-9)
            p.add_argument("--max-time", type=float, default=1e4)
            p.add_argument("--tol", type=float, default=1e-10,
                           help="convergence tolerance on the sup norm of omega")

    p = sub.add_parser("flow", help="integrate a curvature flow")
    add_flow_like(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("solve", help="Newton solve for a stationary metric")
    add_flow_like(p, solver=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", choices=verify.SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="convert a trajectory stream to CSV")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("sweep", help="fan a flow config over alphas and seeds")
    add_flow_like(p)
    p.add_argument("--alphas", default=None, help="comma-separated alpha grid")
    p.add_argument("--seeds", default=None, help="comma-separated seed grid")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except BranchflowError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
