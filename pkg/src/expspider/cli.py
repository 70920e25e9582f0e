"""Command-line runner: ``solve``, ``verify``, ``qd-analyze``, ``trace-export``, ``batch``.

Exit codes: 0 success, 1 verification failure, 2 divergence, 64 usage error,
66 missing input.  Every run writes into its own directory
``<config stem>-<timestamp>``; the files inside carry no timestamps, so the
same config and flags give byte-identical ``result.json``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .diagnostics import check_eta_invariance, check_lambda_bounds
from .errors import PortraitSyntaxError, PortraitValidationError, SpiderError
from .exp_family import ExpParams
from .oracle import verify_orbit
from .portrait import SCHEMA_VERSION, BranchAddress, OrbitPortrait, parse_config
from .pullback import CONVERGED, IterationOptions, initial_configuration, iterate
from .qd_transfer import QuadratureConfig, contraction_estimate

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_DIVERGED = 2
EXIT_USAGE = 64
EXIT_NOINPUT = 66

RESULT_FILE = "result.json"
TRACE_FILE = "trace.csv"
TRAJECTORY_FILE = "trajectory.npz"
QD_FILE = "qd_report.json"
POINTS_FILE = "points.csv"


class UsageError(Exception):
    pass


class MissingInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("usage", message)
        sys.exit(EXIT_USAGE)


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".16e")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats written to 17 significant digits (``.16e``)."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    return json.dumps(obj)


def _emit_error(kind: str, message: str, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def _parse_complex(text: str) -> complex:
    t = text.strip()
    try:
        if "," in t:
            re_, im_ = t.split(",")
            return complex(float(re_), float(im_))
        return complex(t.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot read {text!r} as a complex number (use 're,im' or 'a+bj')") from None


def _load_config(path: Path):
    if not path.is_file():
        raise MissingInput(f"config file {str(path)!r} not found")
    try:
        return parse_config(path.read_text(encoding="utf-8"))
    except (PortraitSyntaxError, PortraitValidationError) as exc:
        raise UsageError(str(exc)) from None


def _run_dir(out: Path, stem: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    base = out / f"{stem}-{stamp}"
    path, k = base, 1
    while path.exists():
        path = Path(f"{base}-{k}")
        k += 1
    path.mkdir(parents=True)
    return path


def _stem(path: Path) -> str:
    name = path.name
    for suffix in (".spider.json", ".json"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def _portrait_doc(portrait: OrbitPortrait, address: BranchAddress) -> dict:
    return {
        "p": portrait.p,
        "orbit": list(portrait.orbit),
        "cycle_entry": portrait.cycle_entry,
        "address": {k: int(v) for k, v in address.address.items()},
    }


def _options(cfg, args) -> IterationOptions:
    try:
        return IterationOptions.from_tolerances(
            cfg.tolerances, tol=args.tol, max_iter=args.max_iter, lambda_max=args.lambda_max
        )
    except TypeError as exc:
        raise UsageError(str(exc)) from None


def solve_config(config_path, out_dir, tol=None, max_iter=None, lambda_max=None, seed=None) -> tuple[int, Path | None]:
    """Run one config end to end; returns ``(exit code, run directory)``."""
    args = argparse.Namespace(tol=tol, max_iter=max_iter, lambda_max=lambda_max)
    config_path = Path(config_path)
    cfg = _load_config(config_path)
    seed_lam = _parse_complex(seed) if isinstance(seed, str) else seed
    seed_lam = seed_lam if seed_lam is not None else cfg.seed_lambda
    if seed_lam is None:
        raise UsageError("no seed: give seed_lambda in the config or --seed")
    opts = _options(cfg, args)
    portrait, address = cfg.portrait, cfg.address
    run_dir = _run_dir(Path(out_dir), _stem(config_path))

    result = {
        "schema_version": SCHEMA_VERSION,
        "portrait": _portrait_doc(portrait, address),
        "seed_lambda": [seed_lam.real, seed_lam.imag],
        "options": {"tol": opts.tol, "max_iter": opts.max_iter, "lambda_max": opts.lambda_max,
                    "gap_min": opts.gap_min},
    }
    try:
        init = initial_configuration(portrait, seed_lam)
        res = iterate(portrait, address, init, opts)
    except SpiderError as exc:
        step = getattr(exc, "step", None)
        result.update({"status": "error", "error": type(exc).__name__, "message": str(exc), "step": step})
        (run_dir / RESULT_FILE).write_text(dumps(result) + "\n", encoding="utf-8")
        _emit_error(type(exc).__name__, str(exc), step=step, run_dir=str(run_dir))
        return EXIT_DIVERGED, run_dir

    trace, params = res.trace, res.params
    last = trace.records[-1] if trace.records else None
    result.update({
        "status": trace.status,
        "message": trace.message,
        "iterations": len(trace.records),
        "lambda_re": params.lam.real if params else math.nan,
        "lambda_im": params.lam.imag if params else math.nan,
        "alpha_re": params.alpha.real if params else math.nan,
        "alpha_im": params.alpha.imag if params else math.nan,
        "p": portrait.p,
        "residual": last.residual if last else math.nan,
        "displacement": last.d if last else math.nan,
        "min_gap": min(r.b for r in trace.records) if trace.records else math.nan,
        "eta": last.eta if last else None,
        "eta_invariant": check_eta_invariance(trace),
        "eta_claim": address.eta_claim,
        "eta_matches_claim": None if address.eta_claim is None or last is None else last.eta == address.eta_claim,
    })
    code = EXIT_OK
    if trace.status == CONVERGED:
        try:
            bounds = check_lambda_bounds(trace)
            result.update({
                "kappa": bounds.kappa,
                "K": bounds.K,
                "bound_check": {"applicable": bounds.applicable, "kind": bounds.kind, "holds": bounds.holds,
                                "max_ratio": bounds.max_ratio, "tightest_ratio": bounds.tightest_ratio},
            })
        except SpiderError as exc:
            result["bound_check"] = {"applicable": True, "holds": False, "error": str(exc)}
        report = verify_orbit(params, portrait, max(opts.tol, 1e-9))
        result["verify"] = {"passed": report.passed, "closure_distance": report.closure_distance,
                            "min_separation": report.min_separation, "message": report.message}
        if not report.passed:
            code = EXIT_VERIFY
    else:
        code = EXIT_DIVERGED
    result["positions"] = {k: [complex(z).real, complex(z).imag] for k, z in res.config.positions.items()}

    (run_dir / RESULT_FILE).write_text(dumps(result) + "\n", encoding="utf-8")
    with open(run_dir / TRACE_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "lambda_re", "lambda_im", "d", "b", "eta", "residual"])
        for r in trace.records:
            w.writerow([r.n, _fmt(r.lam.real), _fmt(r.lam.imag), _fmt(r.d), _fmt(r.b), r.eta, _fmt(r.residual)])
    names = list(portrait.points)
    traj = np.array([[r.positions[k] for k in names] for r in trace.records], dtype=complex).reshape(-1, len(names))
    np.savez(run_dir / TRAJECTORY_FILE, names=np.array(names), positions=traj,
             steps=np.array([r.n for r in trace.records], dtype=int))
    if code != EXIT_OK:
        _emit_error(trace.status if code == EXIT_DIVERGED else "verification", trace.message or "orbit check failed",
                    run_dir=str(run_dir))
    return code, run_dir


def _result_path(path: Path) -> Path:
    if path.is_dir():
        path = path / RESULT_FILE
    if not path.is_file():
        raise MissingInput(f"result file {str(path)!r} not found")
    return path


def _load_result(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not a result document ({exc.msg})") from None


def _result_params(doc) -> tuple[ExpParams, OrbitPortrait]:
    try:
        por = doc["portrait"]
        portrait = OrbitPortrait(int(por["p"]), tuple(por["orbit"]), por["cycle_entry"])
        lam = complex(doc["lambda_re"], doc["lambda_im"])
        return ExpParams(portrait.p, lam), portrait
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"result document lacks a usable parameter: {exc}") from None


def cmd_solve(args) -> int:
    code, run_dir = solve_config(args.config, args.out, args.tol, args.max_iter, args.lambda_max, args.seed)
    print(run_dir)
    return code


def cmd_verify(args) -> int:
    path = _result_path(Path(args.result))
    params, portrait = _result_params(_load_result(path))
    report = verify_orbit(params, portrait, args.tol)
    print(json.dumps({"passed": report.passed, "closure_distance": report.closure_distance,
                      "min_separation": report.min_separation, "message": report.message}))
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_qd_analyze(args) -> int:
    if args.branches < 1:
        raise UsageError("--branches must be >= 1")
    if args.grid < 8 or args.grid % 8:
        raise UsageError("--grid must be a positive multiple of 8")
    path = _result_path(Path(args.result))
    doc = _load_result(path)
    params, _ = _result_params(doc)
    marked = [complex(*v) for v in doc.get("positions", {}).values()]
    report = contraction_estimate(params, marked, args.branches, QuadratureConfig(args.grid))
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
    (out / QD_FILE).write_text(dumps(body) + "\n", encoding="utf-8")
    print(out / QD_FILE)
    if report.entries and not all(e.ratio < 1 for e in report.entries):
        return EXIT_VERIFY
    return EXIT_OK


def cmd_trace_export(args) -> int:
    run_dir = Path(args.run_dir)
    traj = run_dir / TRAJECTORY_FILE
    if not traj.is_file():
        raise MissingInput(f"no {TRAJECTORY_FILE} in {str(run_dir)!r}")
    data = np.load(traj)
    names, pos, steps = data["names"], data["positions"], data["steps"]
    out = run_dir / POINTS_FILE
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "index", "re", "im"])
        for n, row in zip(steps, pos):
            for name, z in zip(names, row):
                w.writerow([int(n), str(name), _fmt(z.real), _fmt(z.imag)])
    print(out)
    return EXIT_OK


def _batch_one(job):
    path, out, tol, max_iter, lambda_max, seed = job
    try:
        code, run_dir = solve_config(path, out, tol, max_iter, lambda_max, seed)
        return path, code, str(run_dir)
    except UsageError as exc:
        return path, EXIT_USAGE, str(exc)
    except MissingInput as exc:
        return path, EXIT_NOINPUT, str(exc)


def cmd_batch(args) -> int:
    jobs = [(c, args.out, args.tol, args.max_iter, args.lambda_max, args.seed) for c in args.configs]
    if args.jobs == 1:
        results = [_batch_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_one, jobs))
    worst = EXIT_OK
    for path, code, info in results:
        print(f"{code}\t{path}\t{info}")
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="expspider", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_flags(p):
        p.add_argument("--tol", type=float, help="displacement tolerance (default 1e-11)")
        p.add_argument("--max-iter", type=int, help="iteration cap (default 10000)")
        p.add_argument("--lambda-max", type=float, help="divergence threshold on |lambda| (default 1e6)")
        p.add_argument("--seed", help="seed lambda as 're,im' or 'a+bj' (overrides the config)")
        p.add_argument("--out", default="runs", help="parent directory for run directories")

    p = sub.add_parser("solve", help="run the pullback on a .spider.json config")
    p.add_argument("config")
    run_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="re-check a stored result against its portrait")
    p.add_argument("result", help="result.json or its run directory")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("qd-analyze", help="estimate transfer-operator contraction at a stored result")
    p.add_argument("result", help="result.json or its run directory")
    p.add_argument("--branches", "-M", type=int, default=128, help="branch truncation M")
    p.add_argument("--grid", type=int, default=64, help="grid resolution N (multiple of 8)")
    p.add_argument("--out", help="directory for qd_report.json (default: next to the result)")
    p.set_defaults(func=cmd_qd_analyze)

    p = sub.add_parser("trace-export", help="write points.csv with marked-point trajectories")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_trace_export)

    p = sub.add_parser("batch", help="solve several configs, optionally in parallel")
    p.add_argument("configs", nargs="+")
    p.add_argument("--jobs", type=int, default=1)
    run_flags(p)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except MissingInput as exc:
        _emit_error("missing-input", str(exc))
        return EXIT_NOINPUT


if __name__ == "__main__":
    sys.exit(main())
