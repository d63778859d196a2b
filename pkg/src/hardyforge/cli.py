"""Command line interface: ``hardy-forge <command> [options]``.

Exit codes: 0 success, 1 a verification failed, 2 usage or configuration
error, 3 numerical failure (an ``Inconclusive`` verdict counts as 3 only with
``--strict``).  Every run writes ``manifest.json`` into ``--out-dir``.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .construct import OneDimWeight, ParameterError
from .discrete import EigenSolverError, GridError, SingularSystemError
from .domain import ConfigError, exhaustion_member, exhaustion_radius, from_config
from .examples import (
    CSV_FORMAT,
    ExteriorBallFields,
    compare_kl_weight,
    example_exterior_ball,
    example_half_ball,
    example_half_space,
    example_punctured_space,
    format_float,
    green_pipeline,
    write_levels_csv,
)
from .expr import ExpressionError, scalar_function
from .green import KernelUnavailableError, QuadratureError
from .probes import SCHEMA, LevelSetError, optimality_at_infinity_probe
from .sturm import INCONCLUSIVE, OPTIMAL, is_optimal_1d

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------- helpers


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        raise UsageError("--config is required for this command")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([format_float(v) for v in row])


def _interval(text: Optional[list]) -> tuple:
    """``["0,2"]`` or ``["0", "2"]``; default ``(0, inf)``."""
    if text is None:
        return (0.0, np.inf)
    parts = [p for item in text for p in item.split(",") if p.strip()]
    if len(parts) != 2:
        raise UsageError(f"--interval needs two numbers, got {text}")
    try:
        lo, hi = (float(v) for v in parts)
    except ValueError:
        raise UsageError(f"--interval needs two numbers, got {text}") from None
    if not lo < hi:
        raise UsageError("--interval needs lo < hi")
    return (lo, hi)


# --------------------------------------------------------------------------- commands


def cmd_verify_1d(args, out: Path, ctx: dict) -> int:
    w = scalar_function(args.w)
    psi = scalar_function(args.psi)
    w1d = OneDimWeight(w, psi, None, _interval(args.interval), label=f"({args.w}, {args.psi})")
    tol = args.tol if args.tol is not None else 1e-6
    verdict = is_optimal_1d(w1d, ode_tol=tol)
    report = {"schema": SCHEMA, "w": args.w, "psi": args.psi, **verdict.to_dict()}
    path = out / "verify_1d.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    ctx["files"].append(str(path))
    ctx["verdicts"]["verify-1d"] = verdict.overall
    print(f"overall: {verdict.overall} (ODE residual {verdict.ode_residual:.3g})")
    if verdict.overall == OPTIMAL:
        return EXIT_OK
    if verdict.overall == INCONCLUSIVE:
        return EXIT_NUMERIC if args.strict else EXIT_OK
    return EXIT_FAIL


def cmd_construct(args, out: Path, ctx: dict) -> int:
    cfg = _load_config(args.config)
    domain, operator = from_config(cfg)
    ctx["inputs"]["config"] = cfg
    rng = np.random.default_rng(args.seed)
    if domain.kind == "exterior_ball":
        gamma = operator.gamma_value if operator.gamma_value is not None else 0.0
        fields = ExteriorBallFields.build(domain.n, gamma)
        W, v, h, t = fields.W, fields.v, fields.w, fields.radial(fields.s, None, "s")
        ctx["inputs"]["route"] = "explicit supersolution"
    else:
        fraction = args.a_fraction if args.a is None else args.a / 2.0
        _, _, res = green_pipeline(domain, fraction, operator)
        W, v, h, t = res.W, res.v, res.h, res.t
        ctx["inputs"]["route"] = "green potential"
        ctx["inputs"]["a"] = res.params.a
    pts = exhaustion_member(domain, args.level).sample(rng, args.points)
    n = domain.n
    cols = [f"x{i + 1}" for i in range(n)] + ["r", "t", "W", "v", "h"]
    data = np.column_stack([pts, np.linalg.norm(pts, axis=1), t(pts), W(pts), v(pts), h(pts)])
    path = out / (args.out or "weight.csv")
    _write_csv(path, cols, data)
    ctx["files"].append(str(path))
    ok = bool(np.all(data[:, n + 2] >= 0))
    ctx["verdicts"]["W_nonnegative"] = ok
    print(f"wrote {len(data)} samples to {path}")
    return EXIT_OK if ok else EXIT_FAIL


def _weight_from_csv(path: str):
    """Radial weight from a CSV with columns ``r`` (or ``x1..xn``) and ``W``: log-log interpolation in ``r``."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"weight file not found: {path}")
    with open(p) as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "W" not in rows[0]:
        raise UsageError("weight CSV needs a 'W' column")
    if "r" in rows[0]:
        r = np.array([float(row["r"]) for row in rows])
    else:
        xs = sorted(k for k in rows[0] if k.startswith("x"))
        r = np.linalg.norm(np.array([[float(row[k]) for k in xs] for row in rows]), axis=1)
    W = np.array([float(row["W"]) for row in rows])
    order = np.argsort(r)
    r, W = r[order], W[order]
    if np.any(W <= 0):
        raise UsageError("log interpolation needs W > 0")
    lr, lw = np.log(r), np.log(W)

    def weight(x):
        rr = np.linalg.norm(np.atleast_2d(x), axis=1)
        return np.exp(np.interp(np.log(rr), lr, lw))

    return weight, (float(r[0]), float(r[-1]))


def cmd_eig(args, out: Path, ctx: dict) -> int:
    cfg = _load_config(args.config)
    domain, operator = from_config(cfg)
    ctx["inputs"]["config"] = cfg
    if domain.kind not in ("punctured_space", "exterior_ball"):
        raise UsageError("eig runs on radial reductions: use a punctured_space or exterior_ball domain")
    n = domain.n
    inner = exhaustion_radius(domain, 1)
    radii = [exhaustion_radius(domain, k + 1) for k in range(1, args.levels + 1)]
    if args.weight:
        W, (lo, hi) = _weight_from_csv(args.weight)
        if lo > inner or hi < radii[-1]:
            raise UsageError(f"weight samples cover r in [{lo:g}, {hi:g}], need [{inner:g}, {radii[-1]:g}]")
    elif domain.kind == "exterior_ball":
        gamma = operator.gamma_value if operator.gamma_value is not None else 0.0
        W = ExteriorBallFields.build(n, gamma).W
    else:
        W = green_pipeline(domain, args.a_fraction)[2].W
    tol = args.tol if args.tol is not None else 0.05
    report = optimality_at_infinity_probe(W, n, inner=inner, radii=radii, per_unit_log=1.0 / args.h, tol_limit=tol)
    path = Path(args.out) if args.out else out / "report.json"
    if not path.is_absolute() and args.out:
        path = out / path
    path.write_text(report.to_json() + "\n")
    csv_path = path.with_suffix(".csv")
    write_levels_csv(csv_path, report.levels)
    ctx["files"] += [str(path), str(csv_path)]
    ctx["verdicts"]["eig"] = report.verdict
    for lv in report.levels:
        print(f"k={lv['k']} R={lv['R']:g} lambda0={lv['lambda0']:.8f}")
    print(f"limit {report.fit['limit']:.6f}: {report.verdict}")
    return EXIT_OK if report.verdict == "PASS" else EXIT_FAIL


def cmd_example(args, out: Path, ctx: dict) -> int:
    name = args.name
    if name == "ext-ball":
        res = example_exterior_ball(args.n, args.gamma, seed=args.seed)
    elif name == "half-ball":
        res = example_half_ball(args.n, args.a_fraction, seed=args.seed)
    elif name == "half-space":
        res = example_half_space(args.n, args.a_fraction, seed=args.seed)
    else:
        res = example_punctured_space(args.n, args.a_fraction, seed=args.seed)
    files = res.write(out)
    ctx["files"] += files
    ctx["verdicts"].update({k: v.verdict for k, v in res.verdicts.items()})
    ctx["verdicts"]["checks"] = {k: bool(v) for k, v in res.checks.items()}
    ctx["inputs"]["params"] = json.loads(json.dumps(res.summary()["params"]))
    ctx["inputs"]["route"] = res.route
    summary = {k: v for k, v in res.params.items() if np.isscalar(v)}
    print(json.dumps(summary, sort_keys=True))
    for k, v in sorted(res.checks.items()):
        print(f"{k}: {'PASS' if v else 'FAIL'}")
    inconclusive = any(v.verdict == "Inconclusive" for v in res.verdicts.values())
    if not res.passed:
        return EXIT_FAIL
    if inconclusive and args.strict:
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_compare_kl(args, out: Path, ctx: dict) -> int:
    table = compare_kl_weight(args.n, args.gamma)
    path = out / "compare_kl.csv"
    _write_csv(path, ["r", "W_ours", "W_KL", "ratio"], zip(table["r"], table["W_ours"], table["W_KL"], table["ratio"]))
    ctx["files"].append(str(path))
    ctx["verdicts"]["dominates"] = table["strict"]
    print(f"eps_ours={table['eps_ours']:g} eps_KL={table['eps_kl']:g} ratio at r=1: {table['ratio_at_1']:.12g}")
    return EXIT_OK if table["strict"] else EXIT_FAIL


def cmd_green_dump(args, out: Path, ctx: dict) -> int:
    cfg = _load_config(args.config)
    domain, operator = from_config(cfg)
    ctx["inputs"]["config"] = cfg
    if domain.kind == "exterior_ball":
        raise UsageError("no closed-form kernel for the exterior ball; use the discrete Green solve")
    G, _, _ = green_pipeline(domain, 0.0, operator)
    pts = exhaustion_member(domain, args.level).sample(np.random.default_rng(args.seed), args.points)
    n = domain.n
    data = np.column_stack([pts, G(pts), G.grad(pts)])
    cols = [f"x{i + 1}" for i in range(n)] + ["G"] + [f"dG_dx{i + 1}" for i in range(n)]
    path = out / "green_potential.csv"
    _write_csv(path, cols, data)
    ctx["files"].append(str(path))
    print(f"wrote {len(data)} samples to {path}")
    return EXIT_OK


COMMANDS = {
    "construct": cmd_construct,
    "verify-1d": cmd_verify_1d,
    "eig": cmd_eig,
    "example": cmd_example,
    "compare-kl": cmd_compare_kl,
    "green-dump": cmd_green_dump,
}


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with 'domain' and 'operator' entries")
    common.add_argument("--out-dir", default=".", help="directory for CSV/JSON outputs and the manifest")
    common.add_argument("--tol", type=float, default=None, help="primary tolerance of the command")
    common.add_argument("--seed", type=int, default=0, help="seed for random probe points")
    common.add_argument("--threads", type=int, default=1, help="worker count (results do not depend on it)")
    common.add_argument("--strict", action="store_true", help="treat Inconclusive verdicts as numerical failures")

    parser = _Parser(prog="hardy-forge", description="Optimal Hardy weights: construction and verification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("construct", parents=[common], help="sample W, v, h on an exhaustion member")
    p.add_argument("--a-fraction", type=float, default=0.0, help="a as a fraction of a_max")
    p.add_argument("--a", type=float, default=None, help="absolute a (the potential is normalised so a_max = 2)")
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--out", help="CSV path (relative to --out-dir), default weight.csv")

    p = sub.add_parser("verify-1d", parents=[common], help="optimality test for a 1D pair (w, psi)")
    p.add_argument("--w", required=True, help="weight expression in t")
    p.add_argument("--psi", required=True, help="ground state expression in t")
    p.add_argument("--interval", nargs="+", metavar="LO,HI", help="'lo,hi' or 'lo hi'; default: 0 inf")

    p = sub.add_parser("eig", parents=[common], help="lambda_0 on growing annuli (radial reduction)")
    p.add_argument("--weight", help="CSV with columns r (or x1..xn) and W")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--h", type=float, default=0.005, help="step in log r")
    p.add_argument("--a-fraction", type=float, default=0.0)
    p.add_argument("--out", help="report path (relative to --out-dir)")

    p = sub.add_parser("example", parents=[common], help="run a worked example end to end")
    p.add_argument("name", choices=["ext-ball", "half-ball", "half-space", "punctured"])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--a-fraction", type=float, default=0.5)

    p = sub.add_parser("compare-kl", parents=[common], help="exterior-ball weight comparison table")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--gamma", type=float, default=1.0)

    p = sub.add_parser("green-dump", parents=[common], help="sample the Green potential and its gradient")
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--level", type=int, default=2)
    return parser


def _versions() -> dict:
    import scipy

    return {"hardyforge": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def cli_main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    out = Path(args.out_dir)
    ctx = {"inputs": {}, "files": [], "verdicts": {}}
    error = None
    try:
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            code = COMMANDS[args.command](args, out, ctx)
    except (UsageError, ConfigError, ParameterError, ExpressionError, KernelUnavailableError, GridError) as exc:
        code, error = EXIT_USAGE, f"{type(exc).__name__}: {exc}"
    except (EigenSolverError, SingularSystemError, QuadratureError, LevelSetError, FloatingPointError) as exc:
        code, error = EXIT_NUMERIC, f"{type(exc).__name__}: {exc}"
    if error:
        print(error, file=sys.stderr)
    manifest = {
        "schema": SCHEMA,
        "command": args.command,
        "argv": argv,
        "seed": args.seed,
        "threads": args.threads,
        "tol": args.tol,
        "strict": args.strict,
        "csv_float_format": CSV_FORMAT,
        "inputs": ctx["inputs"],
        "versions": _versions(),
        "verdicts": ctx["verdicts"],
        "files": ctx["files"],
        "exit_code": code,
        "error": error,
    }
    try:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    except OSError as exc:
        print(f"could not write manifest: {exc}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
