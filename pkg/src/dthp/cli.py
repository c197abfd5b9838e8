"""Command-line interface: ``dthp <command> [flags]``.

Exit status is 0 when every check passes, 1 when a check fails and 2 for
usage or configuration errors.  Every output embeds the run configuration
(JSON ``config`` key, or a ``# config:`` comment line in CSV files).  The
worker count and output paths are left out of it, so files are identical
for any ``--workers`` value.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .estimate import fit, load_sequence
from .exact import BudgetError, dp_distribution, dp_truncated, enumerate_distribution, exact_distribution
from .kernel import Kernel, KernelError, check_assumptions, load_kernel
from .limits import clt_experiment, lln_experiment, martingale_check, zeta_bound_check
from .mgf import DEFAULT_N_LIST, DEFAULT_T_GRID, build_report
from .process import simulate

__all__ = ["run", "main", "build_parser"]

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {value}")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _default_workers() -> int:
    raw = os.environ.get("DTHP_WORKERS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"DTHP_WORKERS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"DTHP_WORKERS must be a positive integer, got {raw!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dthp", description="Discrete-time Hawkes process toolkit")
    parser.add_argument("--version", action="version", version=f"dthp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, kernel=True, seed=False, out_help="output file (default: stdout)"):
        if kernel:
            p.add_argument("--kernel", required=True, metavar="JSON", help="kernel JSON file")
        if seed:
            p.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
        p.add_argument("--out", metavar="FILE", help=out_help)
        p.add_argument("--workers", type=_positive, default=None, help="worker threads (default: $DTHP_WORKERS or 1)")

    p = sub.add_parser("simulate", help="simulate one path and write the path CSV")
    common(p, seed=True)
    p.add_argument("--n", type=_positive, required=True, help="horizon")
    p.add_argument("--debug", action="store_true", help="cross-check intensities against direct convolution")

    p = sub.add_parser("exact", help="exact law of H_n as JSON")
    common(p)
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--method", choices=("auto", "enumerate", "dp", "dp_truncated"), default="auto")
    p.add_argument("--memory", type=int, default=12, help="truncation lag for dp_truncated (default 12)")

    p = sub.add_parser("limits", help="Monte Carlo limit-law checks")
    lsub = p.add_subparsers(dest="experiment", required=True)
    for name, helptext in (
        ("lln", "law of large numbers for H_n/n or Lambda_n/n"),
        ("clt", "central limit theorem for H_n or Lambda_n"),
        ("zeta", "zeta_i stays within [0, sum j beta_j]"),
        ("martingale", "E M_n = 0 and the Doob identity"),
    ):
        q = lsub.add_parser(name, help=helptext)
        common(q, seed=True)
        q.add_argument("--n", type=_positive, required=True)
        q.add_argument("--R", type=_positive, required=True, help="number of replicates")
        if name in ("lln", "clt"):
            q.add_argument("--target", choices=("process", "compensator"), default="process")
            q.add_argument("--samples-out", metavar="CSV", help="write standardized samples (column z)")

    p = sub.add_parser("mgf", help="scaled log-MGF grid with bounds")
    common(p, seed=True, out_help="report JSON (default: stdout)")
    p.add_argument("--t-grid", type=_float_list, default=list(DEFAULT_T_GRID))
    p.add_argument("--n-list", type=_int_list, default=list(DEFAULT_N_LIST))
    p.add_argument("--R", type=_positive, default=10_000, help="replicates for cells beyond the exact budget")
    p.add_argument("--csv", metavar="FILE", help="long-format CSV n,t,gamma,method,lower,upper,ok")

    p = sub.add_parser("estimate", help="maximum-likelihood kernel fit")
    common(p, kernel=False)
    p.add_argument("--data", required=True, help="0/1 per line, or a path CSV with an xi column")
    p.add_argument("--family", choices=("finite", "geometric"), default="finite")
    p.add_argument("--memory", type=int, default=1, help="lags for the finite family (default 1)")
    p.add_argument("--init", metavar="JSON", help="initial kernel JSON (default: data-driven)")
    p.add_argument("--budget", type=_positive, default=500, help="maximum coordinate sweeps")

    p = sub.add_parser("check-kernel", help="report the four summability assumptions")
    common(p)
    return parser


def _config(args: argparse.Namespace, kernel: Kernel | None, **extra) -> dict:
    skip = {"out", "workers", "samples_out", "csv", "kernel", "init", "data"}
    cfg = {"tool": "dthp", "version": __version__, "command": args.command}
    cfg.update({k: v for k, v in sorted(vars(args).items()) if k not in skip and k != "command"})
    if kernel is not None:
        cfg["kernel"] = kernel.to_dict()
    cfg.update(extra)
    return cfg


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump(obj: dict, out: str | None) -> None:
    _write(json.dumps(obj, indent=2) + "\n", out)


def _csv_comment(cfg: dict) -> str:
    return "config: " + json.dumps(cfg, separators=(",", ":"))


def _cmd_simulate(args, kernel, workers) -> int:
    path = simulate(kernel, args.n, args.seed, debug=args.debug)
    text = path.to_csv(comments=(_csv_comment(_config(args, kernel)),))
    _write(text, args.out)
    return EXIT_OK


def _cmd_exact(args, kernel, workers) -> int:
    if args.method == "enumerate":
        dist = enumerate_distribution(kernel, args.n)
    elif args.method == "dp":
        dist = dp_distribution(kernel, args.n)
    elif args.method == "dp_truncated":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            dist = dp_truncated(kernel, args.n, args.memory)
    else:
        dist = exact_distribution(kernel, args.n)
    body = dist.to_dict()
    body["config"] = _config(args, kernel)
    _dump(body, args.out)
    if dist.vacuous:
        print(f"dthp: warning: truncation bound {dist.tv_error_bound:.3g} is vacuous", file=sys.stderr)
    return EXIT_OK


def _cmd_limits(args, kernel, workers) -> int:
    exp = args.experiment
    if exp == "lln":
        report = lln_experiment(kernel, args.n, args.R, args.seed, args.target, workers)
    elif exp == "clt":
        report = clt_experiment(kernel, args.n, args.R, args.seed, args.target, workers)
    elif exp == "zeta":
        report = zeta_bound_check(kernel, args.n, args.R, args.seed)
    else:
        report = martingale_check(kernel, args.n, args.R, args.seed, workers)
    cfg = _config(args, kernel)
    body = report.to_dict()
    body["config"] = cfg
    _dump(body, args.out)
    if exp in ("lln", "clt") and args.samples_out:
        Path(args.samples_out).write_text(report.samples_csv((_csv_comment(cfg),)))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_mgf(args, kernel, workers) -> int:
    report = build_report(kernel, args.t_grid, args.n_list, args.R, args.seed, workers)
    cfg = _config(args, kernel)
    body = report.to_dict()
    body["config"] = cfg
    _dump(body, args.out)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(comments=(_csv_comment(cfg),)))
    return EXIT_OK if report.all_ok else EXIT_CHECK_FAILED


def _cmd_estimate(args, kernel, workers) -> int:
    xi = load_sequence(args.data)
    init = load_kernel(args.init) if args.init else None
    result = fit(xi, args.family, args.memory, init, args.budget)
    body = result.to_dict()
    body["config"] = _config(args, None, n_observations=int(xi.shape[0]), init=init.to_dict() if init else None)
    _dump(body, args.out)
    return EXIT_OK if result.converged else EXIT_CHECK_FAILED


def _cmd_check_kernel(args, kernel, workers) -> int:
    report = check_assumptions(kernel)
    body = report.to_dict()
    body["config"] = _config(args, kernel)
    _dump(body, args.out)
    return EXIT_OK if report.all_pass else EXIT_CHECK_FAILED


_COMMANDS = {
    "simulate": _cmd_simulate,
    "exact": _cmd_exact,
    "limits": _cmd_limits,
    "mgf": _cmd_mgf,
    "estimate": _cmd_estimate,
    "check-kernel": _cmd_check_kernel,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        workers = args.workers if args.workers is not None else _default_workers()
        kernel = load_kernel(args.kernel) if getattr(args, "kernel", None) else None
        return _COMMANDS[args.command](args, kernel, workers)
    except (UsageError, KernelError, BudgetError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"dthp: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
