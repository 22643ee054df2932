"""Command line entry point: ``bench run | bounds | estimate``.

Exit codes: 0 on success, 2 for invalid configuration or arguments, 3 for
input/output failures (unreadable or malformed files, unwritable outputs)
and 1 when a computation fails on valid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bench, crb
from .exceptions import ConfigError, SpikedTylerError
from .manifold import ManifoldPoint, MetricParams
from .model import SampleSet

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bench", description="Robust spiked covariance estimation and bounds.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run the Monte Carlo benchmark")
    r.add_argument("--config", required=True, help="INI configuration file")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--fixed-truth", action="store_true", help="use a single truth for all trials")
    r.add_argument("--workers", type=int)
    r.add_argument("--out", help="output directory (overrides [output] dir)")

    b = sub.add_parser("bounds", help="intrinsic Cramér-Rao bounds at a point")
    b.add_argument("--p", type=int, required=True)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--alpha-pp", type=float, default=1.0)
    g = b.add_mutually_exclusive_group()
    g.add_argument("--spectrum", default="iso",
                   help="'iso', comma-separated eigenvalues of Sigma, or a CSV file of them")
    g.add_argument("--point", help="directory holding U.csv and Sigma.csv")
    b.add_argument("--alpha", type=float, help="metric alpha (default: alpha_pp)")
    b.add_argument("--beta", type=float, help="metric beta (default: alpha - 1)")
    b.add_argument("--out", help="write the bound table to this CSV file")

    e = sub.add_parser("estimate", help="fit a spiked covariance to samples")
    e.add_argument("--input", required=True, help="sample CSV (header, 2p columns re/im)")
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--method", choices=("pscm", "rgd", "rtr"), default="rtr")
    e.add_argument("--dof", type=float, help="Student t dof for the matched metric (default Gaussian)")
    e.add_argument("--max-iters", type=int)
    e.add_argument("--grad-tol", type=float)
    e.add_argument("--out", default=".", help="output directory")
    return ap


def _spectrum(arg: str, k: int) -> np.ndarray:
    if arg == "iso":
        return np.ones(k)
    path = Path(arg)
    if path.exists():
        with open(path, newline="") as fh:
            vals = [float(v) for row in csv.reader(fh) for v in row if v.strip()]
    else:
        try:
            vals = [float(v) for v in arg.split(",")]
        except ValueError:
            raise ConfigError(f"spectrum {arg!r} is neither 'iso', a number list nor a file")
    if len(vals) != k:
        raise ConfigError(f"spectrum has {len(vals)} values, expected k={k}")
    return np.asarray(vals)


def cmd_run(args) -> int:
    cfg = bench.ExperimentConfig.from_ini(args.config)
    over = {}
    if args.trials is not None:
        over["trials"] = args.trials
    if args.seed is not None:
        over["seed"] = args.seed
    if args.fixed_truth:
        over["fixed_truth"] = True
    if args.workers is not None:
        over["workers"] = args.workers
    if args.out is not None:
        over["out_dir"] = args.out
    cfg = replace(cfg, **over)
    if cfg.out_dir is None:
        raise ConfigError("no output directory: pass --out or set [output] dir")
    res = bench.run_experiment(cfg)
    print(f"{len(res.records)} trial records written to {cfg.out_dir}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    p, k = args.p, args.k
    if not 1 <= k < p:
        raise ConfigError(f"need 1 <= k < p, got p={p}, k={k}")
    if args.point:
        try:
            point = bench.load_point(args.point)
        except SpikedTylerError as exc:
            raise ValueError(f"{args.point}: invalid point: {exc}") from None
        if point.U.shape != (p, k):
            raise ConfigError(f"point has shape {point.U.shape}, expected ({p}, {k})")
    else:
        s = _spectrum(args.spectrum, k)
        if np.any(s <= 0):
            raise ConfigError("spectrum must be positive")
        point = ManifoldPoint(np.eye(p, k), np.diag(s))
    if not args.alpha_pp > p / (p + 1.0):
        raise ConfigError(f"--alpha-pp must exceed p/(p+1) = {p / (p + 1.0):.6f}")
    alpha = args.alpha if args.alpha is not None else args.alpha_pp
    beta = args.beta if args.beta is not None else alpha - 1.0
    try:
        params = MetricParams(p, k, alpha, beta)
        spec = crb.FisherSpec(args.n, args.alpha_pp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    bounds = crb.all_bounds(spec, params, point)
    rows = crb.bound_rows(spec, p, k, bounds)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=crb.BOUND_CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    print(buf.getvalue(), end="")
    a, c = bounds[crb.BOUND_SUBSPACE], bounds[crb.BOUND_SUBSPACE_CLOSED]
    rel = abs(a - c) / abs(c)
    print(f"# closed-form check: {'pass' if rel < 1e-8 else 'FAIL'} (relative difference {rel:.2e})")
    if args.out:
        crb.write_bound_csv(args.out, rows)
    return EXIT_OK


def cmd_estimate(args) -> int:
    data = SampleSet.from_csv(args.input)
    p, k = data.p, args.k
    if not 1 <= k < p:
        raise ConfigError(f"need 1 <= k < p, got p={p}, k={k}")
    try:
        params = (MetricParams.student_matched(p, k, args.dof) if args.dof is not None
                  else MetricParams.gaussian(p, k))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    solver = bench._default_rgd() if args.method == "rgd" else bench._default_rtr()
    if args.max_iters is not None:
        solver = replace(solver, max_iters=args.max_iters)
    if args.grad_tol is not None:
        solver = replace(solver, grad_tol=args.grad_tol)
    point, status, iters, secs, res = bench.estimate(args.method, data, k, params, solver)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench.save_point(out, point)
    report = {"method": args.method, "p": p, "k": k, "n": data.n,
              "alpha": params.alpha, "beta": params.beta, "status": status,
              "iterations": iters, "seconds": secs,
              "cost": res.cost if res is not None else None,
              "grad_norm": res.grad_norm if res is not None else None}
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report))
    return EXIT_OK


_COMMANDS = {"run": cmd_run, "bounds": cmd_bounds, "estimate": cmd_estimate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"bench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpikedTylerError as exc:
        print(f"bench: computation failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, ValueError) as exc:
        print(f"bench: input/output error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
