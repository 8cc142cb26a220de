"""Command-line front end for the benchmark scenarios.

Subcommands: reach | mpc | mhe | verify. Each emits one JSON document
(stdout, and a file under --out when given) plus a flat CSV of bench
records. Exit codes: 0 success, 2 solver non-convergence, 3 soundness
violation, 64 bad usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .admm import AdmmSettings
from .reach import REACH_METHODS, ReachDims, predict_complexity
from .scenarios import (
    corridor_mpc_scenario,
    run_mhe_simulation,
    run_mpc_closed_loop,
    run_mpc_open_loop,
    run_safety_scenario,
    safety_scenario,
    second_order_scenario,
)

EXIT_OK = 0
EXIT_NO_CONVERGENCE = 2
EXIT_SOUNDNESS = 3
EXIT_USAGE = 64


@dataclass
class BenchRecord:
    """One row of the benchmark table."""

    scenario: str
    method: str
    N: int
    n_g: int
    n_c: int
    nnz_g: int
    nnz_a: int
    nnz_m: int
    iterations: int
    wall_ms: float
    status: str


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _add_common(parser):
    parser.add_argument("--n", type=int, default=None, help="horizon / step-count override")
    parser.add_argument("--f", type=_positive_int, default=1, help="scenario scaling factor")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--eps-primal", type=float, default=0.01)
    parser.add_argument("--eps-dual", type=float, default=0.01)
    parser.add_argument("--rho", type=float, default=1.0)
    parser.add_argument("--k-inf", type=int, default=10)
    parser.add_argument("--max-iter", type=int, default=5000)
    parser.add_argument("--norm", choices=["l2", "inf"], default="l2")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--format", choices=["json", "csv", "both"], default="json")


def _settings(args, **overrides):
    base = dict(
        rho=args.rho,
        eps_primal=args.eps_primal,
        eps_dual=args.eps_dual,
        k_inf=args.k_inf,
        max_iter=args.max_iter,
        norm=args.norm,
    )
    base.update(overrides)
    return AdmmSettings(**base)


def _settings_echo(settings: AdmmSettings):
    return {
        "rho": settings.rho,
        "eps_primal": settings.eps_primal,
        "eps_dual": settings.eps_dual,
        "k_inf": settings.k_inf,
        "max_iter": settings.max_iter,
        "norm": settings.norm,
    }


def _emit(args, name, document, records):
    document = dict(document)
    document["records"] = [asdict(r) for r in records]
    text = json.dumps(document, indent=2)
    if args.out is None:
        print(text)
        return
    args.out.mkdir(parents=True, exist_ok=True)
    if args.format in ("json", "both"):
        (args.out / f"{name}.json").write_text(text + "\n")
    if args.format in ("csv", "both"):
        path = args.out / f"{name}_records.csv"
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(BenchRecord.__dataclass_fields__))
            writer.writeheader()
            for r in records:
                writer.writerow(asdict(r))
    print(text)


# ---------------------------------------------------------------------------


def cmd_reach(args):
    horizon = 15 if args.n is None else args.n
    X0, sys = second_order_scenario()
    dims = ReachDims.of(X0, sys)
    records = []
    sets_json = {}
    counts = {}
    for method, fn in REACH_METHODS.items():
        t0 = time.perf_counter()
        sets = fn(X0, sys, horizon)
        wall = (time.perf_counter() - t0) * 1e3
        X_N = sets[-1]
        records.append(BenchRecord(
            scenario="reach2nd", method=method, N=horizon,
            n_g=X_N.n_g, n_c=X_N.n_c, nnz_g=X_N.G.nnz, nnz_a=X_N.A.nnz,
            nnz_m=0, iterations=0, wall_ms=wall, status="ok",
        ))
        sets_json[method] = X_N.to_json_dict()
        pred = predict_complexity(method, horizon, dims)
        counts[method] = {
            "nnz_g": X_N.G.nnz, "nnz_a": X_N.A.nnz,
            "n_g": X_N.n_g, "n_c": X_N.n_c,
            "predicted": asdict(pred),
        }
    sweep = []
    if args.sweep:
        for n in range(1, args.sweep + 1):
            for method, fn in REACH_METHODS.items():
                X_N = fn(X0, sys, n)[-1]
                sweep.append({"method": method, "N": n,
                              "nnz_g": X_N.G.nnz, "nnz_a": X_N.A.nnz})
    doc = {"scenario": "reach2nd", "N": horizon, "counts": counts,
           "sets": sets_json, "sweep": sweep}
    _emit(args, "reach", doc, records)
    return EXIT_OK


def cmd_mpc(args):
    settings = _settings(args)
    spec = corridor_mpc_scenario(args.f, horizon=args.n)
    t0 = time.perf_counter()
    run = run_mpc_open_loop(spec, settings)
    wall = (time.perf_counter() - t0) * 1e3
    record = BenchRecord(
        scenario="mpc-corridor", method="sparse", N=spec.N,
        n_g=run.n_g, n_c=run.n_c, nnz_g=0, nnz_a=0, nnz_m=run.nnz_m,
        iterations=run.iterations, wall_ms=wall, status=run.status,
    )
    closed = []
    if args.closed_loop:
        for status, iters, x, u in run_mpc_closed_loop(
                spec, args.closed_loop, horizon=args.horizon, settings=settings):
            closed.append({"status": status, "iterations": iters,
                           "x": x.tolist(), "u": u.tolist()})
    doc = {
        "scenario": "mpc-corridor", "f": args.f, "N": spec.N,
        "settings": _settings_echo(settings),
        "status": run.status, "iterations": run.iterations,
        "n_g": run.n_g, "n_c": run.n_c, "nnz_m": run.nnz_m,
        "objective": run.objective,
        "violations": run.violations,
        "trajectory": {
            "x": [x.tolist() for x in run.states],
            "u": [u.tolist() for u in run.inputs],
        },
        "closed_loop": closed,
    }
    _emit(args, "mpc", doc, [record])
    if run.status != "converged" or any(c["status"] != "converged" for c in closed):
        return EXIT_NO_CONVERGENCE
    if run.violations:
        return EXIT_SOUNDNESS
    return EXIT_OK


def cmd_mhe(args):
    settings = _settings(args)
    steps = 40 if args.n is None else args.n
    t0 = time.perf_counter()
    result = run_mhe_simulation(seed=args.seed, steps=steps, settings=settings,
                                zero_noise=args.zero_noise)
    wall = (time.perf_counter() - t0) * 1e3
    record = BenchRecord(
        scenario="mhe-sim", method="sparse", N=steps,
        n_g=max(s.n_g for s in result.sets), n_c=max(s.n_c for s in result.sets),
        nnz_g=0, nnz_a=0, nnz_m=0,
        iterations=int(np.sum(result.iterations)), wall_ms=wall,
        status="ok" if all(s == "converged" for s in result.statuses) else "not-converged",
    )
    doc = {
        "scenario": "mhe-sim", "seed": args.seed, "steps": steps,
        "settings": _settings_echo(settings),
        "rms": {
            "measurement_position": result.rms_meas_pos,
            "mhe_position": result.rms_mhe_pos,
            "measurement_velocity": result.rms_meas_vel,
            "mhe_velocity": result.rms_mhe_vel,
        },
        "contained": result.contained,
        "estimates": result.estimates.tolist(),
        "truth": result.truth.tolist(),
        "sets": [s.to_json_dict() for s in result.sets],
    }
    _emit(args, "mhe", doc, [record])
    if record.status != "ok":
        return EXIT_NO_CONVERGENCE
    if not all(result.contained):
        bad = [i + 1 for i, ok in enumerate(result.contained) if not ok]
        print(f"soundness violation: true state left the feasible set at steps {bad}", file=sys.stderr)
        return EXIT_SOUNDNESS
    return EXIT_OK


def cmd_verify(args):
    settings = _settings(args, k_inf=args.k_inf)
    n_steps = 20 if args.n is None else args.n
    kwargs = {"n_steps": n_steps}
    if args.obstacle:
        parts = [float(p) for p in args.obstacle.split(",")]
        if len(parts) not in (2, 3):
            raise SystemExit(EXIT_USAGE)
        kwargs["obstacle_center"] = tuple(parts[:2])
        if len(parts) == 3:
            kwargs["obstacle_inradius"] = parts[2]
    scenario = safety_scenario(**kwargs)
    t0 = time.perf_counter()
    steps = run_safety_scenario(scenario, settings)
    wall = (time.perf_counter() - t0) * 1e3
    iters = [s.iterations for s in steps if s.certified]
    histogram = {}
    for s in steps:
        if s.certified:
            histogram[s.iterations] = histogram.get(s.iterations, 0) + 1
    record = BenchRecord(
        scenario="safety", method="sparse", N=n_steps,
        n_g=0, n_c=0, nnz_g=0, nnz_a=0, nnz_m=0,
        iterations=int(np.sum([s.iterations for s in steps])), wall_ms=wall,
        status="certified" if all(s.certified for s in steps) else "not-certified",
    )
    doc = {
        "scenario": "safety", "steps": n_steps,
        "settings": _settings_echo(settings),
        "per_step": [{"step": s.step, "certified": s.certified,
                      "iterations": s.iterations} for s in steps],
        "iterations_histogram": {str(k): v for k, v in sorted(histogram.items())},
    }
    _emit(args, "verify", doc, [record])
    if not all(s.certified for s in steps):
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="conzopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_reach = sub.add_parser("reach", help="reachable-set size benchmark")
    _add_common(p_reach)
    p_reach.add_argument("--sweep", type=int, default=0, help="also sweep N=1..SWEEP")
    p_reach.set_defaults(fn=cmd_reach)

    p_mpc = sub.add_parser("mpc", help="corridor tracking benchmark")
    _add_common(p_mpc)
    p_mpc.add_argument("--closed-loop", type=int, default=0, help="simulate this many steps")
    p_mpc.add_argument("--horizon", type=int, default=None, help="receding horizon length")
    p_mpc.set_defaults(fn=cmd_mpc)

    p_mhe = sub.add_parser("mhe", help="estimation benchmark")
    _add_common(p_mhe)
    p_mhe.add_argument("--zero-noise", action="store_true")
    p_mhe.set_defaults(fn=cmd_mhe)

    p_verify = sub.add_parser("verify", help="safety certification benchmark")
    _add_common(p_verify)
    p_verify.add_argument("--obstacle", type=str, default=None,
                          help="obstacle override as CX,CY[,R]")
    # certificates are sought every iteration in this scenario
    p_verify.set_defaults(fn=cmd_verify, k_inf=1)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
