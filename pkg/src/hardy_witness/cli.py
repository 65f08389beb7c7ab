"""Command-line front end.

Subcommands: optimize, certify, simulate, nogo, lhv. Exit codes:

0  success (certify: rank >= 3 witnessed)
1  internal error
2  invalid arguments or malformed input
3  certify: zero conditions not met; nogo: an instance has an entangled complement
4  certify: conditions met but success not above the threshold
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Callable, Sequence

import numpy as np

from . import io
from .hardy import (
    ProbabilityTable,
    deterministic_table,
    hardy_evaluate,
    lhv_enumerate,
    statistics_from_realization,
)
from .nogo import FAMILIES, SUPPORTED_DIMS, Classification, sweep
from .optimizer import MEASUREMENT_CLASSES, OptimizationConfig, maximize_hardy, optimal_realization
from .witness import TolerancePolicy, certify, default_flag_experiment, parse_weights, simulate_flag_experiment

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_NOT_MET = 3
EXIT_BELOW = 4
SEED_ENV = "HW_SEED"
SOURCES = ("optimum-d3", "flag", "lhv", "realization-file")
# sub-seed spawn keys for per-setting-pair sampling, indexed [i][j]
SHOT_OFFSETS = ((1, 2), (3, 4))


class UsageError(Exception):
    """Bad arguments detected after parsing."""


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _dims(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 2x3, got {text!r}") from None
    return a, b


def _emit(report: io.ReportFile, out: str | None) -> None:
    if out:
        report.write(out)


def _args_payload(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "report", "func")}


# ---------------------------------------------------------------------------


def cmd_optimize(args: argparse.Namespace) -> int:
    try:
        cfg = OptimizationConfig(
            d_a=args.da,
            d_b=args.db,
            outcomes=args.outcomes,
            restarts=args.restarts,
            seed=args.seed,
            max_outer_iters=args.max_iters,
            convergence_tol=args.tol,
            measurement_class=args.measurement_class,
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    start = time.perf_counter()
    result = maximize_hardy(cfg)
    outputs = result.as_dict()
    outputs["realization"] = io.realization_to_dict(result.realization)
    report = io.ReportFile(
        command="optimize",
        inputs_digest=io.digest(_args_payload(args)),
        outputs=outputs,
        seeds={"seed": cfg.seed, "restart_seeds": [r.seed for r in result.per_restart]},
        tolerances={"convergence_tol": cfg.convergence_tol, "max_outer_iters": cfg.max_outer_iters},
        wall_time=time.perf_counter() - start,
    )
    _emit(report, args.out)
    print(f"best_success {result.best_success:.6f}")
    print(f"residual_norm {result.residual_norm:.3e}")
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    try:
        stats = io.read_stats(args.stats)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if stats.d != 3:
        raise UsageError(f"certify needs d = 3 statistics, got d = {stats.d}")
    base = TolerancePolicy.empirical() if "shots" in stats.metadata else TolerancePolicy.exact()
    try:
        policy = TolerancePolicy(
            args.zero_eps if args.zero_eps is not None else base.zero_eps,
            args.margin if args.margin is not None else base.margin,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    verdict = certify(stats.table, policy)
    report = io.ReportFile(
        command="certify",
        inputs_digest=io.digest(_args_payload(args), {"stats": args.stats}),
        outputs={"verdict": verdict.as_dict()},
        seeds={},
        tolerances={"zero_eps": policy.zero_eps, "margin": policy.margin},
        wall_time=time.perf_counter() - start,
    )
    _emit(report, args.out)
    print(f"conditions_met {verdict.conditions_met}")
    print(f"success {verdict.success:.6f}")
    print(f"entangled {verdict.entangled}")
    print(f"rank_at_least_3 {verdict.rank_at_least_3}")
    print(f"dim_excludes {[list(p) for p in verdict.dim_excludes]}")
    if verdict.rank_at_least_3:
        return EXIT_OK
    return EXIT_BELOW if verdict.conditions_met else EXIT_NOT_MET


def sample_table(t: ProbabilityTable, shots: int, seed: int) -> ProbabilityTable:
    """Empirical frequencies from ``shots`` multinomial draws per setting pair."""
    p = np.zeros_like(t.p)
    for i in range(2):
        for j in range(2):
            rng = np.random.default_rng([seed, SHOT_OFFSETS[i][j]])
            probs = t.p[i, j].ravel()
            counts = rng.multinomial(shots, probs / probs.sum())
            p[i, j] = (counts / shots).reshape(t.d, t.d)
    return ProbabilityTable(t.d, p)


def _source_table(args: argparse.Namespace) -> tuple[ProbabilityTable, dict, dict]:
    files: dict = {}
    if args.source == "optimum-d3":
        r, _ = optimal_realization(3)
        return statistics_from_realization(r), {"source": "optimum-d3"}, files
    if args.source == "flag":
        try:
            weights = parse_weights(args.weights)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        spec, per_flag = default_flag_experiment(weights)
        meta = {
            "source": "flag",
            "weights": args.weights,
            "alice_relabel": str(spec.alice_relabel),
            "bob_relabel": str(spec.bob_relabel),
        }
        return simulate_flag_experiment(spec, per_flag), meta, files
    if args.source == "lhv":
        if args.strategy is None:
            raise UsageError("--source lhv needs --strategy a1,a2,b1,b2")
        try:
            strategy = [int(x) for x in args.strategy.split(",")]
            if len(strategy) != 4:
                raise ValueError("need four outcomes")
            table = deterministic_table(strategy, args.d)
        except ValueError as exc:
            raise UsageError(f"bad strategy {args.strategy!r}: {exc}") from None
        return table, {"source": "lhv", "strategy": args.strategy}, files
    if args.realization is None:
        raise UsageError("--source realization-file needs --realization PATH")
    try:
        r = io.read_realization(args.realization)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read realization: {exc}") from None
    files["realization"] = args.realization
    return statistics_from_realization(r), {"source": "realization-file"}, files


def cmd_simulate(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    table, meta, files = _source_table(args)
    exact = hardy_evaluate(table)
    if args.shots is not None:
        if args.shots < 1:
            raise UsageError("--shots must be positive")
        table = sample_table(table, args.shots, args.seed)
        meta.update(shots=str(args.shots), seed=str(args.seed))
    meta["kind"] = "sampled" if args.shots else "exact"
    stats = io.StatsFile(table, meta)
    if args.out:
        io.write_stats(args.out, stats)
    report = hardy_evaluate(table)
    if args.report:
        io.ReportFile(
            command="simulate",
            inputs_digest=io.digest(_args_payload(args), files),
            outputs={"hardy": report.as_dict(), "exact_hardy": exact.as_dict(), "metadata": meta},
            seeds={"seed": args.seed, "shot_offsets": SHOT_OFFSETS},
            tolerances={"eps": report.eps},
            wall_time=time.perf_counter() - start,
        ).write(args.report)
    print(f"success {report.success:.7f}")
    print(f"zero_residuals {' '.join(f'{r:.3e}' for r in report.zero_residuals)}")
    return EXIT_OK


def cmd_nogo(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    if args.dims not in SUPPORTED_DIMS:
        raise UsageError(f"dims must be one of {['%dx%d' % d for d in SUPPORTED_DIMS]}")
    if args.count < 1:
        raise UsageError("--count must be positive")
    entries = sweep(args.family, args.dims, args.count, args.seed)
    counts = {c.value: 0 for c in Classification}
    for e in entries:
        counts[e.result.classification.value] += 1
    product_gaps = [
        e.result.max_schmidt_coeff_gap for e in entries if e.result.classification is Classification.PRODUCT_ONLY
    ]
    span_dims = sorted({e.result.span_dim for e in entries})
    entangled = [e.seed for e in entries if e.entangled_complement]
    report = io.ReportFile(
        command="nogo",
        inputs_digest=io.digest(_args_payload(args)),
        outputs={
            "counts": counts,
            "span_dims": span_dims,
            "max_product_gap": max(product_gaps) if product_gaps else None,
            "entangled_complement_seeds": entangled,
            "instances": [dict(seed=e.seed, **e.result.as_dict()) for e in entries],
        },
        seeds={"seed": args.seed},
        tolerances={},
        wall_time=time.perf_counter() - start,
    )
    _emit(report, args.out)
    for name, n in counts.items():
        print(f"{name} {n}")
    print(f"span_dims {span_dims}")
    if product_gaps:
        print(f"max_product_gap {max(product_gaps):.3e}")
    return EXIT_NOT_MET if entangled else EXIT_OK


def cmd_lhv(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    results = lhv_enumerate(args.d)
    satisfying = [(s, r) for s, r in results if r.conditions_met]
    best = max((r.success for _, r in satisfying), default=0.0)
    if args.out:
        io.ReportFile(
            command="lhv",
            inputs_digest=io.digest(_args_payload(args)),
            outputs={
                "strategies": len(results),
                "satisfying": len(satisfying),
                "max_success": best,
                "satisfying_strategies": [list(s) for s, _ in satisfying],
            },
            seeds={},
            tolerances={"eps": 0.0},
            wall_time=time.perf_counter() - start,
        ).write(args.out)
    print(f"strategies {len(results)}")
    print(f"satisfying_zero_conditions {len(satisfying)}")
    print(f"max_success {best}")
    return EXIT_OK if best == 0 else EXIT_NOT_MET


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # keep argparse's exit code 2, route through main
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser(seed: int) -> argparse.ArgumentParser:
    parser = _Parser(prog="hardy-witness", description="Hardy-paradox Schmidt-rank witness toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", help="maximize the Hardy success probability")
    p.add_argument("--da", type=int, required=True)
    p.add_argument("--db", type=int, required=True)
    p.add_argument("--outcomes", type=int, required=True)
    p.add_argument("--class", dest="measurement_class", choices=MEASUREMENT_CLASSES, default="projective")
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("certify", help="Schmidt-rank verdict for a statistics file")
    p.add_argument("--stats", required=True)
    p.add_argument("--zero-eps", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="write a statistics file")
    p.add_argument("--source", choices=SOURCES, required=True)
    p.add_argument("--weights", default="1/3,1/3,1/3")
    p.add_argument("--strategy")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--realization")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("nogo", help="certificate sweep over measurement instances")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--family", choices=FAMILIES, default="generic")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out")
    p.set_defaults(func=cmd_nogo)

    p = sub.add_parser("lhv", help="enumerate deterministic local strategies")
    p.add_argument("--d", type=int, choices=(2, 3), required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lhv)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser(default_seed())
        args = parser.parse_args(argv)
        func: Callable[[argparse.Namespace], int] = args.func
        return func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
