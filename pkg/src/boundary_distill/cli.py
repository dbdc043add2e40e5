"""Command-line interface: split / run / sweep / report.

Thin argparse layer over the protocol module. Output directory resolution:
--out flag, then the config's out_dir, then $BD_OUT_DIR, then ./runs.
Exit codes: 0 when everything requested completed, 1 when any run failed,
2 for configuration/usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, apply_overrides, dump_config, load_config
from .data import compute_norm_stats, save_csv
from .protocol import (
    STRATEGIES,
    PhaseContext,
    run_benchmark,
    run_phase_boundary_distill,
    standardized_benchmark,
    train_base,
)
from .reporting import (
    export_boundary_grid,
    export_report,
    read_record_csv,
    write_manifest,
)
from .seeding import derive_seed

SWEEP_KNOBS = ("delta", "lambda")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boundary-distill",
        description="Instance-incremental learning experiments: boundary-aware "
        "distillation with teacher consolidation, plus baselines.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_split = sub.add_parser("split", help="materialize benchmark splits as CSV files")
    _common_flags(p_split)
    p_split.set_defaults(handler=cmd_split)

    p_run = sub.add_parser("run", help="run the strategy x seed matrix")
    _common_flags(p_run)
    p_run.add_argument(
        "--strategy",
        action="append",
        help=f"strategy to run (repeatable); one of {STRATEGIES} or 'all'",
    )
    p_run.add_argument("--parallel", type=int, default=1, metavar="N",
                       help="run up to N cells in parallel processes")
    p_run.set_defaults(handler=cmd_run)

    p_sweep = sub.add_parser("sweep", help="phase-1 sensitivity sweep over one knob")
    _common_flags(p_sweep)
    p_sweep.add_argument("--knob", choices=SWEEP_KNOBS, required=True,
                         help="which knob to sweep: noise scale or loss weight")
    p_sweep.add_argument("--values", help="comma-separated values (default: config grid)")
    p_sweep.add_argument("--parallel", type=int, default=1, metavar="N")
    p_sweep.set_defaults(handler=cmd_sweep)

    p_report = sub.add_parser("report", help="aggregate run records into summary files")
    p_report.add_argument("results_dir", help="directory holding record CSVs")
    p_report.set_defaults(handler=cmd_report)

    return parser


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", action="append", type=int,
                        help="seed override (repeatable; replaces the config list)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the resolved configuration and plan, then exit")


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes: dict[str, object] = {}
    if getattr(args, "seed", None):
        changes["seeds"] = tuple(args.seed)
    if getattr(args, "out", None):
        changes["out_dir"] = args.out
    strategies = getattr(args, "strategy", None)
    if strategies:
        resolved: list[str] = []
        for s in strategies:
            if s == "all":
                resolved.extend(STRATEGIES)
            elif s in STRATEGIES:
                resolved.append(s)
            else:
                raise ConfigError(f"unknown strategy {s!r}; pick from {STRATEGIES} or 'all'")
        changes["strategies"] = tuple(dict.fromkeys(resolved))
    if changes:
        config = apply_overrides(config, **changes)
    for s in config.strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r} in config; pick from {STRATEGIES}")
    return config


def _out_dir(config: ExperimentConfig) -> Path:
    return Path(config.out_dir or os.environ.get("BD_OUT_DIR") or "runs")


# --- split ------------------------------------------------------------------


def cmd_split(args: argparse.Namespace) -> int:
    config = _load(args)
    seed = config.seeds[0]
    out = _out_dir(config) / "splits"
    if args.dry_run:
        print(dump_config(config), end="")
        print(f"# plan: write base/phase/test CSVs for seed {seed} under {out}")
        return 0
    bench = config.build_benchmark(seed)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(bench.base, str(out / "base.csv"))
    for t, phase in enumerate(bench.phases, start=1):
        save_csv(phase, str(out / f"phase_{t:02d}.csv"))
    save_csv(bench.test, str(out / "test.csv"))
    write_manifest(
        out / "split_manifest.txt",
        {
            "seed": seed,
            "source": config.data_source,
            "num_classes": bench.num_classes,
            "num_phases": bench.num_phases,
            "base_size": len(bench.base),
            "phase_sizes": ",".join(str(len(p)) for p in bench.phases),
            "test_size": len(bench.test),
            "version": __version__,
        },
    )
    print(f"wrote {2 + bench.num_phases} split files to {out}")
    return 0


# --- run --------------------------------------------------------------------


def _run_cell(config: ExperimentConfig, strategy: str, seed: int, out_str: str) -> dict:
    """One (strategy, seed) run; executed possibly in a worker process."""
    out = Path(out_str)
    try:
        bench = config.build_benchmark(seed)
        run_cfg = config.run_config(strategy, seed)
        results, record = run_benchmark(bench, run_cfg, out_dir=out / "records")
        if bench.base.dim == 2:
            model_space, _ = standardized_benchmark(bench)
            feats = model_space.test.features
            pad = 0.1 * (feats.max(axis=0) - feats.min(axis=0))
            lo, hi = feats.min(axis=0) - pad, feats.max(axis=0) + pad
            grid_dir = out / "grids"
            grid_dir.mkdir(parents=True, exist_ok=True)
            spec = run_cfg.network_spec(bench.base.dim, bench.num_classes)
            for res in results:
                export_boundary_grid(
                    res.model,
                    spec,
                    (float(lo[0]), float(hi[0])),
                    (float(lo[1]), float(hi[1])),
                    config.grid_resolution,
                    path=grid_dir / f"{strategy}_seed{seed}_phase{res.phase_index:02d}.csv",
                )
        return {
            "strategy": strategy,
            "seed": seed,
            "status": "ok",
            "pp": record.pp,
            "forgetting": record.forgetting,
        }
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the matrix
        return {
            "strategy": strategy,
            "seed": seed,
            "status": "failed",
            "error": f"{type(exc).__name__}: {exc}",
            "trace": traceback.format_exc(),
        }


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    out = _out_dir(config)
    cells = [(s, seed) for s in config.strategies for seed in config.seeds]
    if args.dry_run:
        print(dump_config(config), end="")
        print(f"# plan: {len(cells)} run(s) -> {out}")
        for strategy, seed in cells:
            print(f"#   {strategy} seed={seed}")
        return 0

    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(dump_config(config))

    outcomes = _map_cells(
        _run_cell,
        [(config, s, seed, str(out)) for s, seed in cells],
        args.parallel,
    )

    failed = [o for o in outcomes if o["status"] != "ok"]
    for o in outcomes:
        if o["status"] == "ok":
            print(f"{o['strategy']} seed={o['seed']}: "
                  f"pp={100 * o['pp']:+.2f}pp forgetting={100 * o['forgetting']:+.2f}pp")
        else:
            print(f"{o['strategy']} seed={o['seed']}: FAILED ({o['error']})", file=sys.stderr)
            print(o["trace"], file=sys.stderr)

    write_manifest(
        out / "manifest.txt",
        {
            "version": __version__,
            "numpy": np.__version__,
            "config": "config.resolved",
            "cells": ",".join(f"{s}:{seed}" for s, seed in cells),
            "completed": len(outcomes) - len(failed),
            "failed": len(failed),
            "status": "ok" if not failed else "failed",
        },
    )
    return 0 if not failed else 1


def _map_cells(worker, argtuples: list[tuple], parallel: int) -> list[dict]:
    if parallel and parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(worker, *zip(*argtuples)))
    return [worker(*a) for a in argtuples]


# --- sweep ------------------------------------------------------------------


def _sweep_cell(config: ExperimentConfig, knob: str, value: float, seed: int) -> dict:
    """Phase-1-only sensitivity run for one (value, seed)."""
    try:
        bench = config.build_benchmark(seed)
        run_cfg = config.run_config("boundary_distill", seed)
        if knob == "delta":
            run_cfg = replace(run_cfg, noise=replace(run_cfg.noise, delta=value))
        else:
            run_cfg = replace(run_cfg, distill_weight=value)
        model_space, _ = standardized_benchmark(bench)
        stats = compute_norm_stats(model_space.base)
        spec = run_cfg.network_spec(model_space.base.dim, model_space.num_classes)
        base_model = train_base(model_space, run_cfg)
        ctx = PhaseContext(
            spec,
            stats,
            model_space.test,
            model_space.base,
            1,
            derive_seed(run_cfg.seed, "phase", 1),
        )
        res = run_phase_boundary_distill(base_model, model_space.phases[0], run_cfg, ctx)
        return {
            "status": "ok",
            "knob": knob,
            "value": value,
            "seed": seed,
            "acc_student": res.student_acc_test,
            "acc_teacher": res.acc_test,
        }
    except Exception as exc:  # noqa: BLE001
        return {"status": "failed", "knob": knob, "value": value, "seed": seed,
                "error": f"{type(exc).__name__}: {exc}", "trace": traceback.format_exc()}


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    out = _out_dir(config)
    if args.values:
        values = tuple(float(v) for v in args.values.split(",") if v.strip())
    else:
        values = config.grid_delta if args.knob == "delta" else config.grid_lambda
    if not values:
        raise ConfigError("no sweep values given")
    cells = [(value, seed) for value in values for seed in config.seeds]
    if args.dry_run:
        print(dump_config(config), end="")
        print(f"# plan: sweep {args.knob} over {list(values)} x seeds {list(config.seeds)} -> {out}")
        return 0

    out.mkdir(parents=True, exist_ok=True)
    outcomes = _map_cells(
        _sweep_cell,
        [(config, args.knob, value, seed) for value, seed in cells],
        args.parallel,
    )
    failed = [o for o in outcomes if o["status"] != "ok"]
    for o in failed:
        print(f"sweep {args.knob}={o['value']} seed={o['seed']}: FAILED ({o['error']})",
              file=sys.stderr)
        print(o["trace"], file=sys.stderr)

    ok = [o for o in outcomes if o["status"] == "ok"]
    detail_path = out / f"sweep_{args.knob}.csv"
    lines = ["knob,value,seed,acc_student,acc_teacher"]
    for o in ok:
        lines.append(
            f"{o['knob']},{o['value']!r},{o['seed']},{o['acc_student']!r},{o['acc_teacher']!r}"
        )
    detail_path.write_text("\n".join(lines) + "\n")

    summary_path = out / f"sweep_{args.knob}_summary.csv"
    lines = ["knob,value,n_seeds,acc_student_median,acc_teacher_median,acc_student_median_pct"]
    for value in values:
        group = [o for o in ok if o["value"] == value]
        if not group:
            continue
        med_s = float(np.median([o["acc_student"] for o in group]))
        med_t = float(np.median([o["acc_teacher"] for o in group]))
        lines.append(f"{args.knob},{value!r},{len(group)},{med_s!r},{med_t!r},{100 * med_s:.2f}")
    summary_path.write_text("\n".join(lines) + "\n")

    print(f"wrote {detail_path} and {summary_path}")
    return 0 if not failed else 1


# --- report -----------------------------------------------------------------


def cmd_report(args: argparse.Namespace) -> int:
    results_dir = Path(args.results_dir)
    if not results_dir.exists():
        print(f"error: {results_dir} does not exist", file=sys.stderr)
        return 2
    candidates = sorted((results_dir / "records").glob("record_*.csv")) or sorted(
        results_dir.glob("record_*.csv")
    )
    if not candidates:
        print(f"error: no record_*.csv files under {results_dir}", file=sys.stderr)
        return 2
    records = [read_record_csv(p) for p in candidates]
    paths = export_report(records, results_dir / "report")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
