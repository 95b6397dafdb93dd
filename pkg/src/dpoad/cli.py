"""Command-line experiment runner."""
from __future__ import annotations

import argparse
import json
import sys

from .bench import ExperimentConfig, SyntheticSpec, emit_results, run_experiment


def _float_list(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dpoad",
        description="Benchmark private anomaly-detection release mechanisms "
                    "(laplace, painfree, dpoad) over synthetic or CSV data.",
    )
    p.add_argument("--mechanism", default="all",
                   choices=["all", "laplace", "painfree", "dpoad"])
    p.add_argument("--epsilon", type=_float_list, default=(1.0,),
                   help="comma-separated privacy budgets")
    p.add_argument("--gamma", type=_float_list, default=(0.2,),
                   help="comma-separated confidence parameters")
    p.add_argument("--threshold", type=_float_list, default=(0.9,),
                   help="comma-separated detection thresholds")
    p.add_argument("--iterations", type=int, default=6)
    p.add_argument("--seeds", type=int, default=20, help="number of trial seeds")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--bins", type=int, default=11)
    p.add_argument("--c-max", type=int, default=18)
    p.add_argument("--synthetic", action="store_true",
                   help="use the synthetic corpus (default when no --dataset)")
    p.add_argument("--dataset", default=None, help="CSV input path")
    p.add_argument("--dataset-header", action="store_true")
    p.add_argument("--window-column", type=int, default=None)
    p.add_argument("--records-per-step", type=int, default=30)
    p.add_argument("--windows", type=int, default=100, help="windows per iteration")
    p.add_argument("--steps", type=int, default=80, help="time steps per window")
    p.add_argument("--rate", type=float, default=30.0, help="benign records per step")
    p.add_argument("--anomaly-rate", type=float, default=0.05)
    p.add_argument("--magnitude", type=float, default=3.0,
                   help="anomalous value offset in benign-sigma units")
    p.add_argument("--anomaly-fraction", type=float, default=0.25,
                   help="fraction of an anomalous window's records that are anomalous")
    p.add_argument("--score-mode", default="pvalue", choices=["pvalue", "statistic"])
    p.add_argument("--combine", default="sidak-min", choices=["sidak-min", "max", "mean"])
    p.add_argument("--c-const", type=float, default=1.0)
    p.add_argument("--blend", type=float, default=0.5)
    p.add_argument("--trace-dir", default=None,
                   help="dump serialized session traces here (dpoad runs)")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--config", default=None,
                   help="JSON config file; explicit flags override its entries")
    return p


def config_from_args(args, argv) -> ExperimentConfig:
    values = vars(args).copy()
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        passed = {a.split("=")[0].lstrip("-").replace("-", "_")
                  for a in argv if a.startswith("--")}
        for key, val in file_cfg.items():
            if key not in passed:
                values[key] = tuple(val) if isinstance(val, list) else val
    if values.get("synthetic"):
        values["dataset"] = None
    spec = SyntheticSpec(
        records_per_step=values["rate"],
        anomaly_rate=values["anomaly_rate"],
        magnitude=values["magnitude"],
        anomaly_fraction=values["anomaly_fraction"],
        windows_per_iteration=values["windows"],
        steps_per_window=values["steps"],
    )
    return ExperimentConfig(
        mechanism=values["mechanism"],
        epsilons=tuple(values["epsilon"]),
        gammas=tuple(values["gamma"]),
        thresholds=tuple(values["threshold"]),
        iterations=values["iterations"],
        seeds=values["seeds"],
        seed_base=values["seed_base"],
        bins=values["bins"],
        c_max=values["c_max"],
        synthetic=spec,
        dataset=values["dataset"],
        dataset_has_header=values["dataset_header"],
        dataset_window_column=values["window_column"],
        dataset_records_per_step=values["records_per_step"],
        score_mode=values["score_mode"],
        combine=values["combine"],
        c_const=values["c_const"],
        blend=values["blend"],
        trace_dir=values["trace_dir"],
    )


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args, argv)
        rows = run_experiment(config)
        emit_results(rows, args.format, args.out)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
