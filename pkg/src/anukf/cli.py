"""Command-line entry points: simulate, train, run.

Exit code 0 on success; on failure a machine-readable JSON error object is
printed to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import bench
from .config import load_config
from .errors import AnukfError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anukf",
        description="INS/DVL sensor-fusion benchmark driver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write corrupted CSV tracks")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)

    train = sub.add_parser("train", help="train the noise regressors")
    train.add_argument("--config", required=True)
    train.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run the Monte Carlo comparison")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--filters", help="comma-separated subset, e.g. ukf,anukf")
    run.add_argument("--mc-runs", type=int, dest="mc_runs")
    run.add_argument("--outage-start", type=float, dest="outage_start")
    run.add_argument("--outage-duration", type=float, dest="outage_duration")
    run.add_argument("--seed", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "simulate":
            written = bench.simulate_command(config, args.out)
            for path in written:
                print(path)
        elif args.command == "train":
            result = bench.train_command(config, args.out)
            print(result["acc_weights"])
            print(result["gyro_weights"])
        else:
            if args.filters:
                config = replace(config, filters=tuple(args.filters.split(",")))
            if args.mc_runs is not None:
                config = replace(config, mc_runs=args.mc_runs)
            if args.seed is not None:
                config = replace(config, seed=args.seed)
            if args.outage_start is not None or args.outage_duration is not None:
                if args.outage_start is None or args.outage_duration is None:
                    raise AnukfError(
                        "--outage-start and --outage-duration must be given together"
                    )
                config = replace(
                    config, outage=(args.outage_start, args.outage_duration)
                )
            summary = bench.run_experiment(config, args.out)
            for (track, kind), values in summary.items():
                print(
                    f"{track:>10s} {kind:>6s}  vrmse={values['vrmse']:.6f}"
                    f"  mrmse={values['mrmse']:.6f}"
                )
    except AnukfError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except OSError as exc:
        json.dump({"error": "OSError", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
