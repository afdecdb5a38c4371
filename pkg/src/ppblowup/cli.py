"""Command-line entry point.

    ppblowup constants CONFIG [--out DIR]
    ppblowup simulate  CONFIG [--out DIR]
    ppblowup sweep     CONFIG [--out DIR]
    ppblowup verify    CONFIG --trajectory CSV --constants JSON [--out DIR]

Exit codes: 0 success, 1 internal error, 2 configuration error,
3 estimator or setup failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import io
from .bounds import verify_trajectory
from .config import ConfigError, ExperimentConfig, load_config
from .errors import (InsufficientWindow, MaxIterations, NoConvergence, NotSpd, OutOfRegime,
                     RegimeUnreachable)
from .experiment import SWEEP_FIELDS, constants_for, prepare, run_sweep, simulate

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_ESTIMATOR, EXIT_VERIFY = 0, 1, 2, 3, 4
OUTPUT_ENV = "PPBLOWUP_OUTPUT_DIR"

log = logging.getLogger("ppblowup")


def output_dir(config: ExperimentConfig, flag: str | None) -> Path:
    """``--out`` wins over the environment variable, which wins over the config."""
    path = Path(flag or os.environ.get(OUTPUT_ENV) or config.output.dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_constants(config: ExperimentConfig, out: Path) -> int:
    report, init = constants_for(prepare(config))
    io.write_json(report, out / "constants.json")
    log.info("regime %s  J0=%.6g  I0=%.6g  d=%.6g  C*=%.8g  C**=%.8g",
             report.regime.value, report.J0, report.I0, report.d, report.Cstar, report.Cstarstar)
    return EXIT_OK


def cmd_simulate(config: ExperimentConfig, out: Path) -> int:
    res = simulate(config)
    if config.output.json:
        io.write_json(res.constants, out / "constants.json")
        io.write_json(res.verification, out / "verification.json")
    if config.output.csv:
        io.write_trajectory_csv(res.trajectory, out / "trajectory.csv",
                                config.output.csv_dlogH, config.output.csv_dt_frac)
    summary = res.verification.summary()
    (out / "verification.txt").write_text(summary + "\n")
    traj = res.trajectory
    log.info("status %s after %d steps, T_num=%s", traj.status.value, len(traj) - 1, traj.T_num)
    print(summary)
    return EXIT_OK if res.verification.passed else EXIT_VERIFY


def cmd_sweep(config: ExperimentConfig, out: Path) -> int:
    rows = run_sweep(config)
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if v is None else v for k, v in row.items()})
    for row in rows:
        log.info("s=%s p=%s -> %s %s", row["s"], row["p"], row["status"] or "error", row["error"] or row["failed"])
    return EXIT_OK


def cmd_verify(config: ExperimentConfig, out: Path, trajectory: str, constants: str) -> int:
    try:
        traj = io.read_trajectory_csv(trajectory)
        report = io.read_constants_json(constants)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read inputs: {exc}") from None
    ver = verify_trajectory(traj, report, config.verify)
    io.write_json(ver, out / "verification.json")
    print(ver.summary())
    return EXIT_OK if ver.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppblowup", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("constants", "estimate constants and classify the initial datum"),
                        ("simulate", "run to blowup and verify against the bounds"),
                        ("sweep", "run the [sweep] grid and write a summary table"),
                        ("verify", "re-verify a stored trajectory CSV")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="TOML experiment file")
        p.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and output.dir)")
        if name == "verify":
            p.add_argument("--trajectory", required=True)
            p.add_argument("--constants", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        out = output_dir(config, args.out)
        if args.command == "constants":
            return cmd_constants(config, out)
        if args.command == "simulate":
            return cmd_simulate(config, out)
        if args.command == "sweep":
            return cmd_sweep(config, out)
        return cmd_verify(config, out, args.trajectory, args.constants)
    except (ConfigError, RegimeUnreachable) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (NoConvergence, MaxIterations, NotSpd, OutOfRegime, InsufficientWindow) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ESTIMATOR
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
