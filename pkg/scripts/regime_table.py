"""Blowup-time sandwich across s and both certified regimes.

Prints one row per (s, J0/d) run: regime, T_lower, T_num, T_upper, the
terminal log-log slope and any failed verification checks.

    python scripts/regime_table.py configs/flagship.toml --s 0 1 2 --ratio -1 0.5
"""
import argparse
import csv
import sys

from ppblowup.config import load_config
from ppblowup.experiment import sweep_row


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("config")
    ap.add_argument("--s", type=float, nargs="+", default=[0.0, 1.0, 2.0])
    ap.add_argument("--ratio", type=float, nargs="+", default=[-1.0, 0.5], help="J(u0)/d targets")
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args()

    config = load_config(args.config)
    rows = []
    print(f"{'s':>4} {'J0/d':>6} {'regime':>18} {'T_lower':>11} {'T_num':>13} {'T_upper':>11} {'slope':>8}  failed")
    for s in args.s:
        for ratio in args.ratio:
            row = sweep_row(config, {"s": s, "J_ratio": ratio})
            rows.append(row)
            if row["error"]:
                print(f"{s:4g} {ratio:6g}  error: {row['error']}")
                continue
            slope = f"{row['slope']:8.4f}" if row["slope"] is not None else " " * 8
            print(f"{s:4g} {ratio:6g} {row['regime']:>18} {row['T_lower']:11.5g} {row['T_num']:13.8g} "
                  f"{row['T_upper']:11.5g} {slope}  {row['failed'] or '-'}", flush=True)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0 if all(not r["error"] and not r["failed"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
