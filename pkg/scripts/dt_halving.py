"""First-order check of the discrete energy identity.

Runs the same configuration at dt0 and dt0/2 and reports the maximum energy
residual before the blowup threshold, both absolute and relative to |J(u0)|
and to the dissipated energy.
"""
import argparse
import dataclasses
import gc

import numpy as np

from ppblowup.bounds import energy_residual
from ppblowup.config import load_config
from ppblowup.experiment import prepare, simulate


def residuals(config, setup):
    res = simulate(config, setup)
    tr = res.trajectory
    pre = tr.t < tr.T_threshold if tr.T_threshold is not None else np.ones(len(tr), bool)
    rho = np.abs(energy_residual(tr)[pre])
    scale = abs(tr.J[0]) + tr.dissipation[pre]
    out = rho.max(), rho.max() / abs(tr.J[0]), (rho / scale).max(), len(tr) - 1
    del res, tr
    gc.collect()
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("config", nargs="?", default="configs/flagship.toml")
    ap.add_argument("--levels", type=int, default=2, help="number of successive halvings + 1")
    args = ap.parse_args()

    config = load_config(args.config)
    setup = prepare(config)
    prev = None
    print(f"{'dt0':>10} {'steps':>10} {'max|rho|':>12} {'/|J0|':>11} {'/(|J0|+diss)':>13} {'ratio':>7}")
    for k in range(args.levels):
        cfg = config.replace(stepping=dataclasses.replace(config.stepping, dt0=config.stepping.dt0 / 2 ** k))
        setup.config = cfg
        rho, rel, rel_d, steps = residuals(cfg, setup)
        ratio = f"{prev / rho:7.3f}" if prev else ""
        print(f"{cfg.stepping.dt0:10.3g} {steps:10d} {rho:12.4e} {rel:11.3e} {rel_d:13.3e} {ratio}", flush=True)
        prev = rho


if __name__ == "__main__":
    main()
