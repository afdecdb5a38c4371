"""Sensitivity of the extrapolated blowup time to the detection threshold.

With p = 4 the time left at H = 1e16 H(0) is below the spacing of float64
numbers near T, so such a run stops on the clock rather than on the threshold.
"""
import argparse
import dataclasses
import gc

from ppblowup.config import load_config
from ppblowup.experiment import prepare, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("config", nargs="?", default="configs/flagship.toml")
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--factors", type=float, nargs="+", default=[1e8, 1e16])
    args = ap.parse_args()

    base = load_config(args.config).with_overrides(p=args.p)
    setup = prepare(base)
    T = {}
    for bf in args.factors:
        cfg = base.replace(stepping=dataclasses.replace(base.stepping, blowup_factor=bf))
        setup.config = cfg
        tr = simulate(cfg, setup).trajectory
        T[bf] = tr.T_num
        print(f"blowup_factor {bf:8.0e}: {tr.status.value:15} steps {len(tr) - 1:9d} "
              f"max H/H0 {tr.H.max() / tr.H[0]:9.3g} T_num {tr.T_num!r} {tr.meta.get('stop_note') or ''}",
              flush=True)
        del tr
        gc.collect()
    ref = T[args.factors[0]]
    for bf, val in T.items():
        if val is not None and ref is not None:
            print(f"relative change at {bf:.0e}: {abs(val - ref) / ref:.3e}")


if __name__ == "__main__":
    main()
