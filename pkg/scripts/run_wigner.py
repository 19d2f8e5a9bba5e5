#!/usr/bin/env python3
"""Wigner tomography of a prepared phonon state (echo parity, four phases)."""

import argparse
from pathlib import Path

from cqadsim.cli import RunManifest, run_experiment

PRESETS = Path(__file__).resolve().parent.parent / "presets"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/wigner_fock1")
    ap.add_argument("--experiment", default=str(PRESETS / "wigner_fock1.spec"))
    ap.add_argument("--jobs", type=int, default=2)
    args = ap.parse_args()
    summary = run_experiment(RunManifest(
        params_path=None,
        experiment_path=args.experiment,
        out_dir=args.out,
        jobs=args.jobs,
    ))
    print(f"W(0) = {summary['w_origin']:+.4f}  "
          f"range [{summary['w_min']:+.4f}, {summary['w_max']:+.4f}]  "
          f"interaction time {summary['interaction_time_s'] * 1e6:.3f} us")
    print(f"grid written to {args.out}/wigner.csv (beta_re, beta_im, w)")


if __name__ == "__main__":
    main()
