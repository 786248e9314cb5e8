#!/usr/bin/env python3
"""Noise-chasing verification experiment.

Zero-signal market: any trading destroys value.  The overconfident arm
chases its own forecast noise and bleeds costs; the calibrated arm
converges to the no-trade solution.  Writes all artifacts to the output
directory and prints the report.
"""

import sys
from pathlib import Path

from frical.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(out_dir: str = "runs/noise_chasing") -> int:
    config = ROOT / "configs" / "noise_chasing.json"
    rc = main(["evaluate", "--config", str(config), "--out", out_dir])
    if rc != 0:
        return rc
    rc = main(["monitor", "--run", out_dir, "--method", "uwc",
               "--reference", "uncalibrated"])
    if rc != 0:
        return rc
    return main(["report", "--run", out_dir])


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:]))
