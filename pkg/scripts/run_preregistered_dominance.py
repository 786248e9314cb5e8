#!/usr/bin/env python3
"""Pre-registered dominance experiment with the full governance suite.

Runs the frozen signal-bearing friction-rich configuration end to end:
walk-forward evaluation with the cost-sensitivity grid, the model-risk
stress grid, drift monitoring, and the final report.  Expect a few
minutes of single-threaded runtime.
"""

import sys
from pathlib import Path

from frical.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(out_dir: str = "runs/dominance") -> int:
    config = ROOT / "configs" / "dominance_prereg.json"
    for argv in (
        ["evaluate", "--config", str(config), "--out", out_dir],
        ["stress", "--run", out_dir],
        ["monitor", "--run", out_dir, "--method", "uwc",
         "--reference", "uncalibrated"],
        ["report", "--run", out_dir],
    ):
        rc = main(argv)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:]))
