import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

PRIMARY_ROOT = Path(__file__).resolve().parent.parent.parent


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory):
    """A real run directory produced by the primary pipeline CLI."""
    out = tmp_path_factory.mktemp("run")
    config = PRIMARY_ROOT / "configs" / "noise_chasing.json"
    for argv in (
        ["evaluate", "--config", str(config), "--out", str(out)],
        ["monitor", "--run", str(out), "--method", "uwc",
         "--reference", "uncalibrated"],
    ):
        proc = subprocess.run(
            [sys.executable, "-m", "frical.cli", *argv],
            cwd=PRIMARY_ROOT, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture()
def tiny_run(tmp_path):
    """Hand-built artifacts covering every figure input, no pipeline."""
    rng = np.random.default_rng(7)
    n = 400
    with open(tmp_path / "panel.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "symbol", "method", "decision_loss",
                    "net_return", "turnover", "total_cost",
                    "constraint_bound", "kappa", "solver_status"])
        for method, shift in (("uncalibrated", -2e-5), ("uwc", 2e-5)):
            for t in range(n):
                net = rng.normal(shift, 1e-3)
                w.writerow([t, "S", method, -net, net,
                            abs(rng.normal(0.05, 0.02)), 1e-5,
                            "true" if rng.random() < 0.1 else "false",
                            np.exp(rng.normal()), "optimal"])
    with open(tmp_path / "calibration.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "method", "pit", "prob_up", "outcome_up"])
        for t in range(2000):
            p = rng.uniform(0.02, 0.98)
            w.writerow([t, "uwc", rng.uniform(), p,
                        int(rng.random() < p)])
    with open(tmp_path / "drift.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "z"])
        for t in range(n):
            w.writerow([t, "nan" if t < 30 else format(rng.normal(0, 0.3), ".6g")])
    return tmp_path
