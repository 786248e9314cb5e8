"""CSV readers for the evaluation artifacts.

The readers are strict about schemas: a missing column raises a
``SchemaError`` naming the column, so a panel produced by a different
pipeline version fails loudly instead of rendering nonsense.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

PANEL_COLUMNS = ("timestamp", "symbol", "method", "decision_loss",
                 "net_return", "turnover", "total_cost", "constraint_bound",
                 "kappa", "solver_status")
CALIBRATION_COLUMNS = ("timestamp", "method", "pit", "prob_up", "outcome_up")
DRIFT_COLUMNS = ("timestamp", "z")


class SchemaError(ValueError):
    def __init__(self, path, missing):
        super().__init__(f"{path}: missing required column(s) "
                         f"{', '.join(sorted(missing))}")
        self.missing = sorted(missing)


def _read(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = set(required) - set(fields)
        if missing:
            raise SchemaError(path, missing)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


@dataclass(frozen=True)
class Panel:
    timestamp: np.ndarray
    method: np.ndarray
    decision_loss: np.ndarray
    net_return: np.ndarray
    turnover: np.ndarray
    constraint_bound: np.ndarray
    kappa: np.ndarray

    @property
    def methods(self):
        seen = []
        for m in self.method:
            if m not in seen:
                seen.append(m)
        return seen

    def for_method(self, name):
        mask = self.method == name
        return (self.timestamp[mask], self.decision_loss[mask],
                self.net_return[mask], self.turnover[mask],
                self.constraint_bound[mask], self.kappa[mask])


def read_panel(path) -> Panel:
    rows = _read(path, PANEL_COLUMNS)
    return Panel(
        timestamp=np.array([int(r["timestamp"]) for r in rows]),
        method=np.array([r["method"] for r in rows]),
        decision_loss=np.array([float(r["decision_loss"]) for r in rows]),
        net_return=np.array([float(r["net_return"]) for r in rows]),
        turnover=np.array([float(r["turnover"]) for r in rows]),
        constraint_bound=np.array([r["constraint_bound"] == "true"
                                   for r in rows]),
        kappa=np.array([float(r["kappa"]) for r in rows]),
    )


@dataclass(frozen=True)
class CalibrationSample:
    timestamp: np.ndarray
    method: np.ndarray
    prob_up: np.ndarray
    outcome_up: np.ndarray


def read_calibration(path) -> CalibrationSample:
    rows = _read(path, CALIBRATION_COLUMNS)
    return CalibrationSample(
        timestamp=np.array([int(r["timestamp"]) for r in rows]),
        method=np.array([r["method"] for r in rows]),
        prob_up=np.array([float(r["prob_up"]) for r in rows]),
        outcome_up=np.array([int(r["outcome_up"]) for r in rows]),
    )


def read_drift(path):
    rows = _read(path, DRIFT_COLUMNS)
    ts = np.array([int(r["timestamp"]) for r in rows])
    z = np.array([float(r["z"]) if r["z"] != "nan" else np.nan for r in rows])
    return ts, z
