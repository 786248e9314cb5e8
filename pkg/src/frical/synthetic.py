"""Deterministic synthetic market generator.

Three scenario families drive every simulation study and acceptance run:

* ``noise_chasing``: zero-signal i.i.d. returns; any trading destroys
  value through costs.
* ``regime_switching``: a two-state Markov chain moves volatility, spread
  and volume jointly (high-vol states are high-spread, thin-volume).
* ``signal_bearing``: adds a predictable AR(1) component on top of either
  friction structure; with signal strength zero it reduces bitwise to the
  matching no-signal scenario.

Randomness comes from the Philox 4x64 counter-based generator with one
documented stream per component, so a run is reproducible from (seed,
stream id) alone.  The stream ids are fixed constants recorded in run
metadata.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

RNG_ALGORITHM = "philox4x64"

# stream ids, fixed for reproducibility across runs
STREAM_RETURNS = 0
STREAM_REGIMES = 1
STREAM_VOLUME = 2
STREAM_SIGNAL = 3
STREAM_FORECAST_NOISE = 4
STREAM_BOOTSTRAP = 5
STREAM_PLACEBO = 6
STREAM_SPREAD = 7


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent generator for one component of one seeded run."""
    key = np.array([np.uint64(seed), np.uint64(stream_id)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RegimeSpec:
    """Two-state Markov friction regimes with joint vol/spread/volume moves."""

    stay_prob: tuple = (0.98, 0.95)
    vols: tuple = (0.01, 0.03)
    spreads: tuple = (1e-4, 4e-4)
    volumes: tuple = (1e4, 3e3)

    def __post_init__(self):
        for p in self.stay_prob:
            if not 0.0 <= p <= 1.0:
                raise ValueError("stay probabilities must lie in [0, 1]")
        if any(v <= 0 for v in self.vols + self.volumes):
            raise ValueError("vols and volumes must be > 0")
        if any(s < 0 for s in self.spreads):
            raise ValueError("spreads must be >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "noise_chasing"  # noise_chasing | regime_switching | signal_bearing
    length: int = 5000
    true_mean: float = 0.0
    true_sd: float = 0.02
    base_spread: float = 2e-4
    base_volume: float = 1e4
    regimes: RegimeSpec | None = None
    signal_rho: float = 0.9
    signal_strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("noise_chasing", "regime_switching",
                             "signal_bearing"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.true_sd <= 0:
            raise ValueError("true_sd must be > 0")
        if not 0.0 <= self.signal_rho < 1.0:
            raise ValueError("signal_rho must lie in [0, 1)")
        if self.kind == "regime_switching" and self.regimes is None:
            object.__setattr__(self, "regimes", RegimeSpec())


@dataclass(frozen=True)
class MarketSeries:
    """Columnar market data plus generator-side conditional moments.

    ``cond_mean[t]`` is the true conditional mean of ``returns[t + 1]``
    given time-t information (the AR signal state); it is what an informed
    simulation forecaster is allowed to see at decision time t.
    """

    returns: np.ndarray
    volatility: np.ndarray
    spread: np.ndarray
    volume: np.ndarray
    cond_mean: np.ndarray
    seed: int
    kind: str

    def __len__(self) -> int:
        return len(self.returns)

    def observation_tuple(self, t: int):
        return (t, self.returns[t], self.volatility[t], self.spread[t],
                self.volume[t])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "return", "volatility", "spread",
                             "volume"])
            for t in range(len(self)):
                writer.writerow([
                    t,
                    format(self.returns[t], ".17g"),
                    format(self.volatility[t], ".17g"),
                    format(self.spread[t], ".17g"),
                    format(self.volume[t], ".17g"),
                ])

    @classmethod
    def from_csv(cls, path) -> "MarketSeries":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"timestamp", "return", "volatility", "spread", "volume"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ValueError(
                    f"market CSV must carry columns {sorted(required)}")
            for row in reader:
                rows.append((float(row["return"]), float(row["volatility"]),
                             float(row["spread"]), float(row["volume"])))
        if not rows:
            raise ValueError("market CSV holds no rows")
        arr = np.asarray(rows)
        return cls(returns=arr[:, 0], volatility=arr[:, 1], spread=arr[:, 2],
                   volume=arr[:, 3], cond_mean=np.zeros(len(arr)), seed=-1,
                   kind="csv")


def _regime_path(spec: ScenarioSpec) -> np.ndarray:
    regimes = spec.regimes
    rng = stream(spec.seed, STREAM_REGIMES)
    draws = rng.uniform(size=spec.length)
    states = np.empty(spec.length, dtype=int)
    state = 0
    for t in range(spec.length):
        states[t] = state
        stay = regimes.stay_prob[state]
        if draws[t] >= stay:
            state = 1 - state
    return states


def generate(spec: ScenarioSpec) -> MarketSeries:
    """Generate a scenario, bitwise reproducible from its seed."""
    n = spec.length
    z = stream(spec.seed, STREAM_RETURNS).standard_normal(n)

    if spec.kind in ("noise_chasing", "signal_bearing") and spec.regimes is None:
        vols = np.full(n, spec.true_sd)
        spreads = np.full(n, spec.base_spread)
        volumes = np.full(n, spec.base_volume)
    else:
        states = _regime_path(spec)
        regimes = spec.regimes
        vols = np.asarray(regimes.vols)[states]
        spread_noise = stream(spec.seed, STREAM_SPREAD).normal(size=n)
        spreads = np.asarray(regimes.spreads)[states] * np.exp(
            0.1 * spread_noise - 0.005)
        vol_noise = stream(spec.seed, STREAM_VOLUME).normal(size=n)
        volumes = np.asarray(regimes.volumes)[states] * np.exp(
            0.5 * vol_noise - 0.125)

    signal = np.zeros(n)
    if spec.kind == "signal_bearing" and spec.signal_strength > 0.0:
        # signal innovations scale with the current regime volatility, so
        # predictable opportunity co-moves with risk (and with friction)
        xi = stream(spec.seed, STREAM_SIGNAL).standard_normal(n)
        root = np.sqrt(1.0 - spec.signal_rho ** 2)
        s = 0.0
        for t in range(n):
            s = spec.signal_rho * s + spec.signal_strength * vols[t] * root * xi[t]
            signal[t] = s

    returns = np.empty(n)
    returns[0] = spec.true_mean + vols[0] * z[0]
    for t in range(1, n):
        returns[t] = spec.true_mean + signal[t - 1] + vols[t] * z[t]

    return MarketSeries(returns=returns, volatility=vols, spread=spreads,
                        volume=volumes, cond_mean=spec.true_mean + signal,
                        seed=spec.seed, kind=spec.kind)
