"""Configuration-driven command line entry point.

Subcommands: ``simulate`` (write a market CSV), ``evaluate`` (walk-forward
run producing panel/summary artifacts), ``stress`` (model-risk grid over a
completed run), ``monitor`` (drift statistic from a panel), ``report``
(human-readable tables from a summary).

All artifacts are written atomically (temp file + rename) into the output
directory together with a manifest recording the config hash, seed, RNG
algorithm, and every default in force.  Floats in CSVs are serialized at
17 significant digits; JSON floats use shortest round-trip repr.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (
    EconomicsConfig,
    EvaluationResult,
    InsufficientDataError,
    LeakageError,
    MethodSpec,
    PlaceboSpec,
    WalkForwardConfig,
    endpoints,
    regime_split,
    run_walk_forward,
)
from .forecasters import ForecasterConfig
from .friction import FeasibleSet, FrictionModel
from .governance import (
    StressScenario,
    drift_monitor,
    run_stress_grid,
    worst_case,
)
from .inference import (
    DifferentialSeries,
    bh_fdr,
    differential_report,
    maxT_fwer,
)
from .synthetic import (
    MarketSeries,
    RNG_ALGORITHM,
    RegimeSpec,
    ScenarioSpec,
    generate,
)
from .weights import DiagnosticGrid

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

PANEL_HEADER = ["timestamp", "symbol", "method", "decision_loss",
                "net_return", "turnover", "total_cost", "constraint_bound",
                "kappa", "solver_status"]


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _need(cfg: dict, field: str, kind, path: str):
    if field not in cfg:
        raise ConfigError(f"{path}{field}", "missing")
    value = cfg[field]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{path}{field}",
                          f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _opt(cfg: dict, field: str, default):
    return cfg.get(field, default)


def parse_scenario(cfg: dict) -> ScenarioSpec:
    path = "scenario."
    regimes = None
    if cfg.get("regimes") is not None:
        r = cfg["regimes"]
        regimes = RegimeSpec(
            stay_prob=tuple(_opt(r, "stay_prob", (0.98, 0.95))),
            vols=tuple(_opt(r, "vols", (0.01, 0.03))),
            spreads=tuple(_opt(r, "spreads", (1e-4, 4e-4))),
            volumes=tuple(_opt(r, "volumes", (1e4, 3e3))))
    try:
        return ScenarioSpec(
            kind=_need(cfg, "kind", str, path),
            length=_need(cfg, "length", int, path),
            true_mean=float(_opt(cfg, "true_mean", 0.0)),
            true_sd=float(_opt(cfg, "true_sd", 0.02)),
            base_spread=float(_opt(cfg, "base_spread", 2e-4)),
            base_volume=float(_opt(cfg, "base_volume", 1e4)),
            regimes=regimes,
            signal_rho=float(_opt(cfg, "signal_rho", 0.9)),
            signal_strength=float(_opt(cfg, "signal_strength", 0.0)),
            seed=int(_opt(cfg, "seed", 0)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("scenario", str(exc)) from exc


def parse_methods(items: list) -> tuple:
    methods = []
    for i, m in enumerate(items):
        path = f"methods[{i}]."
        f = _need(m, "forecaster", dict, path)
        try:
            fc = ForecasterConfig(
                kind=_need(f, "kind", str, path + "forecaster."),
                window=int(_opt(f, "window", 500)),
                ewma_lambda=float(_opt(f, "ewma_lambda", 0.94)),
                innovation=_opt(f, "innovation", "gaussian"),
                t_dof=float(_opt(f, "t_dof", 5.0)),
                shrink=float(_opt(f, "shrink", 1.0)),
                bias_scale=float(_opt(f, "bias_scale", 0.0)))
            methods.append(MethodSpec(
                name=_need(m, "name", str, path),
                forecaster=fc,
                calibration=_opt(m, "calibration", "identity"),
                warp_lambda=float(_opt(m, "warp_lambda", 1e-4)),
                tail_boost=bool(_opt(m, "tail_boost", False))))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(path.rstrip("."), str(exc)) from exc
    if len({m.name for m in methods}) != len(methods):
        raise ConfigError("methods", "method names must be unique")
    return tuple(methods)


class RunConfig:
    """Validated run configuration (one data source, seed mandatory)."""

    def __init__(self, raw: dict):
        self.raw = raw
        if "seed" not in raw:
            raise ConfigError("seed", "missing")
        self.seed = int(raw["seed"])
        has_scenario = raw.get("scenario") is not None
        has_csv = raw.get("market_csv") is not None
        if has_scenario == has_csv:
            raise ConfigError(
                "scenario/market_csv",
                "exactly one data source must be configured")
        self.scenario = parse_scenario(raw["scenario"]) if has_scenario else None
        self.market_csv = raw.get("market_csv")
        self.symbol = _opt(raw, "symbol", "SYN")

        wf = _need(raw, "walk_forward", dict, "") if "walk_forward" in raw else {}
        methods = parse_methods(_need(raw, "methods", list, "")) \
            if "methods" in raw else ()
        hyper = _opt(raw, "hyper_grid", {})
        try:
            self.walk_forward = WalkForwardConfig(
                t_train=int(_opt(wf, "t_train", 1000)),
                t_val=int(_opt(wf, "t_val", 300)),
                t_test=int(_opt(wf, "t_test", 1000)),
                embargo=int(_opt(wf, "embargo", 1)),
                horizon=int(_opt(wf, "horizon", 1)),
                refit=_opt(wf, "refit", "rolling"),
                t_calib=wf.get("t_calib", 1000),
                methods=methods,
                warp_lambda_grid=tuple(_opt(hyper, "warp_lambda", ())),
                ewma_lambda_grid=tuple(_opt(hyper, "ewma_lambda", ())),
            ) if methods else None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("walk_forward", str(exc)) from exc

        econ = _opt(raw, "economics", {})
        fr = _opt(raw, "friction", {})
        fs = _opt(raw, "feasible", {})
        try:
            friction = FrictionModel(
                fee_rate=float(_opt(fr, "fee_rate", 0.0)),
                spread_rate=fr.get("spread_rate"),
                impact_kind=_opt(fr, "impact_kind", "none"),
                impact_coeff=float(_opt(fr, "impact_coeff", 0.0)),
                cost_multiplier=float(_opt(fr, "cost_multiplier", 1.0)))
            feasible = FeasibleSet(
                budget=bool(_opt(fs, "budget", False)),
                lower=float(_opt(fs, "lower", -np.inf)),
                upper=float(_opt(fs, "upper", np.inf)),
                turnover_cap=float(_opt(fs, "turnover_cap", np.inf)),
                leverage_cap=float(_opt(fs, "leverage_cap", np.inf)),
                participation_cap=fs.get("participation_cap"))
            self.economics = EconomicsConfig(
                gamma=float(_opt(econ, "gamma", 2.0)),
                friction=friction,
                feasible=feasible,
                utility=_opt(econ, "utility", "linear"),
                ce_gamma=float(_opt(econ, "ce_gamma", 0.0)),
                periods_per_year=float(_opt(econ, "periods_per_year", 98_280)),
                kappa_window=int(_opt(econ, "kappa_window", 500)),
                grid=DiagnosticGrid(points=tuple(
                    _opt(econ, "diagnostic_levels",
                         DiagnosticGrid().points))))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("economics/friction/feasible", str(exc)) from exc

        self.cost_grid = list(_opt(raw, "cost_grid", []))
        inf = _opt(raw, "inference", {})
        self.reference_method = _opt(inf, "reference_method", None)
        self.n_boot = int(_opt(inf, "n_boot", 2000))
        self.block_length = inf.get("block_length")
        self.bandwidth = inf.get("bandwidth")
        self.fdr_q = float(_opt(inf, "fdr_q", 0.05))

        pl = raw.get("placebo")
        self.placebo = None
        if pl is not None:
            try:
                self.placebo = PlaceboSpec(mode=_need(pl, "mode", str, "placebo."),
                                           shift=int(_opt(pl, "shift", 0)),
                                           seed=int(_opt(pl, "seed", 0)))
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError("placebo", str(exc)) from exc
        self.stress_method = _opt(raw, "stress_method", None)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# atomic artifact writing
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, write_fn) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(tmp, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_panel_csv(path: Path, result: EvaluationResult) -> None:
    def write(fh):
        w = csv.writer(fh)
        w.writerow(PANEL_HEADER)
        for r in result.rows:
            w.writerow([r.timestamp, r.symbol, r.method,
                        _fmt(r.decision_loss), _fmt(r.net_return),
                        _fmt(r.turnover), _fmt(r.total_cost),
                        _fmt(r.constraint_bound), _fmt(r.kappa),
                        r.solver_status])
    _atomic_write(path, write)


def write_calibration_csv(path: Path, result: EvaluationResult) -> None:
    def write(fh):
        w = csv.writer(fh)
        w.writerow(["timestamp", "method", "pit", "prob_up", "outcome_up"])
        for r in result.calibration_rows:
            w.writerow([r["timestamp"], r["method"], _fmt(r["pit"]),
                        _fmt(r["prob_up"]), r["outcome_up"]])
    _atomic_write(path, write)


def write_json(path: Path, payload: dict) -> None:
    def write(fh):
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    _atomic_write(path, write)


def write_jsonl(path: Path, records: list) -> None:
    def write(fh):
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _atomic_write(path, write)


def _sanitize(obj):
    """JSON-safe copies: numpy scalars to python, non-finite to strings."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "NaN"
        if np.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def design_defaults() -> dict:
    from .calibration import DEFAULT_PENALTY, MIN_UWC_WINDOW, WARP_KNOTS
    from .governance import DRIFT_PERSISTENCE, DRIFT_THRESHOLD, DRIFT_WINDOW
    return {
        "rng_algorithm": RNG_ALGORITHM,
        "quantile_grid_levels": 99,
        "warp_knots": list(WARP_KNOTS),
        "warp_penalty_lambda": DEFAULT_PENALTY,
        "min_uwc_window": MIN_UWC_WINDOW,
        "diagnostic_levels": list(DiagnosticGrid().points),
        "drift_window": DRIFT_WINDOW,
        "drift_threshold": DRIFT_THRESHOLD,
        "drift_persistence": DRIFT_PERSISTENCE,
        "block_length_rule": "max(horizon, ceil(T^(1/3)))",
        "hac_bandwidth_rule": "floor(4*(T/100)^(2/9))",
        "relaxed_feasible_set": "turnover cap dropped, budget and bounds kept",
    }


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def _load_market(config: RunConfig, out_dir: Path | None = None) -> MarketSeries:
    if config.scenario is not None:
        market = generate(config.scenario)
        if out_dir is not None:
            _atomic_write(out_dir / "market.csv",
                          lambda fh: _market_rows(fh, market))
        return market
    path = Path(config.market_csv)
    if not path.exists():
        raise FileNotFoundError(f"market CSV not found: {path}")
    return MarketSeries.from_csv(path)


def _market_rows(fh, market: MarketSeries) -> None:
    w = csv.writer(fh)
    w.writerow(["timestamp", "return", "volatility", "spread", "volume"])
    for t in range(len(market)):
        w.writerow([t, _fmt(market.returns[t]), _fmt(market.volatility[t]),
                    _fmt(market.spread[t]), _fmt(market.volume[t])])


def _summarize(config: RunConfig, result: EvaluationResult) -> dict:
    econ = config.economics
    methods = [m.name for m in config.walk_forward.methods]
    summary = {"methods": {}, "differentials": [], "regimes": {}}
    for name in methods:
        summary["methods"][name] = endpoints(
            result, name, econ.periods_per_year).to_dict()

    reference = config.reference_method or methods[0]
    if reference not in methods:
        raise ConfigError("inference.reference_method",
                          f"unknown method {reference!r}")
    series = []
    names = []
    for name in methods:
        if name == reference:
            continue
        d = result.losses(name) - result.losses(reference)
        series.append(d)
        names.append(name)
        rep = differential_report(
            DifferentialSeries(d, name, reference),
            horizon=config.walk_forward.horizon,
            block_length=config.block_length, n_boot=config.n_boot,
            seed=config.seed, bandwidth=config.bandwidth)
        summary["differentials"].append(rep.to_dict())
    if series:
        from .inference import default_block_length
        b = config.block_length or default_block_length(
            len(series[0]), config.walk_forward.horizon)
        adj = maxT_fwer(series, b, n_boot=min(config.n_boot, 1000),
                        seed=config.seed, bandwidth=config.bandwidth)
        rejected = bh_fdr(np.array([r["one_sided_p"]
                                    for r in summary["differentials"]]),
                          config.fdr_q)
        for rec, a, rej in zip(summary["differentials"], adj, rejected):
            rec["adjusted_p"] = float(a)
            rec["bh_rejected"] = bool(rej)
        for name in names:
            summary["regimes"][name] = {
                "reference": reference,
                "split": asdict(regime_split(result, name, reference)),
            }
    summary["reference"] = reference
    return summary


def stage_evaluate(config: RunConfig, out_dir: Path) -> dict:
    market = _load_market(config, out_dir)
    if config.walk_forward is None:
        raise ConfigError("walk_forward/methods", "missing for evaluate")
    result = run_walk_forward(market, config.walk_forward, config.economics,
                              seed=config.seed, symbol=config.symbol,
                              placebo=config.placebo)
    if not result.rows:
        raise InsufficientDataError("evaluation produced an empty panel")
    write_panel_csv(out_dir / "panel.csv", result)
    write_calibration_csv(out_dir / "calibration.csv", result)
    write_jsonl(out_dir / "solver_log.jsonl", _sanitize(result.solver_log))
    summary = _summarize(config, result)
    summary["calibration_fits"] = _sanitize(result.calibration_fits)

    if config.cost_grid:
        grid_out = []
        for mult in config.cost_grid:
            econ_m = EconomicsConfig(
                gamma=config.economics.gamma,
                friction=config.economics.friction.with_multiplier(mult),
                feasible=config.economics.feasible,
                utility=config.economics.utility,
                ce_gamma=config.economics.ce_gamma,
                periods_per_year=config.economics.periods_per_year,
                kappa_window=config.economics.kappa_window,
                grid=config.economics.grid)
            res_m = run_walk_forward(market, config.walk_forward, econ_m,
                                     seed=config.seed, symbol=config.symbol,
                                     placebo=config.placebo)
            grid_out.append({
                "cost_multiplier": mult,
                "methods": {m.name: endpoints(
                    res_m, m.name,
                    config.economics.periods_per_year).to_dict()
                    for m in config.walk_forward.methods},
            })
        summary["cost_grid"] = grid_out

    summary["config_sha256"] = config.config_hash()
    summary["seed"] = config.seed
    summary["symbol"] = config.symbol
    summary["placebo"] = None if config.placebo is None else asdict(config.placebo)
    write_json(out_dir / "summary.json", _sanitize(summary))
    return summary


def stress_method_name(config: RunConfig) -> str:
    if config.stress_method:
        return config.stress_method
    for m in config.walk_forward.methods:
        if m.calibration == "uwc":
            return m.name
    return config.walk_forward.methods[0].name


def stage_stress(config: RunConfig, out_dir: Path) -> list:
    market = _load_market(config)
    target = stress_method_name(config)

    def run_mean_loss(scenario: StressScenario) -> float:
        res = run_walk_forward(market, config.walk_forward, config.economics,
                               seed=config.seed, symbol=config.symbol,
                               stress=None if scenario.is_identity else scenario)
        return float(np.mean(res.losses(target)))

    results = run_stress_grid(run_mean_loss)
    wc = worst_case(results)

    def write(fh):
        w = csv.writer(fh)
        w.writerow(["scenario", "expected_loss", "multiplier"])
        for r in results:
            w.writerow([r.scenario.name, _fmt(r.expected_loss),
                        _fmt(r.multiplier)])
    _atomic_write(out_dir / "stress.csv", write)
    write_json(out_dir / "stress_summary.json", _sanitize({
        "stressed_method": target,
        "rows": [r.to_row() for r in results],
        "worst_case": wc.to_row(),
    }))
    return results


def stage_monitor(config: RunConfig, out_dir: Path, method: str,
                  reference: str, window: int, threshold: float) -> dict:
    panel_path = out_dir / "panel.csv"
    if not panel_path.exists():
        raise FileNotFoundError(f"panel not found: {panel_path}")
    rows = {}
    with open(panel_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.setdefault(row["method"], []).append(
                (int(row["timestamp"]), float(row["decision_loss"])))
    for name in (method, reference):
        if name not in rows:
            raise ValueError(f"method {name!r} not present in the panel")
    m = dict(rows[method])
    r = dict(rows[reference])
    ts = sorted(set(m) & set(r))
    if not ts:
        raise ValueError("no overlapping timestamps between methods")
    diffs = np.array([m[t] - r[t] for t in ts])
    stat = drift_monitor(diffs, window=window, threshold=threshold)

    def write(fh):
        w = csv.writer(fh)
        w.writerow(["timestamp", "z"])
        for t, z in zip(ts, stat.z_series):
            w.writerow([t, _fmt(float(z)) if np.isfinite(z) else "nan"])
    _atomic_write(out_dir / "drift.csv", write)
    payload = {
        "method": method, "reference": reference, "window": stat.window,
        "threshold": stat.threshold, "persistence": stat.persistence,
        "breach_frequency": stat.breach_frequency,
        "breach_events": [ts[i] for i in stat.breach_events],
    }
    write_json(out_dir / "drift_summary.json", _sanitize(payload))
    return payload


def stage_report(out_dir: Path) -> str:
    summary_path = out_dir / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"summary not found: {summary_path}")
    with open(summary_path) as fh:
        summary = json.load(fh)
    if not summary.get("methods"):
        raise ValueError("summary holds no methods; refuse to print an empty table")

    lines = []

    def table(title, header, rows):
        lines.append(title)
        widths = [max(len(str(h)), *(len(str(r[i])) for r in rows))
                  for i, h in enumerate(header)]
        lines.append("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
        for r in rows:
            lines.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))
        lines.append("")

    def num(x, digits=6):
        if isinstance(x, str):
            return x
        return format(x, f".{digits}g")

    rows = [[name, ep["n"], num(ep["mean_loss"]), num(ep["mean_net"]),
             num(ep["mean_turnover"]), num(ep["constraint_freq"], 4)]
            for name, ep in sorted(summary["methods"].items())]
    table("Main results by method",
          ["method", "n", "mean_loss", "mean_net", "turnover", "bind_freq"],
          rows)

    rows = [[name, num(ep["sharpe_annualised"], 4), num(ep["cvar_5"]),
             num(ep["max_drawdown"], 4)]
            for name, ep in sorted(summary["methods"].items())]
    table("Risk endpoints", ["method", "sharpe", "cvar_5", "max_drawdown"], rows)

    if summary.get("differentials"):
        rows = [[d["method"], d["reference"], num(d["mean"]),
                 num(d["hac_se"]), num(d["t_stat"], 4),
                 num(d["one_sided_p"], 4), num(d.get("adjusted_p", "NaN"), 4)]
                for d in summary["differentials"]]
        table("Paired loss differentials vs reference",
              ["method", "reference", "mean", "hac_se", "t", "p", "adj_p"],
              rows)

    for name, reg in summary.get("regimes", {}).items():
        split = reg["split"]
        rows = [[ter, v["n"], num(v["mean_diff"]), num(v["t_stat"], 4)]
                for ter, v in split["terciles"].items()]
        table(f"Regime analysis: {reg['reference']} minus {name} "
              f"(positive favours {name})",
              ["tercile", "n", "mean_diff", "t"], rows)

    if summary.get("cost_grid"):
        header = ["cost_multiplier"] + sorted(summary["methods"])
        rows = []
        for rec in summary["cost_grid"]:
            rows.append([rec["cost_multiplier"]] + [
                num(rec["methods"][m]["mean_net"])
                for m in sorted(summary["methods"])])
        table("Cost sensitivity (mean net return)", header, rows)

    stress_path = out_dir / "stress_summary.json"
    if stress_path.exists():
        with open(stress_path) as fh:
            stress = json.load(fh)
        rows = [[r["scenario"], num(r["expected_loss"]),
                 num(r["multiplier"])] for r in stress["rows"]]
        table(f"Model-risk stress grid (method: {stress['stressed_method']})",
              ["scenario", "expected_loss", "multiplier"], rows)

    drift_path = out_dir / "drift_summary.json"
    if drift_path.exists():
        with open(drift_path) as fh:
            drift = json.load(fh)
        table("Drift monitor",
              ["method", "reference", "window", "breach_freq", "events"],
              [[drift["method"], drift["reference"], drift["window"],
                num(drift["breach_frequency"], 4),
                len(drift["breach_events"])]])

    return "\n".join(lines)


# ---------------------------------------------------------------------------
# manifest plumbing and argument handling
# ---------------------------------------------------------------------------

def write_manifest(config: RunConfig, out_dir: Path, stage: str,
                   artifacts: list) -> None:
    write_json(out_dir / "run_manifest.json", _sanitize({
        "stage": stage,
        "config": config.raw,
        "config_sha256": config.config_hash(),
        "seed": config.seed,
        "version": __version__,
        "design_defaults": design_defaults(),
        "artifacts": artifacts,
    }))


def load_config(path: str) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError("config", f"file not found: {path}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    return RunConfig(raw)


def load_run_config(run_dir: Path) -> RunConfig:
    manifest = run_dir / "run_manifest.json"
    if not manifest.exists():
        raise FileNotFoundError(f"no run manifest in {run_dir}")
    with open(manifest) as fh:
        raw = json.load(fh)["config"]
    return RunConfig(raw)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="frical",
        description="calibrated forecasts, friction-aware decisions, "
                    "walk-forward evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a market CSV")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)

    p_eval = sub.add_parser("evaluate", help="run the walk-forward pipeline")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--out", required=True)

    p_stress = sub.add_parser("stress", help="model-risk grid over a run")
    p_stress.add_argument("--run", required=True)

    p_mon = sub.add_parser("monitor", help="drift statistic from a panel")
    p_mon.add_argument("--run", required=True)
    p_mon.add_argument("--method", default=None)
    p_mon.add_argument("--reference", default=None)
    p_mon.add_argument("--window", type=int, default=500)
    p_mon.add_argument("--threshold", type=float, default=2.0)

    p_rep = sub.add_parser("report", help="render summary tables")
    p_rep.add_argument("--run", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            config = load_config(args.config)
            if config.scenario is None:
                raise ConfigError("scenario", "simulate requires a scenario")
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            _load_market(config, out)
            write_manifest(config, out, "simulate", ["market.csv"])
        elif args.command == "evaluate":
            config = load_config(args.config)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            stage_evaluate(config, out)
            artifacts = ["panel.csv", "summary.json", "calibration.csv",
                         "solver_log.jsonl"]
            if config.scenario is not None:
                artifacts.append("market.csv")
            write_manifest(config, out, "evaluate", artifacts)
        elif args.command == "stress":
            run_dir = Path(args.run)
            config = load_run_config(run_dir)
            stage_stress(config, run_dir)
        elif args.command == "monitor":
            run_dir = Path(args.run)
            config = load_run_config(run_dir)
            methods = [m.name for m in config.walk_forward.methods]
            method = args.method or stress_method_name(config)
            reference = args.reference or config.reference_method or methods[0]
            stage_monitor(config, run_dir, method, reference,
                          args.window, args.threshold)
        elif args.command == "report":
            print(stage_report(Path(args.run)))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, InsufficientDataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (LeakageError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
