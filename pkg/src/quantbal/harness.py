"""Multi-trial experiments: configuration, execution, aggregation, export."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from typing import Any, Mapping

import numpy as np

from .analysis import RoundRecord
from .balancing import init_balancer, run_balancer
from .consensus import QuantizerConfig, init_consensus, run_consensus
from .errors import ConfigError
from .graph import Digraph, generate_ring_plus_random, read_edge_list
from .schedule import MAX_SCALE_EXP, AlphaSchedule, gamma_exponent

MODES = ("balance", "consensus")
EMIT_FORMATS = ("csv", "json")
CSV_COLUMNS = ("k", "metric_mean", "metric_median", "metric_min", "metric_max", "gamma", "alpha")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "balance"
    N: int = 6
    p: float = 0.5
    trials: int = 100
    graph_realizations: int = 100
    max_iters: int = 100_000
    tol: float = 0.0
    q_min: float = 0.0
    q_max: float = 1.0
    alpha_a0: float = 1.0
    alpha_tau: float = 1.0
    master_seed: int = 0
    record_every: int = 100
    emit: str = "csv"
    graph_file: str | None = None
    workers: int = 1

    def __post_init__(self):
        errors = _validate(self)
        if errors:
            raise ConfigError("; ".join(errors))

    def alpha_schedule(self) -> AlphaSchedule:
        return AlphaSchedule(self.alpha_a0, self.alpha_tau)

    def quantizer(self) -> QuantizerConfig:
        return QuantizerConfig(self.q_min, self.q_max)

    def recorded_rounds(self) -> list[int]:
        ks = list(range(0, self.max_iters + 1, self.record_every))
        if ks[-1] != self.max_iters:
            ks.append(self.max_iters)
        return ks


def _validate(cfg: ExperimentConfig) -> list[str]:
    errs = []
    if cfg.mode not in MODES:
        errs.append(f"mode: expected one of {MODES}, got {cfg.mode!r}")
    if cfg.N < 2:
        errs.append(f"N: need at least 2 nodes, got {cfg.N}")
    if not 0.0 <= cfg.p <= 1.0:
        errs.append(f"p: must lie in [0, 1], got {cfg.p}")
    for name in ("trials", "graph_realizations", "max_iters", "record_every", "workers"):
        if getattr(cfg, name) < 1:
            errs.append(f"{name}: must be positive, got {getattr(cfg, name)}")
    if cfg.max_iters >= 1 and gamma_exponent(cfg.max_iters) > MAX_SCALE_EXP:
        errs.append(f"max_iters: step exponent would exceed {MAX_SCALE_EXP}")
    if not (cfg.tol >= 0 and math.isfinite(cfg.tol)):
        errs.append(f"tol: must be finite and non-negative, got {cfg.tol}")
    if cfg.mode == "consensus" and not cfg.q_min < cfg.q_max:
        errs.append(f"q_min/q_max: need q_min < q_max, got {cfg.q_min} >= {cfg.q_max}")
    if not cfg.alpha_a0 > 0:
        errs.append(f"alpha_a0: must be positive, got {cfg.alpha_a0}")
    if not 0.5 < cfg.alpha_tau <= 1.0:
        errs.append(f"alpha_tau: must lie in (1/2, 1], got {cfg.alpha_tau}")
    if not 0 <= cfg.master_seed < 2**64:
        errs.append(f"master_seed: must be a 64-bit unsigned integer, got {cfg.master_seed}")
    if cfg.emit not in EMIT_FORMATS:
        errs.append(f"emit: expected one of {EMIT_FORMATS}, got {cfg.emit!r}")
    return errs


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, value: Any) -> Any:
    kind = _FIELD_TYPES[key]
    if value is None or not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if kind == "int":
            return int(float(text)) if "e" in text.lower() else int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind}") from None
    if kind.startswith("str | None") and text.lower() in ("", "none"):
        return None
    return text


def parse_config(path: str | PathLike | None = None,
                 overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Build a config from an optional ``key = value`` file plus overrides.

    Overrides win over file values; missing keys take the defaults. Blank
    lines and ``#`` comments are ignored in the file.
    """
    values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for lineno, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    unknown = sorted(set(values) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in values.items()})


@dataclass
class AggregateSeries:
    """Per-round statistics of one metric across all trials."""

    metric: str
    k: np.ndarray
    mean: np.ndarray
    median: np.ndarray
    min: np.ndarray
    max: np.ndarray
    gamma_exp: np.ndarray
    alpha: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.k)

    @classmethod
    def empty(cls, metric: str = "eps_l1") -> "AggregateSeries":
        z = np.zeros(0)
        return cls(metric, np.zeros(0, dtype=np.int64), z, z, z, z, np.zeros(0, dtype=np.int64))

    def at(self, k: int) -> int:
        """Row index of recorded round ``k``."""
        idx = np.flatnonzero(self.k == k)
        if not len(idx):
            raise KeyError(f"round {k} was not recorded")
        return int(idx[0])

    def window_mean(self, column: str, k_lo: int, k_hi: int) -> float:
        """Mean of a column over recorded rounds in ``[k_lo, k_hi]``."""
        sel = (self.k >= k_lo) & (self.k <= k_hi)
        return float(np.mean(getattr(self, column)[sel]))

    def records(self) -> list[dict[str, Any]]:
        """One dict per recorded round, keyed by the CSV column names."""
        out = []
        for r in range(len(self.k)):
            out.append({
                "k": int(self.k[r]),
                "metric_mean": float(self.mean[r]),
                "metric_median": float(self.median[r]),
                "metric_min": float(self.min[r]),
                "metric_max": float(self.max[r]),
                "gamma": math.ldexp(1.0, -int(self.gamma_exp[r])),
                "alpha": None if self.alpha is None else float(self.alpha[r]),
            })
        return out


@dataclass
class TrialSummary:
    graph_index: int
    trial_index: int
    edge_count: int
    stop_round: int
    final_metric: float
    final_eps: float
    mean_drift: float = 0.0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    series: AggregateSeries
    trials: list[TrialSummary] = field(default_factory=list)
    trajectories: np.ndarray | None = None


class TrialFailure(RuntimeError):
    """A single trial aborted; carries its position in the experiment."""

    def __init__(self, graph_index: int, trial_index: int, cause: BaseException):
        super().__init__(f"graph {graph_index}, trial {trial_index}: {type(cause).__name__}: {cause}")
        self.graph_index = graph_index
        self.trial_index = trial_index
        self.cause = cause


def graph_seed(master_seed: int, graph_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(graph_index,))


def trial_seeds(master_seed: int, graph_index: int, trial_index: int) -> tuple[np.random.SeedSequence, int]:
    """Seed for the initial values and the Philox key for the dither stream."""
    init = np.random.SeedSequence(master_seed, spawn_key=(graph_index, trial_index, 0))
    words = np.random.SeedSequence(master_seed, spawn_key=(graph_index, trial_index, 1)).generate_state(2, np.uint64)
    return init, int(words[0]) | (int(words[1]) << 64)


def build_graph(cfg: ExperimentConfig, graph_index: int) -> Digraph:
    if cfg.graph_file is not None:
        g = read_edge_list(cfg.graph_file)
        if g.node_count != cfg.N:
            raise ConfigError(f"N: config says {cfg.N} but {cfg.graph_file} has {g.node_count} nodes")
        return g
    return generate_ring_plus_random(cfg.N, cfg.p, np.random.default_rng(graph_seed(cfg.master_seed, graph_index)))


def initial_values(cfg: ExperimentConfig, graph_index: int, trial_index: int) -> np.ndarray:
    seq, _ = trial_seeds(cfg.master_seed, graph_index, trial_index)
    u = np.random.default_rng(seq).random(cfg.N)
    return cfg.q_min + (cfg.q_max - cfg.q_min) * u


def _fill(ks: list[int], recorded: dict[int, float], stop: int, final: float) -> np.ndarray:
    # rounds after an early stop hold the stopping value
    return np.array([recorded[k] if k in recorded else final for k in ks if k <= stop]
                    + [final for k in ks if k > stop])


def run_trial(cfg: ExperimentConfig, graph_index: int, trial_index: int,
              g: Digraph | None = None) -> tuple[np.ndarray, TrialSummary]:
    """One trial: metric values at ``cfg.recorded_rounds()`` plus a summary."""
    try:
        if g is None:
            g = build_graph(cfg, graph_index)
        ks = cfg.recorded_rounds()
        recorded: dict[int, float] = {}
        last: list[RoundRecord] = []

        if cfg.mode == "balance":
            def observe(rec):
                recorded[rec.k] = rec.eps
                last[:] = [rec]

            _, stop = run_balancer(init_balancer(g), cfg.tol, cfg.max_iters, observe,
                                   observe_every=cfg.record_every)
            final = last[0].eps
            final_eps = final
            drift = 0.0
        else:
            def observe(rec):
                recorded[rec.k] = rec.mse
                last[:] = [rec]

            _, key = trial_seeds(cfg.master_seed, graph_index, trial_index)
            state = init_consensus(g, initial_values(cfg, graph_index, trial_index),
                                   cfg.quantizer(), cfg.alpha_schedule(), seed=key)
            fin = run_consensus(state, cfg.max_iters, observe, tol=cfg.tol,
                                observe_every=cfg.record_every)
            stop = fin.k
            final = last[0].mse
            final_eps = last[0].eps
            drift = fin.mean_drift
        values = _fill(ks, recorded, stop, final)
        return values, TrialSummary(graph_index, trial_index, g.edge_count, stop, final, final_eps, drift)
    except ConfigError:
        raise
    except Exception as exc:
        raise TrialFailure(graph_index, trial_index, exc) from exc


def _run_task(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every (graph realization, trial) pair and aggregate the metric.

    Results are reduced in ``(graph_index, trial_index)`` order, so the
    output does not depend on ``workers``. Balancing is deterministic given
    the graph, so in balance mode each graph is simulated once and its
    trajectory counted ``trials`` times.
    """
    ks = cfg.recorded_rounds()
    results: list[tuple[np.ndarray, TrialSummary]] = []
    if cfg.mode == "balance":
        tasks = [(cfg, gi, 0) for gi in range(cfg.graph_realizations)]
    else:
        tasks = [(cfg, gi, ti) for gi in range(cfg.graph_realizations) for ti in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            done = list(pool.map(_run_task, tasks))
    else:
        done = [_run_task(t) for t in tasks]
    if cfg.mode == "balance":
        for values, summary in done:
            for ti in range(cfg.trials):
                results.append((values, dataclasses.replace(summary, trial_index=ti)))
    else:
        results = done

    traj = np.vstack([v for v, _ in results])
    metric = "eps_l1" if cfg.mode == "balance" else "mse"
    k_arr = np.array(ks, dtype=np.int64)
    alpha = None
    if cfg.mode == "consensus":
        sched = cfg.alpha_schedule()
        alpha = np.array([sched(k) for k in ks])
    series = AggregateSeries(
        metric, k_arr, traj.mean(axis=0), np.median(traj, axis=0), traj.min(axis=0),
        traj.max(axis=0), np.array([gamma_exponent(k) for k in ks], dtype=np.int64), alpha,
    )
    return ExperimentResult(cfg, series, [s for _, s in results], traj)


def series_to_csv(series: AggregateSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in series.records():
        writer.writerow(["" if rec[c] is None else repr(rec[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def series_to_json(series: AggregateSeries, cfg: ExperimentConfig | None = None) -> str:
    doc = {
        "metric": series.metric,
        "columns": list(CSV_COLUMNS),
        "rows": series.records(),
        "config": dataclasses.asdict(cfg) if cfg is not None else None,
        "master_seed": cfg.master_seed if cfg is not None else None,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def export_series(series: AggregateSeries, path: str | PathLike, fmt: str = "csv",
                  cfg: ExperimentConfig | None = None) -> None:
    """Write the series as CSV, or as JSON with the config attached."""
    if fmt == "csv":
        text = series_to_csv(series)
    elif fmt == "json":
        text = series_to_json(series, cfg)
    else:
        raise ValueError(f"unknown format {fmt!r}; expected one of {EMIT_FORMATS}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write series to {path}: {exc}") from exc
