"""Streaming experiment driver.

A series is cut into fixed-size chunks ("months"). The first
``train_chunks`` arrive one at a time and trigger a model update; the next
``test_chunks`` are held out. After every update the model is scored on the
held-out chunks with QL_grand.

Forecast origins sit every ``origin_stride`` hours, starting at the first
multiple of the stride that leaves ``input_window`` hours of history. An
origin at hour ``t`` sees hours ``t - input_window .. t - 1`` and predicts
hours ``t .. t + horizons - 1``; it belongs to the chunk holding its last
target hour, so it becomes trainable once that chunk has arrived.

Strategies:

``online``
    One pass over each arriving chunk's origins, one optimizer step per
    origin, step counter global across chunks.
``offline``
    On each arrival, re-initialise from the seed and make one plain-SGD pass
    over every origin seen so far.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._backend import BACKEND, kernels as _kernels
from .config import COMPARE_METHODS, ConfigError, ExperimentConfig
from .losses import pinball_terms
from .models import LossContext, ParamVector, _raw_forward, init_params, loss_and_grad
from .numeric import Rng
from .optimizers import OnlineOptimizer, OptimizerConfig
from .regret import RegretReport, Trajectory, regret_report
from .stream_data import DataError, encode_features, load_csv, series_values, synth_series

__all__ = [
    "CSV_COLUMNS",
    "MetricsReport",
    "PreparedStream",
    "StabilityReport",
    "UpdateRow",
    "compare_methods",
    "emit_report",
    "load_report",
    "prepare_stream",
    "ql_grand",
    "run_experiment",
]

CSV_COLUMNS = ("update_index", "ql_grand", "wall_time_s", "cum_grad_evals", "diverged")

DECISIONS = {
    "ql_grand": "mean over test chunks of (summed pinball loss over horizons and quantiles / forecast origins in the chunk)",
    "step_granularity": "one optimizer step per forecast origin, in time order, single pass",
    "lr_counter": "global 1-based step counter across chunks; offline restarts it on every retrain",
    "early_window": "full normaliser (w or W) from the first step; missing history contributes zero",
    "offline": "re-initialised from the run seed and retrained with plain SGD on every arrival",
    "lstm_depth": "single LSTM layer (reduced scale)",
    "calendar": "hour-of-day, day-of-week, 30-day month one-hots from the hour index; no temperatures",
    "divergence": "non-finite values are flagged per row and the run continues",
}


@dataclass(frozen=True)
class UpdateRow:
    update_index: int
    ql_grand: float
    wall_time_s: float
    cum_grad_evals: int
    diverged: bool
    cum_steps: int = 0


@dataclass
class MetricsReport:
    rows: list[UpdateRow]
    config: dict
    metadata: dict
    initial_ql_grand: float = math.nan
    regret: RegretReport | dict | None = None

    @property
    def final_ql_grand(self) -> float:
        return self.rows[-1].ql_grand if self.rows else self.initial_ql_grand

    def to_dict(self) -> dict:
        regret = self.regret.to_dict() if isinstance(self.regret, RegretReport) else self.regret
        return {
            "config": self.config,
            "metadata": self.metadata,
            "initial_ql_grand": self.initial_ql_grand,
            "rows": [
                {
                    "update_index": r.update_index,
                    "ql_grand": r.ql_grand,
                    "wall_time_s": r.wall_time_s,
                    "cum_grad_evals": r.cum_grad_evals,
                    "cum_steps": r.cum_steps,
                    "diverged": r.diverged,
                }
                for r in self.rows
            ],
            "regret": regret,
        }


@dataclass
class PreparedStream:
    values: np.ndarray
    train: list[list[LossContext]]
    test: list[list[LossContext]]

    @property
    def n_train_origins(self) -> int:
        return sum(len(c) for c in self.train)


def _load_values(config: ExperimentConfig) -> np.ndarray:
    if config.data.csv:
        return series_values(load_csv(config.data.csv))
    s = config.data.synth
    length = s.length_hours or (config.train_chunks + config.test_chunks) * config.chunk_hours
    seed = config.seed if s.seed is None else s.seed
    pts = synth_series(length, s.daily_amp, s.weekly_amp, s.trend, s.noise_sd, seed, s.base)
    return series_values(pts)


def prepare_stream(config: ExperimentConfig, values: np.ndarray | None = None) -> PreparedStream:
    """Build the per-chunk training and test contexts for ``config``."""
    if values is None:
        values = _load_values(config)
    ch = config.chunk_hours
    n_chunks = config.train_chunks + config.test_chunks
    if values.size < (n_chunks - 1) * ch + 1:
        raise DataError(f"series of {values.size} hours is too short for {n_chunks} chunks of {ch} hours")
    L, H, stride = config.model.input_window, config.model.horizons, config.origin_stride
    qs = config.quantile_set
    by_chunk: list[list[LossContext]] = [[] for _ in range(n_chunks)]
    first = -(-L // stride) * stride
    for t in range(first, values.size - H + 1, stride):
        c = (t + H - 1) // ch
        if c >= n_chunks:
            break
        by_chunk[c].append(LossContext(encode_features(values, t, L), values[t: t + H], qs, 0))
    train, test = by_chunk[: config.train_chunks], by_chunk[config.train_chunks:]
    empty = [config.train_chunks + i for i, c in enumerate(test) if not c]
    if empty:
        raise DataError(f"test chunks {empty} contain no complete forecast origin")
    return PreparedStream(values, train, test)


def ql_grand(params: ParamVector, test: list[list[LossContext]], kernels=None) -> float:
    """Average over chunks of the per-origin mean total pinball loss."""
    kern = kernels or _kernels
    spec = params.spec
    per_chunk = []
    with np.errstate(all="ignore"):
        for contexts in test:
            total = 0.0
            for ctx in contexts:
                pred = _raw_forward(spec, params.data, ctx.features, kern)
                total += float(pinball_terms(ctx.targets, pred, ctx._q)[0].sum())
            per_chunk.append(total / len(contexts))
    return float(np.mean(per_chunk))


def _metadata(config: ExperimentConfig, stream: PreparedStream, n_params: int) -> dict:
    return {
        "backend": BACKEND,
        "n_params": n_params,
        "train_origins": [len(c) for c in stream.train],
        "test_origins": [len(c) for c in stream.test],
        "decisions": DECISIONS,
    }


def run_experiment(config: ExperimentConfig, *, stream: PreparedStream | None = None,
                   eta_scale: float = 1.0) -> MetricsReport:
    """Replay the stream under ``config`` and score after every chunk arrival.

    ``eta_scale`` multiplies every learning rate (0 freezes the model).
    """
    stream = stream or prepare_stream(config)
    spec = config.model_spec
    init = init_params(spec, Rng(config.seed).spawn(1), config.model.init_scale)
    initial = ql_grand(init, stream.test)
    opt_cfg = config.optimizer
    rows: list[UpdateRow] = []
    traj = Trajectory()
    cum_evals = 0
    cum_steps = 0

    def one_pass(x, optimizer, contexts, trajectory):
        nonlocal cum_evals, cum_steps
        for ctx in contexts:
            x_next, receipt = optimizer.step(x, ctx)
            if trajectory is not None:
                trajectory.append(receipt.step_index, x, ctx, receipt.own_grad)
            cum_evals += receipt.grad_evals
            cum_steps += 1
            x = x_next
        return x

    if config.strategy == "online":
        x = init
        opt = OnlineOptimizer(opt_cfg, loss_and_grad, eta_scale)
        for i, contexts in enumerate(stream.train, start=1):
            start = time.perf_counter()
            x = one_pass(x, opt, contexts, traj if config.regret.enabled else None)
            wall = time.perf_counter() - start
            q = ql_grand(x, stream.test)
            rows.append(UpdateRow(i, q, wall, cum_evals, not math.isfinite(q), cum_steps))
    else:
        sgd_cfg = OptimizerConfig("sgd", opt_cfg.eta, 1, opt_cfg.alpha, opt_cfg.schedule)
        for i in range(1, len(stream.train) + 1):
            start = time.perf_counter()
            x = init
            opt = OnlineOptimizer(sgd_cfg, loss_and_grad, eta_scale)
            last = i == len(stream.train)
            traj = Trajectory() if last and config.regret.enabled else None
            for contexts in stream.train[:i]:
                x = one_pass(x, opt, contexts, traj)
            wall = time.perf_counter() - start
            q = ql_grand(x, stream.test)
            rows.append(UpdateRow(i, q, wall, cum_evals, not math.isfinite(q), cum_steps))
        traj = traj or Trajectory()

    regret = None
    if config.regret.enabled:
        w = config.regret.window or opt_cfg.window
        alpha = config.regret.alpha if config.regret.alpha is not None else opt_cfg.alpha
        regret = regret_report(traj, w, alpha)
    meta = _metadata(config, stream, spec.n_params)
    meta["eta_scale"] = eta_scale
    return MetricsReport(rows, config.to_dict(), meta, initial, regret)


# -- reports ------------------------------------------------------------------

def _num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)  # 'nan', 'inf', '-inf'
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        obj = int(obj)
    return _num(obj)


def _unnum(v):
    if isinstance(v, str) and v in ("nan", "inf", "-inf"):
        return float(v)
    return v


def _from_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_from_jsonable(v) for v in obj]
    return _unnum(obj)


def rows_to_csv(rows: list[UpdateRow]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        buf.write(f"{r.update_index},{r.ql_grand!r},{r.wall_time_s!r},{r.cum_grad_evals},{int(r.diverged)}\n")
    return buf.getvalue()


def report_to_json(report: MetricsReport) -> str:
    return json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit_report(report, path, format: str = "json") -> None:
    """Write a :class:`MetricsReport` (or :class:`StabilityReport`) to ``path``."""
    if isinstance(report, StabilityReport):
        text = report.to_csv() if format == "csv" else report.to_json()
    elif format == "csv":
        text = rows_to_csv(report.rows)
    elif format == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown report format {format!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def load_report(path, format: str | None = None) -> MetricsReport:
    """Parse a report written by :func:`emit_report`.

    A CSV file only carries the per-update rows; ``cum_steps`` is then 0.
    """
    path = Path(path)
    fmt = format or ("csv" if path.suffix == ".csv" else "json")
    text = path.read_text()
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != list(CSV_COLUMNS):
            raise DataError(f"{path}: unexpected header {header!r}")
        rows = [
            UpdateRow(int(r[0]), float(r[1]), float(r[2]), int(r[3]), bool(int(r[4])))
            for r in reader if r
        ]
        return MetricsReport(rows, {}, {})
    raw = _from_jsonable(json.loads(text))
    rows = [
        UpdateRow(r["update_index"], float(r["ql_grand"]), float(r["wall_time_s"]), r["cum_grad_evals"],
                  r["diverged"], r["cum_steps"])
        for r in raw["rows"]
    ]
    return MetricsReport(rows, raw["config"], raw["metadata"], float(raw["initial_ql_grand"]), raw["regret"])


# -- method comparison ----------------------------------------------------------

@dataclass
class StabilityReport:
    """Final QL_grand per (method, seed, eta) and its spread across etas."""

    etas: list[float]
    methods: list[str]
    seeds: list[int]
    finals: dict[tuple[str, int, float], float] = field(default_factory=dict)

    def spread(self, method: str, seed: int) -> float:
        vals = [self.finals[(method, seed, eta)] for eta in self.etas]
        if not all(math.isfinite(v) for v in vals):
            return math.inf
        return max(vals) - min(vals)

    def mean_spread(self, method: str) -> float:
        return float(np.mean([self.spread(method, s) for s in self.seeds]))

    def to_dict(self) -> dict:
        return {
            "etas": self.etas,
            "methods": self.methods,
            "seeds": self.seeds,
            "spread": {m: {str(s): self.spread(m, s) for s in self.seeds} for m in self.methods},
            "mean_spread": {m: self.mean_spread(m) for m in self.methods},
            "final_ql_grand": [
                {"method": m, "seed": s, "eta": e, "ql_grand": self.finals[(m, s, e)]}
                for m in self.methods for s in self.seeds for e in self.etas
            ],
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        lines = ["method,seed,eta,final_ql_grand"]
        for m in self.methods:
            for s in self.seeds:
                for e in self.etas:
                    lines.append(f"{m},{s},{e!r},{self.finals[(m, s, e)]!r}")
        return "\n".join(lines) + "\n"


def method_config(base: ExperimentConfig, method: str, eta: float, seed: int) -> ExperimentConfig:
    if method not in COMPARE_METHODS:
        raise ConfigError(f"unknown method {method!r}")
    opt = base.optimizer
    name = {"sgd_offline": "sgd", "sgd_online": "sgd"}.get(method, method)
    new_opt = OptimizerConfig(name, eta, opt.window, opt.alpha, opt.schedule)
    strategy = "offline" if method == "sgd_offline" else "online"
    # only the final score is compared, so skip the regret replay
    regret = dataclasses.replace(base.regret, enabled=False)
    return base.replace(optimizer=new_opt, strategy=strategy, seed=seed, regret=regret)


def _final_ql(cfg: ExperimentConfig) -> float:
    return run_experiment(cfg).final_ql_grand


def compare_methods(base: ExperimentConfig, etas, methods, seeds, *, workers: int = 1) -> StabilityReport:
    """Run every (method, eta, seed) combination and collect final QL_grand.

    Results are keyed by combination, so the order in which parallel runs
    finish does not matter.
    """
    etas = [float(e) for e in etas]
    methods = list(methods)
    seeds = [int(s) for s in seeds]
    if not etas or not seeds or not methods:
        raise ConfigError("compare needs at least one eta, method and seed")
    keys = [(m, s, e) for m in methods for s in seeds for e in etas]
    configs = [method_config(base, m, e, s) for m, s, e in keys]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            finals = list(pool.map(_final_ql, configs))
    else:
        finals = [_final_ql(c) for c in configs]
    return StabilityReport(etas, methods, seeds, dict(zip(keys, finals)))
