"""Multi-seed experiments, parameter sweeps and CSV/JSON outputs."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics
from .agents.asyncd import ActivationSchedule
from .env import BanditConfig
from .errors import ConfigError
from .runner import RunResult, simulate

log = logging.getLogger(__name__)

OUTPUT_ENV_VAR = "COLLISION_MMAB_OUT"
ALGORITHMS = ("syncd", "async")
SWEEP_PARAMS = ("delta_gap", "beta", "T")


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV_VAR, "results"))


def linear_means(K: int, top: float = 0.9, gap: float | None = None, bottom: float | None = None) -> tuple[float, ...]:
    """Evenly spaced means from ``top`` downwards, by constant gap or down to ``bottom``."""
    if gap is not None:
        return tuple(round(top - gap * k, 12) for k in range(K))
    return tuple(float(x) for x in np.linspace(top, 0.89 if bottom is None else bottom, K))


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce a batch of runs.

    Seeds are ``master_seed + run_index`` for ``run_index`` in ``range(seeds)``
    unless ``seed_list`` names them explicitly. ``delta`` of None means 1/T^2.
    """

    bandit: BanditConfig
    algorithm: str = "syncd"
    beta: float = 4.0
    delta: float | None = None
    periods: tuple[int, ...] | None = None
    seeds: int = 20
    checkpoints: int = 100
    workers: int = 1
    seed_list: tuple[int, ...] | None = None
    out_dir: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.beta <= 1:
            raise ConfigError("beta must exceed 1")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.seeds < 1 or (self.seed_list is not None and not self.seed_list):
            raise ConfigError("need at least one seed")
        if self.algorithm == "async":
            if self.periods is None or len(self.periods) != self.bandit.M:
                raise ConfigError("async runs need one period per agent")
            ActivationSchedule(self.periods)

    @property
    def master_seed(self) -> int:
        return self.bandit.seed

    @property
    def run_seeds(self) -> list[int]:
        if self.seed_list is not None:
            return list(self.seed_list)
        return [self.master_seed + i for i in range(self.seeds)]

    def normalized(self) -> dict:
        data = {**self.bandit.to_dict(), "algorithm": self.algorithm, "beta": self.beta,
                "delta": self.delta if self.delta is not None else 1.0 / self.bandit.horizon**2,
                "periods": list(self.periods) if self.periods else None, "seeds": self.run_seeds,
                "checkpoints": self.checkpoints}
        return data

    def config_hash(self) -> str:
        blob = json.dumps(self.normalized(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        K = int(data.get("K", 10))
        if "means" not in data:
            data["means"] = linear_means(K, gap=data["gap"]) if "gap" in data else linear_means(K)
        data.setdefault("K", K)
        bandit = BanditConfig.from_dict(data)
        periods = data.get("periods")
        seeds = data.get("seeds", 20)
        seed_list = tuple(int(s) for s in seeds) if isinstance(seeds, (list, tuple)) else None
        return cls(bandit, data.get("algorithm", "syncd"), float(data.get("beta", 4.0)), data.get("delta"),
                   tuple(periods) if periods else None, len(seed_list) if seed_list else int(seeds),
                   int(data.get("checkpoints", 100)), int(data.get("workers", 1)), seed_list,
                   data.get("out_dir"))

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentSpec":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as err:
                raise ConfigError(f"{path}: {err}") from None


def checkpoint_grid(horizon: int, count: int) -> np.ndarray:
    return np.unique(np.linspace(1, horizon, count).round().astype(np.int64))


@dataclass
class RunSummary:
    """One row of runs.csv plus the regret curve of that run."""

    row: dict
    curve: np.ndarray
    failures: list = field(default_factory=list)


def summarize(result: RunResult, spec: ExperimentSpec, grid: np.ndarray) -> RunSummary:
    """Compute metrics of a finished run and check its invariants."""
    cfg, trace = result.config, result.trace
    failures = []
    if result.algorithm == "async":
        per_step = metrics.dynamic_step_regret(trace, cfg.means)
    else:
        per_step = metrics.step_regret(trace, cfg.means)
    init, comm, explo = metrics.decompose(trace, cfg.means, per_step)
    total = float(per_step.sum())
    acc = metrics.comm_accounting(trace, result.messages)
    ok_decomp = abs(total - (init + comm + explo)) <= 1e-9 * max(1.0, abs(total))
    free = metrics.collision_free_after_init(trace)
    agree = all(a.snapshots == result.agents[0].snapshots for a in result.agents)
    if not ok_decomp:
        failures.append("decomposition")
    if not free:
        failures.append("collision_free")
    if not agree:
        failures.append("post_comm_agreement")
    if not acc.first_messages_exact:
        failures.append("first_message_width")
    row = {
        "seed": cfg.seed, "config_hash": spec.config_hash(), "algorithm": result.algorithm,
        "K": cfg.K, "M": cfg.M, "T": cfg.horizon, "beta": result.beta,
        "regret": total, "regret_realized": metrics.group_regret(trace, cfg.means, realized=True),
        "regret_individual": metrics.individual_regret(trace, cfg.means),
        "regret_init": init, "regret_comm": comm, "regret_explo": explo,
        "comm_rounds": acc.rounds, "mark_rounds": acc.mark_rounds, "messages": acc.messages,
        "total_bits": acc.total_bits, "mean_differential_bits": acc.mean_differential_bits,
        "comm_rounds_bound": metrics.comm_rounds_bound(cfg.means, cfg.M, result.beta),
        "bits_bound": metrics.message_bits_bound(cfg.M, result.beta),
        "final_accepted": " ".join(str(k + 1) for k in sorted(result.agents[0].accepted)),
        "top_identified": sorted(result.agents[0].accepted) == sorted(cfg.top_arms),
        "collision_free": free, "decomposition_ok": ok_decomp, "agreement": agree,
    }
    if result.algorithm == "async":
        schedule = ActivationSchedule(result.periods)
        row["sorted_at"] = result.agents[0].sorted_at
        row["lower_bound_constant"] = metrics.lower_bound_constant(cfg.means, schedule.activity_levels())
    else:
        row["regret_bound_group"] = metrics.regret_bound_reference(cfg, result.beta, init)[0]
    curve = np.cumsum(per_step)[grid - 1] if len(per_step) >= grid[-1] else np.full(len(grid), np.nan)
    return RunSummary(row, curve, failures)


def _run_one(args) -> RunSummary:
    spec, seed = args
    cfg = replace(spec.bandit, seed=seed)
    result = simulate(cfg, spec.beta, spec.delta, spec.algorithm, spec.periods)
    return summarize(result, spec, checkpoint_grid(cfg.horizon, spec.checkpoints))


def run_experiment(spec: ExperimentSpec) -> list[RunSummary]:
    """Run every seed of ``spec``; uses a process pool when ``spec.workers > 1``."""
    if spec.bandit.has_ties:
        log.warning("tied arm means: the optimal set is not unique")
    jobs = [(spec, seed) for seed in spec.run_seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]


def write_outputs(spec: ExperimentSpec, runs: list[RunSummary], out_dir: str | Path,
                  extra_columns: dict | None = None) -> dict[str, Path]:
    """Write runs.csv, aggregate.csv, curves.csv and spec.normalized.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    extra = extra_columns or {}
    rows = [{**extra, **r.row} for r in runs]
    paths = {"runs": out / "runs.csv", "aggregate": out / "aggregate.csv",
             "curves": out / "curves.csv", "spec": out / "spec.normalized.json"}
    _write_rows(paths["runs"], rows)
    numeric = [k for k, v in runs[0].row.items() if isinstance(v, (int, float)) and not isinstance(v, bool)
               and k not in ("seed", "K", "M", "T")]
    agg = [{**extra, "metric": k, "mean": float(np.mean([r.row[k] for r in runs])),
            "std": float(np.std([r.row[k] for r in runs]))} for k in numeric]
    _write_rows(paths["aggregate"], agg)
    grid = checkpoint_grid(spec.bandit.horizon, spec.checkpoints)
    curves = np.array([r.curve for r in runs])
    _write_rows(paths["curves"], [
        {**extra, "t": int(t), "mean": float(curves[:, i].mean()), "std": float(curves[:, i].std())}
        for i, t in enumerate(grid)])
    paths["spec"].write_text(json.dumps({**spec.normalized(), "config_hash": spec.config_hash()}, indent=2))
    return paths


def _write_rows(path: Path, rows: list[dict], append: bool = False) -> None:
    if not rows:
        return
    fields = list(rows[0].keys())
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        if not append:
            writer.writeheader()
        writer.writerows(rows)


def failure_report(runs: list[RunSummary]) -> list[dict]:
    return [{"seed": r.row["seed"], "failed": r.failures} for r in runs if r.failures]


def sweep_specs(spec: ExperimentSpec, param: str, values: list[float]) -> list[tuple[float, ExperimentSpec]]:
    """One spec per value of ``param`` (gap between consecutive means, beta or horizon)."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    out = []
    for v in values:
        if param == "delta_gap":
            means = linear_means(spec.bandit.K, gap=float(v))
            if min(means) < 0:
                raise ConfigError(f"gap {v} pushes means below zero")
            out.append((v, replace(spec, bandit=replace(spec.bandit, means=means))))
        elif param == "beta":
            out.append((v, replace(spec, beta=float(v))))
        else:
            out.append((v, replace(spec, bandit=replace(spec.bandit, horizon=int(v)))))
    return out


def run_sweep(spec: ExperimentSpec, param: str, values: list[float], out_dir: str | Path) -> list[RunSummary]:
    """Run a sweep and write long-format CSVs keyed by the swept value."""
    out = Path(out_dir)
    all_runs = []
    for value, sub in sweep_specs(spec, param, values):
        runs = run_experiment(sub)
        write_outputs(sub, runs, out / f"{param}={value}", {param: value})
        all_runs.extend(runs)
        _write_rows(out / "sweep.csv", [{param: value, **r.row} for r in runs],
                    append=(out / "sweep.csv").exists() and value != values[0])
    return all_runs


def spec_to_json(spec: ExperimentSpec) -> str:
    return json.dumps(asdict(spec), default=list, indent=2)
