"""Scenario generation, episode and experiment runners, statistics and CSV output."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .policies import GreoController, OBPController, PolicyKind, RandomController
from .world import AgentState, Location, WorldState, step

RUN_HEADER = ["policy", "agents", "seed", "delivered", "rate"]
SUMMARY_HEADER = ["policy", "agents", "mean_rate", "std_rate", "n"]

# Independent RNG streams derived from one episode seed.
_SCENARIO_STREAM, _WORLD_STREAM, _POLICY_STREAM = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    n_locations: int = 20
    area: float = 100.0
    rate_range: tuple[float, float] = (0.05, 0.5)
    rates: tuple[float, ...] | None = None
    n_agents: int = 4
    speed: float = 5.0
    capacity: int = 10
    horizon: int = 2000
    prior: float = 1.0
    threshold: float = 0.2
    cooldown: int = 20
    policy: PolicyKind = PolicyKind.OBP
    seed: int = 0
    record_series: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.policy, PolicyKind):
            object.__setattr__(self, "policy", PolicyKind.parse(str(self.policy)))
        object.__setattr__(self, "rate_range", tuple(float(x) for x in self.rate_range))
        if self.rates is not None:
            object.__setattr__(self, "rates", tuple(float(x) for x in self.rates))
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.n_locations < 1:
            problems.append("n_locations must be >= 1")
        if self.area <= 0:
            problems.append("area must be positive")
        if len(self.rate_range) != 2 or not 0 <= self.rate_range[0] <= self.rate_range[1]:
            problems.append("rate_range must be [min, max] with 0 <= min <= max")
        if self.rates is not None:
            if len(self.rates) != self.n_locations:
                problems.append(f"{len(self.rates)} explicit rates for {self.n_locations} locations")
            if any(r < 0 for r in self.rates):
                problems.append("explicit rates must be non-negative")
        if self.n_agents < 1:
            problems.append("n_agents must be >= 1")
        if self.speed <= 0:
            problems.append("speed must be positive")
        if self.capacity < 1:
            problems.append("capacity must be >= 1")
        if self.horizon < 1:
            problems.append("horizon must be >= 1")
        if self.prior < 0:
            problems.append("prior must be non-negative")
        if self.threshold <= 0:
            problems.append("threshold must be positive")
        if self.cooldown < 0:
            problems.append("cooldown must be non-negative")
        if problems:
            raise ConfigError("; ".join(problems))

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = self.policy.value
        d["rate_range"] = list(self.rate_range)
        if self.rates is not None:
            d["rates"] = list(self.rates)
        return d


@dataclass(frozen=True)
class EpisodeResult:
    policy: str
    agents: int
    seed: int
    horizon: int
    delivered: int
    rate: float
    repartition_count: int = 0
    series: tuple[int, ...] | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class Cell:
    policy: str
    agents: int
    results: list[EpisodeResult] = field(default_factory=list)

    @property
    def samples(self) -> list[float]:
        return [r.rate for r in self.results]

    @property
    def n(self) -> int:
        return len(self.results)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples)) if self.results else math.nan

    @property
    def std(self) -> float:
        # A single run has no spread; reported as 0 and flagged by ``degenerate``.
        return float(np.std(self.samples, ddof=1)) if self.n > 1 else 0.0

    @property
    def degenerate(self) -> bool:
        return self.n < 2


@dataclass
class ExperimentSummary:
    cells: dict[tuple[str, int], Cell] = field(default_factory=dict)

    def cell(self, policy: PolicyKind | str, agents: int) -> Cell:
        return self.cells[(PolicyKind.parse(str(getattr(policy, "value", policy))).value, agents)]

    def add(self, result: EpisodeResult) -> None:
        key = (result.policy, result.agents)
        self.cells.setdefault(key, Cell(*key)).results.append(result)


def seed_stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def generate_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> tuple[list[Location], list[AgentState]]:
    """Hub at the centre of the square, locations uniform in it, agents idle at the hub."""
    if cfg.rates is not None and len(cfg.rates) != cfg.n_locations:
        raise ConfigError(f"{len(cfg.rates)} explicit rates for {cfg.n_locations} locations")
    half = cfg.area / 2
    pos = rng.uniform(0.0, cfg.area, size=(cfg.n_locations, 2))
    if cfg.rates is not None:
        rates = list(cfg.rates)
    else:
        lo, hi = cfg.rate_range
        rates = rng.uniform(lo, hi, size=cfg.n_locations).tolist()
    locations = [Location(0, (half, half), 0.0)]
    locations += [Location(i + 1, (float(x), float(y)), float(r)) for i, ((x, y), r) in enumerate(zip(pos, rates))]
    agents = [AgentState(i, cfg.speed, cfg.capacity) for i in range(cfg.n_agents)]
    return locations, agents


def build_episode(cfg: ScenarioConfig, seed: int):
    """World plus controller for one episode, ready to step."""
    locations, agents = generate_scenario(cfg, seed_stream(seed, _SCENARIO_STREAM))
    policy_rng = seed_stream(seed, _POLICY_STREAM)
    recon_id = None
    if cfg.policy is PolicyKind.GR_EO:
        recon_id = len(agents)
        agents.append(AgentState(recon_id, cfg.speed, 0))
    world = WorldState(locations, agents, cfg.horizon, seed_stream(seed, _WORLD_STREAM))
    if cfg.policy is PolicyKind.OBP:
        controller = OBPController(world, policy_rng, cfg.prior, cfg.threshold, cfg.cooldown)
    elif cfg.policy is PolicyKind.GR_EO:
        controller = GreoController(world, cfg.prior, recon_id)
    else:
        controller = RandomController(policy_rng)
    return world, controller


def run_episode(cfg: ScenarioConfig, seed: int | None = None) -> EpisodeResult:
    seed = cfg.seed if seed is None else seed
    world, controller = build_episode(cfg, seed)
    series = [] if cfg.record_series else None
    while world.clock < world.horizon:
        step(world, controller)
        if series is not None:
            series.append(world.hub_delivered)
    return EpisodeResult(
        policy=cfg.policy.value,
        agents=cfg.n_agents,
        seed=seed,
        horizon=cfg.horizon,
        delivered=world.hub_delivered,
        rate=world.hub_delivered / cfg.horizon,
        repartition_count=controller.repartition_count,
        series=tuple(series) if series is not None else None,
    )


def _run_job(job: tuple[ScenarioConfig, int]) -> EpisodeResult:
    cfg, seed = job
    return run_episode(cfg, seed)


def worker_count() -> int:
    cap = os.environ.get("CT_SIM_THREADS", "").strip()
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"CT_SIM_THREADS must be an integer, got {cap!r}") from None
    return n


def run_experiment(
    cfg: ScenarioConfig,
    agent_counts: Sequence[int],
    seeds: Sequence[int],
    policies: Sequence[PolicyKind | str],
    workers: int | None = None,
) -> ExperimentSummary:
    if not agent_counts or not seeds or not policies:
        raise ConfigError("agent_counts, seeds and policies must be non-empty")
    jobs = [
        (replace(cfg, policy=PolicyKind.parse(str(getattr(p, "value", p))), n_agents=k), s)
        for p in policies
        for k in agent_counts
        for s in seeds
    ]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_run_job(job) for job in jobs]
    summary = ExperimentSummary()
    for r in results:
        summary.add(r)
    return summary


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Welch's unequal-variance t-test; returns (t, two-sided p)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for name, x in (("a", a), ("b", b)):
        if len(x) < 2:
            raise ValueError(f"sample {name} needs at least 2 values, got {len(x)}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"sample {name} contains non-finite values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va <= 0 or vb <= 0:
        raise ValueError("both samples need positive variance")
    sa, sb = va / len(a), vb / len(b)
    t = (a.mean() - b.mean()) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    p = 2 * stats.t.sf(abs(t), df)
    return float(t), float(min(1.0, p))


def summary_path(path: str | os.PathLike) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_summary{path.suffix or '.csv'}")


def emit_results(summary: ExperimentSummary, path: str | os.PathLike) -> tuple[Path, Path]:
    """Write per-episode rows to ``path`` and per-cell statistics next to it."""
    runs = Path(path)
    agg = summary_path(runs)
    try:
        runs.parent.mkdir(parents=True, exist_ok=True)
        with open(runs, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RUN_HEADER)
            for cell in summary.cells.values():
                for r in cell.results:
                    w.writerow([r.policy, r.agents, r.seed, r.delivered, repr(r.rate)])
        with open(agg, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            for cell in summary.cells.values():
                w.writerow([cell.policy, cell.agents, repr(cell.mean), repr(cell.std), cell.n])
    except OSError as exc:
        raise OSError(f"cannot write results to {exc.filename or runs}: {exc.strerror or exc}") from exc
    return runs, agg


def read_runs(path: str | os.PathLike) -> list[dict]:
    """Parse a per-episode CSV written by :func:`emit_results`."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != RUN_HEADER:
                raise ConfigError(f"{path}: expected header {','.join(RUN_HEADER)}")
            return [
                {
                    "policy": row["policy"],
                    "agents": int(row["agents"]),
                    "seed": int(row["seed"]),
                    "delivered": int(row["delivered"]),
                    "rate": float(row["rate"]),
                }
                for row in reader
            ]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def load_config(path: str | os.PathLike) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data
