"""Per-viewer beliefs about location counts and replenishment rates.

A store is fed observations by exactly one viewer: an agent (its own visits
only) or the central partitioner (every visit). Rates are the running ratio
of inferred replenishment to covered time steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .world import HUB, Observation

CENTRAL = "central"


class OutOfOrderObservation(ValueError):
    pass


@dataclass
class EstimateStore:
    owner: int | str
    n_locations: int
    prior: float = 1.0
    est_count: np.ndarray = field(init=False)
    est_rate: np.ndarray = field(init=False)
    total_replenished: np.ndarray = field(init=False)
    elapsed: np.ndarray = field(init=False)
    last_remaining: list[tuple[int, int] | None] = field(init=False)

    def __post_init__(self) -> None:
        if self.prior < 0:
            raise ValueError("prior rate must be non-negative")
        size = self.n_locations + 1
        self.est_count = np.zeros(size)
        self.est_rate = np.full(size, float(self.prior))
        self.est_rate[HUB] = 0.0
        self.total_replenished = np.zeros(size)
        self.elapsed = np.zeros(size, dtype=np.int64)
        self.last_remaining = [None] * size

    def last_seen(self, j: int) -> int:
        """Time of the latest incorporated visit to ``j``, or -1 if never visited."""
        rec = self.last_remaining[j]
        return -1 if rec is None else rec[1]

    def snapshot(self) -> tuple:
        return (
            self.est_count.tolist(),
            self.est_rate.tolist(),
            self.total_replenished.tolist(),
            self.elapsed.tolist(),
            list(self.last_remaining),
        )


def propagate(store: EstimateStore, dt: int = 1) -> EstimateStore:
    if dt < 1:
        raise ValueError(f"dt must be >= 1, got {dt}")
    # est_rate[HUB] is pinned at 0, so the hub never accrues.
    store.est_count += store.est_rate * dt
    return store


def incorporate(store: EstimateStore, obs: Observation) -> EstimateStore:
    j = obs.location
    if j == HUB:
        raise ValueError("observations are made at non-hub locations only")
    rec = store.last_remaining[j]
    if rec is None:
        # Counts start at zero, so the first visit covers [0, obs.time).
        replenished = obs.arrival_count
        covered = obs.time
    else:
        prev_count, prev_time = rec
        if obs.time < prev_time:
            raise OutOfOrderObservation(
                f"location {j}: observation at t={obs.time} precedes t={prev_time}"
            )
        replenished = max(0, obs.arrival_count - prev_count)
        covered = obs.time - prev_time
    store.total_replenished[j] += replenished
    store.elapsed[j] += covered
    if store.elapsed[j] > 0:
        store.est_rate[j] = store.total_replenished[j] / store.elapsed[j]
    store.est_count[j] = obs.remaining
    store.last_remaining[j] = (obs.remaining, obs.time)
    return store


def rate_estimate(store: EstimateStore, j: int) -> float:
    if j == HUB:
        raise ValueError("the hub has no replenishment rate")
    if store.elapsed[j] > 0:
        return float(store.total_replenished[j] / store.elapsed[j])
    return float(store.prior)
