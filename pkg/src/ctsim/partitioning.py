"""Spatial k-means clustering of locations and rate-balanced refinement.

Location arrays here are indexed by location index, so slot 0 (the hub) is
carried along but never clustered; ``assign[0]`` is always -1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .world import AgentState, Location

MAX_LLOYD_ITERATIONS = 100


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    k: int
    assign: np.ndarray
    centroids: np.ndarray
    loads: np.ndarray

    def members(self, c: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.assign == c)]

    def with_rates(self, rates) -> "Partition":
        return replace(self, loads=cluster_loads(self.assign, rates, self.k))


def _positions(locations: Sequence[Location]) -> np.ndarray:
    return np.array([loc.position for loc in locations], dtype=float)


def cluster_loads(assign: np.ndarray, rates, k: int) -> np.ndarray:
    rates = np.asarray(rates, dtype=float)
    mask = assign >= 0
    return np.bincount(assign[mask], weights=rates[mask], minlength=k).astype(float)


def _centroids(pos: np.ndarray, assign: np.ndarray, k: int, previous: np.ndarray) -> np.ndarray:
    out = previous.copy()
    for c in range(k):
        sel = assign == c
        if sel.any():
            out[c] = pos[sel].mean(axis=0)
    return out


def _nearest(pts: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
    return np.argmin(d2, axis=1)


def _seed_plus_plus(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(pts)
    chosen = [int(rng.integers(n))]
    d2 = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # Remaining points coincide with chosen seeds.
            free = [i for i in range(n) if i not in chosen]
            idx = free[int(rng.integers(len(free)))]
        chosen.append(idx)
        d2 = np.minimum(d2, ((pts - pts[idx]) ** 2).sum(axis=1))
    return pts[chosen].copy()


def kmeans_partition(
    locations: Sequence[Location],
    k: int,
    rng: np.random.Generator,
    rates=None,
) -> Partition:
    """Lloyd's algorithm with k-means++ seeding over non-hub locations.

    ``rates`` (indexed by location) only populates ``loads``; zeros if omitted.
    """
    n = len(locations) - 1
    if n < 1:
        raise PartitionError("no non-hub locations to partition")
    if k < 1:
        raise PartitionError(f"k must be >= 1, got {k}")
    if k > n:
        raise PartitionError(f"k={k} exceeds the {n} non-hub locations")
    pos = _positions(locations)
    pts = pos[1:]
    centroids = _seed_plus_plus(pts, k, rng)
    labels = _nearest(pts, centroids)
    for _ in range(MAX_LLOYD_ITERATIONS):
        centroids = _centroids(pts, labels, k, centroids)
        new = _nearest(pts, centroids)
        if np.array_equal(new, labels):
            break
        labels = new
    assign = np.concatenate([[-1], labels]).astype(int)
    if rates is None:
        rates = np.zeros(n + 1)
    return Partition(k, assign, centroids, cluster_loads(assign, rates, k))


def imbalance(p: Partition | Sequence[float]) -> float:
    """Coefficient of variation (population std / mean) of cluster loads."""
    loads = np.asarray(p.loads if isinstance(p, Partition) else p, dtype=float)
    mean = loads.mean()
    if mean <= 0:
        return 0.0
    return float(loads.std() / mean)


def should_repartition(p: Partition, rates, threshold: float) -> bool:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return imbalance(p.with_rates(rates)) > threshold


def balance_partition(p: Partition, rates, locations: Sequence[Location]) -> Partition:
    """Greedy single-location moves that lower the load imbalance.

    Each round applies the move with the largest imbalance reduction; ties go
    to the smallest growth in distance to the receiving centroid. Stops when
    no move helps or after 10*n moves.
    """
    rates = np.asarray(rates, dtype=float)
    pos = _positions(locations)
    k = p.k
    assign = p.assign.copy()
    centroids = p.centroids.copy()
    loads = cluster_loads(assign, rates, k)
    idx = np.flatnonzero(assign >= 0)
    n = len(idx)
    if k < 2 or n == 0:
        return Partition(k, assign, centroids, loads)

    for _ in range(10 * n):
        # Moving rate r from cluster a to c keeps the mean fixed and changes the
        # sum of squared loads by 2r(L_c - L_a + r); minimising it minimises CV.
        r = rates[idx][:, None]
        src = assign[idx]
        la = loads[src][:, None]
        delta = 2 * r * (loads[None, :] - la + r)
        delta[np.arange(n), src] = np.inf
        best = delta.min()
        if not best < 0:
            break
        before = imbalance(loads)
        d = np.sqrt(((pos[idx][:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1))
        growth = d - d[np.arange(n), src][:, None]
        rows, cols = np.nonzero(delta == best)
        pick = min(range(len(rows)), key=lambda t: (growth[rows[t], cols[t]], idx[rows[t]], cols[t]))
        j, c = idx[rows[pick]], cols[pick]
        trial = assign.copy()
        trial[j] = c
        trial_loads = cluster_loads(trial, rates, k)
        if not imbalance(trial_loads) < before:
            break
        assign, loads = trial, trial_loads
        centroids = _centroids(pos, assign, k, centroids)
    return Partition(k, assign, centroids, loads)


def assign_agents(
    p: Partition,
    agents: Sequence[AgentState],
    locations: Sequence[Location],
) -> dict[int, int]:
    """Greedy matching of agents (ascending id) to the nearest unclaimed centroid."""
    if len(agents) != p.k:
        raise PartitionError(f"{len(agents)} agents for {p.k} clusters")
    pos = _positions(locations)
    free = list(range(p.k))
    out = {}
    for agent in sorted(agents, key=lambda a: a.id):
        here = pos[agent.location]
        d = [float(np.hypot(*(p.centroids[c] - here))) for c in free]
        c = free[int(np.argmin(d))]
        out[agent.id] = c
        free.remove(c)
    return out


def partition_from_assign(assign: Sequence[int], k: int, locations: Sequence[Location], rates) -> Partition:
    """Build a partition from an explicit labelling of non-hub locations."""
    assign = np.concatenate([[-1], np.asarray(assign, dtype=int)])
    if len(assign) != len(locations):
        raise PartitionError("assignment must cover every non-hub location")
    if ((assign[1:] < 0) | (assign[1:] >= k)).any():
        raise PartitionError("cluster id out of range")
    pos = _positions(locations)
    centroids = _centroids(pos, assign, k, np.zeros((k, 2)))
    return Partition(k, assign, centroids, cluster_loads(assign, rates, k))
