"""Ground-truth environment for the continuous transportation task.

Locations replenish objects by independent Poisson draws, agents travel
between locations in whole time steps, pick up what fits and unload
everything at the hub (location 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

HUB = 0


class EngineError(RuntimeError):
    """Raised when a tick cannot be executed (bad decision, broken contract)."""


@dataclass(frozen=True)
class Location:
    index: int
    position: tuple[float, float]
    true_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.true_rate < 0:
            raise ValueError(f"location {self.index}: negative rate {self.true_rate}")
        if self.index == HUB and self.true_rate != 0:
            raise ValueError("the hub does not replenish")


@dataclass
class AgentState:
    """One agent. ``location`` is where it is, or where it last was while en route."""

    id: int
    speed: float
    capacity: int
    load: int = 0
    location: int = HUB
    destination: int | None = None
    remaining: int = 0
    cluster: int | None = None

    def __post_init__(self) -> None:
        if self.speed <= 0:
            raise ValueError(f"agent {self.id}: speed must be positive")
        if self.capacity < 0:
            raise ValueError(f"agent {self.id}: negative capacity")
        if not 0 <= self.load <= self.capacity:
            raise ValueError(f"agent {self.id}: load {self.load} outside [0, {self.capacity}]")

    @property
    def at_location(self) -> bool:
        return self.destination is None

    @property
    def free_capacity(self) -> int:
        return self.capacity - self.load


@dataclass(frozen=True)
class Observation:
    agent: int
    location: int
    time: int
    arrival_count: int
    picked: int
    remaining: int


@dataclass
class WorldState:
    locations: list[Location]
    agents: list[AgentState]
    horizon: int
    rng: np.random.Generator
    clock: int = 0
    counts: list[int] = field(default_factory=list)
    hub_delivered: int = 0
    total_replenished: int = 0

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if not self.locations or self.locations[0].index != HUB:
            raise ValueError("location 0 must be the hub")
        for i, loc in enumerate(self.locations):
            if loc.index != i:
                raise ValueError(f"location at position {i} has index {loc.index}")
        if not self.counts:
            self.counts = [0] * len(self.locations)
        elif len(self.counts) != len(self.locations):
            raise ValueError("counts must cover every location")
        self.total_replenished += sum(self.counts)
        self._rates = np.array([loc.true_rate for loc in self.locations], dtype=float)
        pos = np.array([loc.position for loc in self.locations], dtype=float)
        diff = pos[:, None, :] - pos[None, :, :]
        self.dist = np.sqrt((diff**2).sum(axis=-1))
        self._tt_cache: dict[float, list[list[int]]] = {}

    @property
    def n_locations(self) -> int:
        """Number of non-hub locations."""
        return len(self.locations) - 1

    def travel_times(self, speed: float) -> list[list[int]]:
        table = self._tt_cache.get(speed)
        if table is None:
            table = np.ceil(self.dist / speed).astype(int).tolist()
            self._tt_cache[speed] = table
        return table

    def travel_time(self, agent: AgentState, a: int, b: int) -> int:
        return self.travel_times(agent.speed)[a][b]

    def audit(self) -> int:
        """Objects accounted for anywhere; equals ``total_replenished`` when conserved."""
        return self.hub_delivered + sum(a.load for a in self.agents) + sum(self.counts)


def distance(a: Location, b: Location) -> float:
    return math.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1])


def travel_time(agent: AgentState, a: Location, b: Location) -> int:
    return math.ceil(distance(a, b) / agent.speed)


def poisson(rng: np.random.Generator, lam, size=None):
    """Poisson draws from ``rng``; ``lam`` may be a scalar or an array of means."""
    return rng.poisson(lam, size)


def replenish(state: WorldState) -> WorldState:
    if state.clock >= state.horizon:
        raise EngineError(f"clock {state.clock} already at horizon {state.horizon}")
    draws = poisson(state.rng, state._rates)
    counts = state.counts
    added = 0
    for j in range(1, len(counts)):
        d = int(draws[j])
        counts[j] += d
        added += d
    state.total_replenished += added
    return state


def arrive_pickup(agent: AgentState, j: int, state: WorldState) -> Observation:
    if j == HUB:
        raise EngineError("pickup at the hub; use deliver()")
    if not agent.at_location or agent.location != j:
        raise EngineError(f"agent {agent.id} is not at location {j}")
    arrival = state.counts[j]
    picked = min(arrival, agent.capacity - agent.load)
    state.counts[j] = arrival - picked
    agent.load += picked
    # Stamped with the post-tick clock: the number of replenishments so far.
    return Observation(agent.id, j, state.clock + 1, arrival, picked, arrival - picked)


def deliver(agent: AgentState, state: WorldState) -> WorldState:
    if not agent.at_location or agent.location != HUB:
        raise EngineError(f"agent {agent.id} is not at the hub")
    state.hub_delivered += agent.load
    agent.load = 0
    return state


Decide = Callable[[WorldState, list[AgentState], list[Observation]], Mapping[int, int]]


def step(
    state: WorldState,
    decisions: Mapping[int, int] | Decide | None = None,
) -> list[Observation]:
    """Advance the world one tick and return the observations made during it.

    ``decisions`` maps agent id to destination for agents idle after the
    pickup phase, or is a callable producing that mapping from
    ``(state, idle_agents, observations)``. Idle agents without an entry stay put.
    """
    replenish(state)

    for agent in state.agents:
        if not agent.at_location:
            agent.remaining -= 1
            if agent.remaining <= 0:
                agent.location = agent.destination
                agent.destination = None
                agent.remaining = 0

    observations = []
    for agent in sorted(state.agents, key=lambda a: a.id):
        if not agent.at_location:
            continue
        if agent.location == HUB:
            deliver(agent, state)
        else:
            observations.append(arrive_pickup(agent, agent.location, state))

    idle = [a for a in state.agents if a.at_location]
    if callable(decisions):
        choice = decisions(state, idle, observations)
    else:
        choice = decisions or {}
    n = len(state.locations)
    for agent in idle:
        dest = choice.get(agent.id, agent.location)
        if not (isinstance(dest, (int, np.integer)) and 0 <= dest < n):
            raise EngineError(
                f"tick {state.clock}: agent {agent.id} chose unknown location {dest!r}"
            )
        dest = int(dest)
        if dest != agent.location:
            agent.destination = dest
            # Moving between distinct locations always takes at least one tick.
            agent.remaining = max(1, state.travel_time(agent, agent.location, dest))

    state.clock += 1
    return observations


def make_world(
    positions: Sequence[tuple[float, float]],
    rates: Sequence[float],
    agents: Iterable[AgentState],
    horizon: int,
    seed: int | np.random.Generator = 0,
    counts: Sequence[int] | None = None,
) -> WorldState:
    """Convenience constructor; ``positions[0]`` and ``rates[0]`` describe the hub."""
    if len(positions) != len(rates):
        raise ValueError("positions and rates differ in length")
    locations = [Location(i, tuple(map(float, p)), float(r)) for i, (p, r) in enumerate(zip(positions, rates))]
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return WorldState(
        locations=locations,
        agents=list(agents),
        horizon=horizon,
        rng=rng,
        counts=list(counts) if counts is not None else [],
    )
