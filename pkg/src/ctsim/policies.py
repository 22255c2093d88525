"""Destination selection: Greedy Rate, the OBP controller and the benchmarks.

Controllers are callables plugged into :func:`ctsim.world.step`. Each tick
they receive the idle agents and the tick's observations, update whatever
beliefs they own, and return a destination for every idle agent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .estimation import CENTRAL, EstimateStore, incorporate, propagate
from .partitioning import (
    Partition,
    assign_agents,
    balance_partition,
    kmeans_partition,
    should_repartition,
)
from .world import HUB, AgentState, Observation, WorldState

# Added to every trip duration: a decision always costs at least its own tick.
EPSILON = 1


class PolicyKind(str, enum.Enum):
    OBP = "OBP"
    GR_EO = "GR_EO"
    RANDOM = "RANDOM"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        key = name.strip().upper().replace("+", "_").replace("-", "_")
        aliases = {"GREO": "GR_EO", "R": "RANDOM", "RAND": "RANDOM"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown policy {name!r}; expected OBP, GR_EO or RANDOM") from None


@dataclass(frozen=True)
class Decision:
    agent: int
    destination: int
    expected_rate: float = 0.0


def expected_pickup(agent: AgentState, j: int, arrival_t: int, store: EstimateStore, now: int) -> float:
    if j == HUB:
        raise ValueError("no pickups at the hub")
    free = agent.capacity - agent.load
    if free <= 0:
        return 0.0
    accrued = store.est_count[j] + store.est_rate[j] * (arrival_t - now)
    return float(min(accrued, free))


def greedy_rate_next(
    world: WorldState,
    agent: AgentState,
    scope: Iterable[int],
    store: EstimateStore,
) -> Decision:
    """Pick the destination maximising objects delivered per step for the trip home.

    Candidates are scored as (load + expected pickup) / (steps out + steps home + 1);
    returning straight away scores load / (steps home + 1). Ties go to the lowest
    index, so the hub wins a tie.
    """
    if not agent.at_location:
        raise ValueError(f"agent {agent.id} is en route")
    here = agent.location
    tt = world.travel_times(agent.speed)
    home = tt[here][HUB]
    if agent.load >= agent.capacity:
        return Decision(agent.id, HUB, agent.load / (home + EPSILON))

    best_j = HUB
    best = agent.load / (home + EPSILON)
    free = agent.capacity - agent.load
    counts = store.est_count
    rates = store.est_rate
    for j in sorted(scope):
        if j == HUB:
            continue
        out = tt[here][j]
        pickup = min(counts[j] + rates[j] * out, free)
        score = (agent.load + pickup) / (out + tt[j][HUB] + EPSILON)
        if score > best:
            best_j, best = j, float(score)
    return Decision(agent.id, best_j, float(best))


def obp_decide(
    world: WorldState,
    agent: AgentState,
    partition: Partition,
    agent_store: EstimateStore,
) -> Decision:
    if agent.cluster is None:
        raise ValueError(f"agent {agent.id} has no cluster")
    scope = partition.members(agent.cluster)
    return greedy_rate_next(world, agent, scope, agent_store)


def recon_target(world: WorldState, store: EstimateStore) -> int:
    """Location whose latest observation is oldest; lowest index on ties."""
    return min(range(1, len(world.locations)), key=lambda j: (store.last_seen(j), j))


def greo_decide(
    world: WorldState,
    agent: AgentState,
    shared_store: EstimateStore,
    reservations: dict[int, int],
    recon: bool = False,
) -> Decision:
    if recon:
        return Decision(agent.id, recon_target(world, shared_store), 0.0)
    taken = {j for j, owner in reservations.items() if owner != agent.id}
    scope = [j for j in range(1, len(world.locations)) if j not in taken]
    d = greedy_rate_next(world, agent, scope, shared_store)
    for j, owner in list(reservations.items()):
        if owner == agent.id:
            del reservations[j]
    if d.destination != HUB and d.destination != agent.location:
        reservations[d.destination] = agent.id
    return d


def random_decide(world: WorldState, agent: AgentState, rng: np.random.Generator) -> Decision:
    if agent.load >= agent.capacity:
        return Decision(agent.id, HUB, 0.0)
    return Decision(agent.id, int(rng.integers(1, len(world.locations))), 0.0)


class Controller:
    """Base for per-episode policy state; subclasses implement :meth:`decide`."""

    repartition_count = 0

    def __call__(self, world: WorldState, idle: list[AgentState], observations: list[Observation]) -> dict[int, int]:
        self.observe(world, observations)
        return {a.id: self.decide(world, a).destination for a in sorted(idle, key=lambda a: a.id)}

    def observe(self, world: WorldState, observations: list[Observation]) -> None:
        pass

    def decide(self, world: WorldState, agent: AgentState) -> Decision:
        raise NotImplementedError


@dataclass
class RandomController(Controller):
    rng: np.random.Generator

    def decide(self, world, agent):
        return random_decide(world, agent, self.rng)


@dataclass
class OBPController(Controller):
    """Online Balanced Partitioning.

    Agents keep private stores and plan within their cluster. A central store
    sees every observation and is used only to judge and redo the partition.
    """

    world: WorldState
    rng: np.random.Generator
    prior: float = 1.0
    threshold: float = 0.2
    cooldown: int = 20
    partition: Partition | None = None
    stores: dict[int, EstimateStore] = field(init=False)
    central: EstimateStore = field(init=False)
    last_repartition: int = field(init=False, default=0)
    repartition_count: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        n = self.world.n_locations
        self.stores = {a.id: EstimateStore(a.id, n, self.prior) for a in self.world.agents}
        self.central = EstimateStore(CENTRAL, n, self.prior)
        if self.partition is None:
            self.partition = kmeans_partition(
                self.world.locations, len(self.world.agents), self.rng, self.central.est_rate
            )
        self._assign()

    def _assign(self) -> None:
        mapping = assign_agents(self.partition, self.world.agents, self.world.locations)
        for agent in self.world.agents:
            agent.cluster = mapping[agent.id]
        self._scopes = {c: self.partition.members(c) for c in range(self.partition.k)}

    def repartition(self) -> None:
        world = self.world
        rates = self.central.est_rate
        p = kmeans_partition(world.locations, len(world.agents), self.rng, rates)
        self.partition = balance_partition(p, rates, world.locations)
        self._assign()
        self.last_repartition = world.clock
        self.repartition_count += 1

    def observe(self, world, observations):
        for store in self.stores.values():
            propagate(store, 1)
        propagate(self.central, 1)
        for obs in observations:
            incorporate(self.stores[obs.agent], obs)
            incorporate(self.central, obs)
        if world.clock - self.last_repartition >= self.cooldown and should_repartition(
            self.partition, self.central.est_rate, self.threshold
        ):
            self.repartition()

    def decide(self, world, agent):
        return greedy_rate_next(world, agent, self._scopes[agent.cluster], self.stores[agent.id])


@dataclass
class GreoController(Controller):
    """Greedy Rate over all locations with a shared store and reservations.

    ``recon_id`` names the zero-capacity reconnaissance agent, if any.
    """

    world: WorldState
    prior: float = 1.0
    recon_id: int | None = None
    shared: EstimateStore = field(init=False)
    reservations: dict[int, int] = field(init=False, default_factory=dict)

    def __post_init__(self) -> None:
        self.shared = EstimateStore("shared", self.world.n_locations, self.prior)

    def observe(self, world, observations):
        propagate(self.shared, 1)
        for obs in observations:
            incorporate(self.shared, obs)
            if self.reservations.get(obs.location) == obs.agent:
                del self.reservations[obs.location]

    def decide(self, world, agent):
        return greo_decide(world, agent, self.shared, self.reservations, recon=agent.id == self.recon_id)

