"""Discrete-time simulator for multi-agent continuous transportation."""

from .estimation import CENTRAL, EstimateStore, incorporate, propagate, rate_estimate
from .harness import (
    EpisodeResult,
    ExperimentSummary,
    ScenarioConfig,
    emit_results,
    generate_scenario,
    run_episode,
    run_experiment,
    welch_t_test,
)
from .partitioning import (
    Partition,
    assign_agents,
    balance_partition,
    imbalance,
    kmeans_partition,
    should_repartition,
)
from .policies import (
    Decision,
    PolicyKind,
    expected_pickup,
    greedy_rate_next,
    greo_decide,
    obp_decide,
    random_decide,
)
from .world import (
    HUB,
    AgentState,
    EngineError,
    Location,
    Observation,
    WorldState,
    arrive_pickup,
    deliver,
    distance,
    replenish,
    step,
    travel_time,
)

__version__ = "0.1.0"
