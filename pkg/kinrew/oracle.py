from logging import getLogger
from typing import Any, Callable, Mapping

from world.engine import step
from world.genome import Genome
from world.state import Action, Move, WorldState
from .horizon import effective_horizon
from .kinship import family_census
from .rewards import RewardConfig

__logger = getLogger(__name__)

Policy = Callable[[WorldState], Mapping[int, Action]]


def constant_policy(action: Action = Action(Move.STAY, False)) -> Policy:
    """Scripted policy giving every living agent the same action"""

    def policy(state: WorldState) -> dict[int, Action]:
        return {agent_id: action for agent_id in state.agents}

    return policy


def terminal_reward_oracle(
    snapshot: WorldState,
    genome: Genome,
    policies: Policy,
    config: RewardConfig,
    horizon: int | None = None,
) -> float:
    """Terminal reward by forward simulation

    Rolls a copy of the snapshot forward and sums the discounted kinship of
    `genome` with the living population over the effective horizon. The
    snapshot is the state at the death tick, so the dead agent is absent.

    Args:
        snapshot (WorldState): State at the death tick, left untouched
        genome (Genome): Genome of the dead agent
        policies (Policy): Maps a state to the actions of its living agents
        config (RewardConfig): Reward configuration
        horizon (int | None, optional): Summed ticks. Defaults to h_e.

    Returns:
        float: Sum over t' < horizon of gamma^t' * sum_j k(g, g^j)
    """
    config = config.resolve(snapshot)
    if horizon is None:
        horizon = effective_horizon(config)

    state = snapshot.copy()
    total = 0.0
    discount = 1.0
    for tick in range(horizon):
        census = family_census(state, genome)
        total += discount * census
        if state.population() == 0:
            break
        discount *= config.gamma
        if tick < horizon - 1:
            step(state, policies(state))
    __logger.debug(f"Terminal reward simulated. horizon={horizon} value={total}")
    return total


def oracle_record(
    snapshot: WorldState, genome: Genome, config: RewardConfig, value: float, horizon: int
) -> dict[str, Any]:
    """Structured oracle result for test fixtures"""
    config = config.resolve(snapshot)
    return {
        "seed": snapshot.config.seed,
        "tick": snapshot.tick,
        "genome": [int(allele) for allele in genome.alleles],
        "gamma": config.gamma,
        "epsilon": config.epsilon,
        "carrying_capacity": config.carrying_capacity,
        "horizon": horizon,
        "value": value,
    }
