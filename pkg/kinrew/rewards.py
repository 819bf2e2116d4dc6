from dataclasses import dataclass
from enum import Enum

import numpy as np

from world.genome import kinship_matrix
from world.state import TickEvents, WorldState
from .kinship import family_census


class RewardKind(Enum):
    """Reward Kind"""

    EVOLUTIONARY = "evolutionary"
    SUGARY = "sugary"


@dataclass(frozen=True)
class RewardConfig:
    """Reward Configuration

    `carrying_capacity` is r_b, the bound on the per-tick kinship sum. None
    means it is derived from the world (food sources x growth rate).
    """

    gamma: float = 0.9
    epsilon: float = 0.1
    carrying_capacity: float | None = None
    kind: RewardKind = RewardKind.EVOLUTIONARY

    def validate(self) -> None:
        """Validate

        Raises:
            ValueError: Invalid configuration
        """
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"`gamma` must be in [0, 1). gamma={self.gamma}")
        if self.epsilon <= 0.0:
            raise ValueError(f"`epsilon` must be positive. epsilon={self.epsilon}")
        if self.carrying_capacity is not None and self.carrying_capacity <= 0.0:
            raise ValueError(
                f"`carrying_capacity` must be positive. carrying_capacity={self.carrying_capacity}"
            )

    def resolve(self, state: WorldState) -> "RewardConfig":
        """Fill in a derived carrying capacity

        Args:
            state (WorldState): World whose food production bounds the population

        Returns:
            RewardConfig: Configuration with `carrying_capacity` set
        """
        if self.carrying_capacity is not None:
            return self
        return RewardConfig(self.gamma, self.epsilon, carrying_capacity(state), self.kind)


def carrying_capacity(state: WorldState) -> float:
    """Maximum sustainable population, food sources x growth rate (at least 1)"""
    sources = int(state.source.sum())
    return max(1.0, sources * state.config.food_growth_rate)


def evolutionary_reward(state: WorldState, agent_id: int) -> float:
    """Evolutionary reward of an agent alive at t+1

    Args:
        state (WorldState): State at t+1 (after the full tick)
        agent_id (int): Agent id

    Raises:
        ValueError: Agent is dead; the terminal reward applies instead

    Returns:
        float: Sum of kinship with every living agent, self included
    """
    agent = state.agents.get(agent_id)
    if agent is None:
        raise ValueError(
            f"Agent is dead, use the terminal reward instead. agent_id={agent_id}"
        )
    return family_census(state, agent.genome)


def sugary_reward(state: WorldState, agent_id: int, events: TickEvents) -> float:
    """Sugary reward: kinship-weighted food harvested from tiles this tick

    Args:
        state (WorldState): State holding the agent and the harvesters' genomes
        agent_id (int): Agent id
        events (TickEvents): Events of the tick whose harvests count

    Raises:
        ValueError: Agent unknown to `state`

    Returns:
        float: Sum over harvesters j of k(g^i, g^j) * f^j
    """
    agent = state.agents.get(agent_id)
    if agent is None:
        raise ValueError(f"Unknown agent. agent_id={agent_id}")
    harvesters = [
        harvester_id
        for harvester_id in events.harvests
        if harvester_id in state.agents
    ]
    if len(harvesters) == 0:
        return 0.0
    kinships = kinship_matrix(
        state.allele_matrix([agent_id]), state.allele_matrix(harvesters)
    )[0]
    amounts = np.array([events.harvests[harvester_id] for harvester_id in harvesters])
    return float((kinships * amounts).sum())


def sugary_rewards(
    alleles: np.ndarray, agent_ids: list[int], events: TickEvents
) -> np.ndarray:
    """Sugary reward of every agent of a census at once

    Args:
        alleles (np.ndarray): (n, N) allele matrix of the census at t
        agent_ids (list[int]): Agent ids, row-aligned with `alleles`
        events (TickEvents): Events of tick t

    Returns:
        np.ndarray: Rewards, row-aligned with `agent_ids`
    """
    harvested = np.array([events.harvests.get(agent_id, 0.0) for agent_id in agent_ids])
    if len(agent_ids) == 0:
        return harvested
    return kinship_matrix(alleles, alleles) @ harvested
