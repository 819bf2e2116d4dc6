from dataclasses import dataclass
from typing import Any, Iterator

import numpy as np

from world.observation import Observation, ObservationBatch
from .composition import terminal_estimate


@dataclass(frozen=True)
class Experience:
    """One agent's transition of one tick

    `kinships` is aligned with the census at t. The survivors' greedy values
    and kinships feed the terminal estimate when `terminal` is set.
    """

    agent_id: int
    policy_slot: int
    observation: Observation
    action_index: int
    reward: float
    next_observation: Observation | None
    kinships: np.ndarray
    terminal: bool
    survivor_values: np.ndarray
    survivor_kinships: np.ndarray


def learning_target(experience: Experience, gamma: float, next_value: float) -> float:
    """Learning target y

    Args:
        experience (Experience): Transition
        gamma (float): Discount
        next_value (float): Joint greedy value of the agent at t+1

    Returns:
        float: r + γ * `next_value` for a survivor (episode truncation included),
            the terminal estimate for an agent that died this tick
    """
    if experience.terminal:
        return terminal_estimate(experience.survivor_values, experience.survivor_kinships)
    return experience.reward + gamma * next_value


@dataclass
class ExperienceBatch:
    """Transitions of every agent of one environment tick, row-aligned with `agent_ids`

    Rows are consumed by exactly one update and then dropped.
    """

    agent_ids: list[int]
    slots: np.ndarray
    observations: ObservationBatch
    actions: np.ndarray
    rewards: np.ndarray
    alive: np.ndarray
    kinships: np.ndarray
    chosen_values: np.ndarray
    next_observations: ObservationBatch
    next_kinships: np.ndarray
    next_greedy: np.ndarray

    def __len__(self) -> int:
        return len(self.agent_ids)

    def experience(self, row: int) -> Experience:
        next_row = {agent_id: index for index, agent_id in enumerate(self.next_observations.agent_ids)}
        agent_id = self.agent_ids[row]
        return Experience(
            agent_id,
            int(self.slots[row]),
            self.observations.observation(row),
            int(self.actions[row]),
            float(self.rewards[row]),
            (
                self.next_observations.observation(next_row[agent_id])
                if agent_id in next_row
                else None
            ),
            self.kinships[row],
            not bool(self.alive[row]),
            self.next_greedy,
            self.next_kinships[row],
        )

    def experiences(self) -> Iterator[Experience]:
        for row in range(len(self)):
            yield self.experience(row)

    def to_json_serializable(self) -> dict[str, Any]:
        return {
            "agent_ids": self.agent_ids,
            "slots": self.slots.tolist(),
            "actions": self.actions.tolist(),
            "rewards": self.rewards.tolist(),
            "alive": self.alive.tolist(),
            "chosen_values": self.chosen_values.tolist(),
            "next_greedy": self.next_greedy.tolist(),
        }
