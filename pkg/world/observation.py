from dataclasses import dataclass

import numpy as np

from .genome import kinship_matrix
from .state import WorldState

CROP_SIZE = 5
CROP_RADIUS = CROP_SIZE // 2

CHANNELS = ("food_available", "occupied", "age", "food_stored", "kinship", "health")
CHANNEL_COUNT = len(CHANNELS)
KINSHIP_CHANNEL = CHANNELS.index("kinship")

SCALARS = ("x", "y", "family_size", "population")
SCALAR_COUNT = len(SCALARS)


@dataclass(frozen=True)
class Observation:
    """Observation

    `local` is the 5x5x6 crop centred on the agent, `scalars` the absolute
    position, family size and population.
    """

    local: np.ndarray
    scalars: np.ndarray


@dataclass(frozen=True)
class ObservationBatch:
    """Observations of several agents, row-aligned with `agent_ids`"""

    agent_ids: list[int]
    local: np.ndarray
    scalars: np.ndarray

    def __len__(self) -> int:
        return len(self.agent_ids)

    def observation(self, row: int) -> Observation:
        return Observation(self.local[row], self.scalars[row])

    def rows(self, agent_ids: list[int]) -> "ObservationBatch":
        index = {agent_id: row for row, agent_id in enumerate(self.agent_ids)}
        rows = [index[agent_id] for agent_id in agent_ids]
        return ObservationBatch(list(agent_ids), self.local[rows], self.scalars[rows])


def __base_planes(state: WorldState) -> np.ndarray:
    """Observer-independent feature planes, all channels except kinship"""
    config = state.config
    planes = np.zeros((config.height, config.width, CHANNEL_COUNT))
    planes[:, :, 0] = state.food / config.food_capacity
    planes[:, :, 1] = state.occupant >= 0
    for agent in state.agents.values():
        x, y = agent.position
        planes[y, x, 2] = agent.age / config.longevity
        planes[y, x, 3] = agent.food_stored / (4.0 * config.endowment)
        planes[y, x, 5] = agent.health / config.initial_health
    return planes


def observe_all(state: WorldState, agent_ids: list[int] | None = None) -> ObservationBatch:
    """Observe several agents at once

    Args:
        state (WorldState): World state
        agent_ids (list[int] | None, optional): Observers. Defaults to every living agent.

    Raises:
        ValueError: Observer is dead or unknown

    Returns:
        ObservationBatch: Observations
    """
    config = state.config
    if agent_ids is None:
        agent_ids = state.living_ids()
    for agent_id in agent_ids:
        if agent_id not in state.agents:
            raise ValueError(f"Cannot observe a dead or unknown agent. agent_id={agent_id}")

    count = len(agent_ids)
    local = np.zeros((count, CROP_SIZE, CROP_SIZE, CHANNEL_COUNT))
    scalars = np.zeros((count, SCALAR_COUNT))
    if count == 0:
        return ObservationBatch([], local, scalars)

    living_ids = state.living_ids()
    column = np.full(state.next_agent_id + 1, -1, dtype=np.int64)
    column[living_ids] = np.arange(len(living_ids))
    kinships = kinship_matrix(
        state.allele_matrix(agent_ids), state.allele_matrix(living_ids)
    )

    positions = np.array([state.agents[agent_id].position for agent_id in agent_ids])
    offsets = np.arange(-CROP_RADIUS, CROP_RADIUS + 1)
    ys = (positions[:, 1, None] + offsets[None, :]) % config.height
    xs = (positions[:, 0, None] + offsets[None, :]) % config.width

    planes = __base_planes(state)
    local[:] = planes[ys[:, :, None], xs[:, None, :]]

    occupants = state.occupant[ys[:, :, None], xs[:, None, :]]
    if not config.mask_kinship:
        columns = np.where(occupants >= 0, column[np.maximum(occupants, 0)], 0)
        kin = np.take_along_axis(
            kinships, columns.reshape(count, -1), axis=1
        ).reshape(count, CROP_SIZE, CROP_SIZE)
        local[:, :, :, KINSHIP_CHANNEL] = np.where(occupants >= 0, kin, 0.0)

    scalars[:, 0] = positions[:, 0] / config.width
    scalars[:, 1] = positions[:, 1] / config.height
    scalars[:, 2] = kinships.sum(axis=1) / config.count_soft_cap
    scalars[:, 3] = len(living_ids) / config.count_soft_cap
    return ObservationBatch(list(agent_ids), local, scalars)


def observe(state: WorldState, agent_id: int) -> Observation:
    """Observe one agent

    Args:
        state (WorldState): World state
        agent_id (int): Observer id

    Raises:
        ValueError: Observer is dead or unknown

    Returns:
        Observation: Observation
    """
    return observe_all(state, [agent_id]).observation(0)
