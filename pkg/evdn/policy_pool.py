import os
from dataclasses import dataclass
from logging import getLogger
from typing import Self

import numpy as np

from neural.checkpoint import NetworkCheckpoint
from neural.network import QNetwork
from neural.spec import NetworkSpec
from world.config import ReproductionMode, WorldConfig
from world.observation import ObservationBatch
from world.state import Action, WorldState

_POLICY_FILE_FORMAT = "policy_{slot}.klqn"


@dataclass
class PolicyPool:
    """Policy Pool

    One network per founder family in the asexual world, one shared network
    in the sexual world. An assignment maps every founder index to the
    network that controls its descendants for one episode.
    """

    __logger = getLogger(__name__)

    nets: list[QNetwork]

    @classmethod
    def create(cls, spec: NetworkSpec, count: int, seed: int) -> Self:
        if count < 1:
            raise ValueError(f"A policy pool needs at least one network. count={count}")
        return cls([QNetwork.create(spec, seed + slot) for slot in range(count)])

    @classmethod
    def for_world(cls, spec: NetworkSpec, config: WorldConfig, seed: int) -> Self:
        """Pool sized for a world: one network per founder (asexual) or one in total (sexual)"""
        count = (
            config.founder_count
            if config.reproduction_mode is ReproductionMode.ASEXUAL
            else 1
        )
        return cls.create(spec, count, seed)

    def __len__(self) -> int:
        return len(self.nets)

    def spec(self) -> NetworkSpec:
        return self.nets[0].spec

    def training_assignment(
        self, founder_count: int, rng: np.random.Generator
    ) -> tuple[int, ...]:
        """Networks for the founders of a training episode, sampled with replacement"""
        if len(self.nets) == 1:
            return (0,) * founder_count
        return tuple(int(slot) for slot in rng.integers(0, len(self.nets), size=founder_count))

    def identity_assignment(self, founder_count: int) -> tuple[int, ...]:
        """Founder f is controlled by network f (or by the single shared network)

        Raises:
            ValueError: Pool size matches neither one nor the founder count
        """
        if len(self.nets) == 1:
            return (0,) * founder_count
        if len(self.nets) != founder_count:
            raise ValueError(
                "Identity assignment needs one network per founder. "
                f"networks={len(self.nets)} founders={founder_count}"
            )
        return tuple(range(founder_count))

    def q_values(self, batch: ObservationBatch, slots: np.ndarray) -> np.ndarray:
        """Action values of a batch, every row evaluated by the network of its slot

        Args:
            batch (ObservationBatch): Observations
            slots (np.ndarray): Network index of every row

        Returns:
            np.ndarray: (B, 10) action values
        """
        q_values = np.zeros((len(batch), Action.COUNT))
        for slot in np.unique(slots):
            rows = np.flatnonzero(slots == slot)
            q_values[rows] = self.nets[int(slot)].forward_batch(
                batch.local[rows], batch.scalars[rows]
            )
        return q_values

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        for slot, net in enumerate(self.nets):
            NetworkCheckpoint(net).save(
                os.path.join(directory, _POLICY_FILE_FORMAT.format(slot=slot))
            )

    @classmethod
    def load(cls, directory: str) -> Self:
        """Load every `policy_<slot>.klqn` of a directory

        Raises:
            ValueError: No policy file, or networks of different architectures
        """
        nets: list[QNetwork] = []
        while os.path.isfile(
            path := os.path.join(directory, _POLICY_FILE_FORMAT.format(slot=len(nets)))
        ):
            nets.append(NetworkCheckpoint.load(path).net)
        if len(nets) == 0:
            raise ValueError(f"No policy checkpoint found. directory={directory}")
        if any(net.spec != nets[0].spec for net in nets):
            raise ValueError(f"Policies of a pool differ in architecture. directory={directory}")
        PolicyPool.__logger.info(f"Policy pool loaded. directory={directory} networks={len(nets)}")
        return cls(nets)


def network_slots(
    state: WorldState, agent_ids: list[int], assignment: tuple[int, ...]
) -> np.ndarray:
    """Network index of every agent, through its founder family"""
    return np.array(
        [assignment[state.agents[agent_id].policy_slot] for agent_id in agent_ids],
        dtype=np.int64,
    )
