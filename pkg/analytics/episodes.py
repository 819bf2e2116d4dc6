from dataclasses import dataclass, replace
from logging import getLogger
from typing import TextIO

import numpy as np

from evdn.acting import select_actions
from evdn.policy_pool import PolicyPool, network_slots
from kinrew.kinship import founder_family_sizes
from world.config import WorldConfig
from world.engine import init_world, step
from world.observation import observe_all
from world.recording import EpisodeRecorder
from world.state import Action, WorldState
from .entropy import distinct_alleles, state_allele_entropy
from .metrics import EpisodeSummary, TickMetrics

__logger = getLogger(__name__)


@dataclass
class PoolController:
    """Acts for every living agent with the network assigned to its founder family"""

    pool: PolicyPool
    assignment: tuple[int, ...]
    epsilon: float
    rng: np.random.Generator

    def __call__(self, state: WorldState) -> dict[int, Action]:
        agent_ids = state.living_ids()
        if self.epsilon >= 1.0:
            # Values are never looked at
            q_values = np.zeros((len(agent_ids), Action.COUNT))
        else:
            slots = network_slots(state, agent_ids, self.assignment)
            q_values = self.pool.q_values(observe_all(state, agent_ids), slots)
        actions = select_actions(q_values, self.epsilon, self.rng)
        return {
            agent_id: Action.from_index(int(action))
            for agent_id, action in zip(agent_ids, actions)
        }


def acting_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 1]))


def run_episode(
    world_config: WorldConfig,
    pool: PolicyPool,
    assignment: tuple[int, ...],
    length: int,
    seed: int,
    epsilon: float = 0.0,
    recorder_stream: TextIO | None = None,
    config_hash: str = "",
    until_fixation: bool = False,
) -> EpisodeSummary:
    """Run one seeded episode

    The world is seeded with `seed` and the acting RNG with a stream derived
    from it, so two runs with equal arguments are identical.

    Args:
        world_config (WorldConfig): World configuration, its seed is replaced by `seed`
        pool (PolicyPool): Policies
        assignment (tuple[int, ...]): Network index of every founder family
        length (int): Ticks to run
        seed (int): Episode seed
        epsilon (float, optional): Exploration probability. Defaults to 0.0.
        recorder_stream (TextIO | None, optional): Stream receiving the frame log. Defaults to None.
        config_hash (str, optional): Config hash written into the frame log. Defaults to "".
        until_fixation (bool, optional): Stop early once at most one allele is left. Defaults to False.

    Returns:
        EpisodeSummary: Series of the episode
    """
    if len(assignment) != world_config.founder_count:
        raise ValueError(
            "Assignment must cover every founder. "
            f"assignment={len(assignment)} founders={world_config.founder_count}"
        )
    state = init_world(replace(world_config, seed=seed))
    controller = PoolController(pool, assignment, epsilon, acting_rng(seed))
    recorder = (
        EpisodeRecorder(recorder_stream, state, config_hash)
        if recorder_stream is not None
        else None
    )

    family_sizes = [founder_family_sizes(state)]
    population = [state.population()]
    entropy = [state_allele_entropy(state)]
    ticks: list[TickMetrics] = []
    for _ in range(length):
        if until_fixation and len(distinct_alleles(state)) <= 1:
            break
        population_before = state.population()
        _, events = step(state, controller(state))
        ticks.append(TickMetrics.from_tick(events, population_before, state))
        family_sizes.append(founder_family_sizes(state))
        population.append(state.population())
        entropy.append(state_allele_entropy(state))
        if recorder is not None:
            recorder.record(state, events)

    __logger.debug(
        f"Episode finished. seed={seed} ticks={len(ticks)} population={state.population()}"
    )
    return EpisodeSummary(
        seed, np.array(family_sizes), np.array(population), np.array(entropy), ticks
    )
