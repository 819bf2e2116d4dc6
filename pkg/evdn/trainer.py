import os
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, replace
from functools import partial
from logging import getLogger
from typing import Any, Callable, Self

import numpy as np
import simplejson
from tqdm import tqdm

from kinrew.rewards import RewardKind, sugary_rewards
from neural.checkpoint import NetworkCheckpoint
from neural.network import GradientBatch
from neural.optimizer import OptimizerState, apply_update
from neural.spec import NetworkSpec
from world.config import WorldConfig
from world.engine import init_world, step
from world.genome import kinship_matrix
from world.observation import observe_all
from world.snapshot import WorldSnapshot
from world.state import Action, TickEvents, WorldState
from .acting import select_actions
from .composition import (
    composed_output_gradients,
    greedy_joint_values,
    joint_q_batch,
    learning_targets,
)
from .config import TrainerConfig, episode_seeds
from .experience import ExperienceBatch
from .policy_pool import PolicyPool, network_slots

_TRAINER_STATE_FILE = "trainer.json"
_CHECKPOINT_DIRECTORY_PREFIX = "tick_"


@dataclass
class TrainingEnvironment:
    """One parallel environment and the bookkeeping of its current episode"""

    index: int
    episode: int
    state: WorldState
    length: int
    elapsed: int
    assignment: tuple[int, ...]
    acting_rng: np.random.Generator


@dataclass
class EnvironmentTick:
    """What happened in one environment during one trainer tick

    `state` is the environment state right after the tick; it is only valid
    until the next call to `train_epoch`.
    """

    env_index: int
    episode: int
    population_before: int
    events: TickEvents
    state: WorldState


@dataclass
class EpochReport:
    """Result of one trainer tick"""

    tick: int
    epsilon: float
    loss: float
    experience_count: int
    episodes_finished: int
    environments: list[EnvironmentTick]


def _census_kinships(alleles_a: np.ndarray, alleles_b: np.ndarray) -> np.ndarray:
    if alleles_a.shape[0] == 0 or alleles_b.shape[0] == 0:
        return np.zeros((alleles_a.shape[0], alleles_b.shape[0]))
    return kinship_matrix(alleles_a, alleles_b)


def collect_environment(
    pool: PolicyPool, reward_kind: RewardKind, env: TrainingEnvironment, epsilon: float
) -> tuple[TrainingEnvironment, ExperienceBatch, EnvironmentTick]:
    """Step one environment once under the networks of `pool`

    `env` is advanced in place and returned together with its experiences.
    `pool` is only read.

    Returns:
        tuple[TrainingEnvironment, ExperienceBatch, EnvironmentTick]: Environment, experiences and tick report
    """
    state = env.state
    agent_ids = state.living_ids()
    observations = observe_all(state, agent_ids)
    slots = network_slots(state, agent_ids, env.assignment)
    q_values = pool.q_values(observations, slots)
    actions = select_actions(q_values, epsilon, env.acting_rng)
    alleles = state.allele_matrix(agent_ids)
    kinships = _census_kinships(alleles, alleles)

    _, events = step(
        state,
        {agent_id: Action.from_index(int(action)) for agent_id, action in zip(agent_ids, actions)},
    )

    next_ids = state.living_ids()
    next_observations = observe_all(state, next_ids)
    next_slots = network_slots(state, next_ids, env.assignment)
    next_greedy = pool.q_values(next_observations, next_slots).max(axis=1, initial=-np.inf)
    next_kinships = _census_kinships(alleles, state.allele_matrix(next_ids))
    alive = np.array([agent_id in state.agents for agent_id in agent_ids], dtype=bool)

    match reward_kind:
        case RewardKind.EVOLUTIONARY:
            rewards = next_kinships.sum(axis=1)
        case RewardKind.SUGARY:
            rewards = sugary_rewards(alleles, agent_ids, events)
        case _:
            raise ValueError(f"Unknown reward kind. kind={reward_kind}")
    rewards = np.where(alive, rewards, 0.0)

    batch = ExperienceBatch(
        agent_ids,
        slots,
        observations,
        actions,
        rewards,
        alive,
        kinships,
        q_values[np.arange(len(agent_ids)), actions],
        next_observations,
        next_kinships,
        next_greedy,
    )
    return env, batch, EnvironmentTick(env.index, env.episode, len(agent_ids), events, state)


def _collect_shard(
    pool: PolicyPool,
    reward_kind: RewardKind,
    epsilon: float,
    environments: list[TrainingEnvironment],
) -> list[tuple[TrainingEnvironment, ExperienceBatch, EnvironmentTick]]:
    return [collect_environment(pool, reward_kind, env, epsilon) for env in environments]


class EvdnTrainer:
    """E-VDN Trainer

    Every trainer tick steps all parallel environments once, builds one batch
    holding one experience per agent alive before the tick, and applies one
    optimizer update per network. Experiences are dropped after the update.
    """

    __logger = getLogger(__name__)

    def __init__(
        self,
        world_config: WorldConfig,
        config: TrainerConfig,
        pool: PolicyPool,
        optimizer_states: list[OptimizerState] | None = None,
        tick: int = 0,
        environments: list[TrainingEnvironment] | None = None,
    ):
        world_config.validate()
        config.validate()
        self.world_config = world_config
        self.config = config
        self.pool = pool
        self.optimizer_states = (
            [OptimizerState() for _ in pool.nets] if optimizer_states is None else optimizer_states
        )
        self.tick = tick
        self.environments = (
            [self.__start_episode(index, 0) for index in range(config.env_count)]
            if environments is None
            else environments
        )
        self.__diagnostic: dict[str, Any] = {}

    @classmethod
    def create(cls, world_config: WorldConfig, config: TrainerConfig, spec: NetworkSpec) -> Self:
        return cls(world_config, config, PolicyPool.for_world(spec, world_config, config.seed))

    def __start_episode(self, env_index: int, episode: int) -> TrainingEnvironment:
        seeds = episode_seeds(self.config.seed, env_index, episode)
        schedule_rng = np.random.default_rng(seeds.schedule)
        length = int(
            schedule_rng.integers(self.config.train_length_min, self.config.train_length_max + 1)
        )
        assignment = self.pool.training_assignment(self.world_config.founder_count, schedule_rng)
        state = init_world(replace(self.world_config, seed=seeds.world))
        return TrainingEnvironment(
            env_index, episode, state, length, 0, assignment, np.random.default_rng(seeds.acting)
        )

    def __learn(self, batches: list[ExperienceBatch]) -> tuple[float, int]:
        experience_count = sum(len(batch) for batch in batches)
        if experience_count == 0:
            return 0.0, 0

        gamma = self.config.reward.gamma
        squared_error = 0.0
        gradients: dict[int, GradientBatch] = {}
        for batch in batches:
            if len(batch) == 0:
                continue
            next_values = greedy_joint_values(batch.next_kinships, batch.next_greedy)
            targets = learning_targets(batch.rewards, gamma, next_values, batch.alive)
            residuals = targets - joint_q_batch(batch.kinships, batch.chosen_values)
            squared_error += float((residuals**2).sum())

            output_gradients = np.zeros((len(batch), Action.COUNT))
            output_gradients[np.arange(len(batch)), batch.actions] = composed_output_gradients(
                batch.kinships, residuals, experience_count
            )
            for slot in map(int, np.unique(batch.slots)):
                rows = np.flatnonzero(batch.slots == slot)
                gradient = self.pool.nets[slot].backward_batch(
                    batch.observations.local[rows],
                    batch.observations.scalars[rows],
                    output_gradients[rows],
                )
                gradients[slot] = gradient if slot not in gradients else gradients[slot] + gradient

        loss = squared_error / experience_count
        if not np.isfinite(loss):
            self.__diagnostic = {
                "tick": self.tick,
                "loss": str(loss),
                "experience_count": experience_count,
                "batches": [batch.to_json_serializable() for batch in batches],
            }
            EvdnTrainer.__logger.error(f"Non-finite loss. tick={self.tick} loss={loss}")
            raise FloatingPointError(f"Non-finite loss. tick={self.tick} loss={loss}")

        for slot in sorted(gradients):
            self.pool.nets[slot], self.optimizer_states[slot] = apply_update(
                self.pool.nets[slot],
                gradients[slot],
                self.config.optimizer,
                self.optimizer_states[slot],
            )
        return loss, experience_count

    def __advance_episode(self, env: TrainingEnvironment) -> bool:
        env.elapsed += 1
        if env.state.population() > 0 and env.elapsed < env.length:
            return False
        EvdnTrainer.__logger.debug(
            f"Episode finished. env={env.index} episode={env.episode} ticks={env.elapsed} "
            f"population={env.state.population()}"
        )
        self.environments[env.index] = self.__start_episode(env.index, env.episode + 1)
        return True

    def __collect(
        self, epsilon: float, executor: Executor | None
    ) -> list[tuple[TrainingEnvironment, ExperienceBatch, EnvironmentTick]]:
        kind = self.config.reward.kind
        if executor is None or len(self.environments) == 1:
            return _collect_shard(self.pool, kind, epsilon, self.environments)
        shard_count = min(self.config.workers, len(self.environments))
        shards = [self.environments[shard::shard_count] for shard in range(shard_count)]
        run = partial(_collect_shard, self.pool, kind, epsilon)
        results = [result for shard in executor.map(run, shards) for result in shard]
        return sorted(results, key=lambda result: result[0].index)

    def train_epoch(self, executor: Executor | None = None) -> EpochReport:
        """Step every environment once and apply one update per network

        Rollouts run in `executor` when one is given: every worker steps a
        shard of the environments against a copy of the networks, and the
        update is applied here once all shards are back.

        Args:
            executor (Executor | None, optional): Rollout workers. Defaults to None.

        Raises:
            FloatingPointError: Non-finite loss; `diagnostic()` holds the dump

        Returns:
            EpochReport: Report
        """
        epsilon = self.config.epsilon.value(self.tick)
        batches: list[ExperienceBatch] = []
        environment_ticks: list[EnvironmentTick] = []
        for env, batch, environment_tick in self.__collect(epsilon, executor):
            self.environments[env.index] = env
            batches.append(batch)
            environment_ticks.append(environment_tick)

        loss, experience_count = self.__learn(batches)
        finished = sum(self.__advance_episode(env) for env in list(self.environments))
        report = EpochReport(
            self.tick, epsilon, loss, experience_count, finished, environment_ticks
        )
        self.tick += 1
        return report

    def train(
        self,
        checkpoint_root: str | None = None,
        on_epoch: Callable[[EpochReport], None] | None = None,
        progress: bool = False,
    ) -> None:
        """Train until `total_ticks`, checkpointing every `checkpoint_interval` ticks

        Rollouts run in `workers` processes when the configuration asks for more than one.

        Args:
            checkpoint_root (str | None, optional): Checkpoint directory root. Defaults to None.
            on_epoch (Callable[[EpochReport], None] | None, optional): Called after every tick. Defaults to None.
            progress (bool, optional): Show a progress bar. Defaults to False.
        """
        EvdnTrainer.__logger.info(
            f"Training started. tick={self.tick} total_ticks={self.config.total_ticks} "
            f"envs={len(self.environments)} networks={len(self.pool)} workers={self.config.workers}"
        )
        with (
            ProcessPoolExecutor(max_workers=self.config.workers)
            if self.config.workers > 1
            else nullcontext()
        ) as executor:
            for _ in tqdm(
                range(self.tick, self.config.total_ticks), desc="E-VDN", disable=not progress
            ):
                report = self.train_epoch(executor)
                if on_epoch is not None:
                    on_epoch(report)
                if checkpoint_root is not None and self.tick % self.config.checkpoint_interval == 0:
                    self.save(checkpoint_directory(checkpoint_root, self.tick))
        if checkpoint_root is not None:
            self.save(checkpoint_directory(checkpoint_root, self.tick))
        EvdnTrainer.__logger.info(f"Training finished. tick={self.tick}")

    def diagnostic(self) -> dict[str, Any]:
        return self.__diagnostic

    def save(self, directory: str) -> None:
        """Save networks, optimizer moments, environment states and RNGs

        Args:
            directory (str): Checkpoint directory
        """
        os.makedirs(directory, exist_ok=True)
        for slot, (net, optimizer_state) in enumerate(zip(self.pool.nets, self.optimizer_states)):
            NetworkCheckpoint(net, self.config.optimizer.kind, optimizer_state).save(
                os.path.join(directory, f"policy_{slot}.klqn")
            )
        environments = []
        for env in self.environments:
            with open(os.path.join(directory, f"env_{env.index}.klws"), "wb") as snapshot_file:
                WorldSnapshot(env.state).write(snapshot_file)
            environments.append(
                {
                    "index": env.index,
                    "episode": env.episode,
                    "length": env.length,
                    "elapsed": env.elapsed,
                    "assignment": list(env.assignment),
                    "acting_rng": env.acting_rng.bit_generator.state,
                }
            )
        with open(os.path.join(directory, _TRAINER_STATE_FILE), "w", encoding="utf-8") as state_file:
            simplejson.dump(
                {"format": "kinlab-evdn-trainer", "version": 1, "tick": self.tick, "environments": environments},
                state_file,
                indent=2,
            )
        EvdnTrainer.__logger.info(f"Checkpoint written. directory={directory} tick={self.tick}")

    @classmethod
    def resume(
        cls,
        directory: str,
        world_config: WorldConfig,
        config: TrainerConfig,
        spec: NetworkSpec,
    ) -> Self:
        """Resume from a checkpoint directory written by `save`

        Raises:
            ValueError: Checkpoint architecture differs from `spec`, or the
                checkpoint does not match the environment count
        """
        pool = PolicyPool.load(directory)
        if pool.spec() != spec:
            raise ValueError(
                "Checkpoint architecture does not match the configuration. "
                f"checkpoint={pool.spec()} config={spec}"
            )
        optimizer_states = []
        for slot in range(len(pool)):
            checkpoint = NetworkCheckpoint.load(os.path.join(directory, f"policy_{slot}.klqn"))
            optimizer_states.append(
                OptimizerState() if checkpoint.optimizer_state is None else checkpoint.optimizer_state
            )

        with open(os.path.join(directory, _TRAINER_STATE_FILE), "r", encoding="utf-8") as state_file:
            trainer_state = simplejson.load(state_file)
        if len(trainer_state["environments"]) != config.env_count:
            raise ValueError(
                "Checkpoint environment count differs from the configuration. "
                f"checkpoint={len(trainer_state['environments'])} config={config.env_count}"
            )
        environments = []
        for record in trainer_state["environments"]:
            with open(os.path.join(directory, f"env_{record['index']}.klws"), "rb") as snapshot_file:
                state = WorldSnapshot.read(snapshot_file).state
            acting_rng = np.random.default_rng()
            acting_rng.bit_generator.state = record["acting_rng"]
            environments.append(
                TrainingEnvironment(
                    record["index"],
                    record["episode"],
                    state,
                    record["length"],
                    record["elapsed"],
                    tuple(record["assignment"]),
                    acting_rng,
                )
            )
        EvdnTrainer.__logger.info(
            f"Training resumed. directory={directory} tick={trainer_state['tick']}"
        )
        return cls(world_config, config, pool, optimizer_states, trainer_state["tick"], environments)


def checkpoint_directory(root: str, tick: int) -> str:
    return os.path.join(root, f"{_CHECKPOINT_DIRECTORY_PREFIX}{tick:010d}")


def latest_checkpoint(root: str) -> str | None:
    """Most recent checkpoint directory under `root`, or None"""
    if not os.path.isdir(root):
        return None
    names = sorted(
        name
        for name in os.listdir(root)
        if name.startswith(_CHECKPOINT_DIRECTORY_PREFIX)
        and os.path.isfile(os.path.join(root, name, _TRAINER_STATE_FILE))
    )
    if len(names) == 0:
        return None
    return os.path.join(root, names[-1])
