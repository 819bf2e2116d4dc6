import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from logging import getLogger
from typing import Callable, Self

import numpy as np
from tqdm import tqdm

from evdn.policy_pool import PolicyPool
from neural.network import QNetwork
from neural.spec import NetworkSpec
from world.config import ReproductionMode, WorldConfig
from .checkpoint import CmaesCheckpoint, EliteRecord
from .config import CmaesConfig, check_dimension
from .fitness import CandidateEvaluation, FitnessStage, evaluate_fitness
from .state import CmaState, sample_generation, update

CHECKPOINT_FILE = "cmaes.klcm"


@dataclass(frozen=True)
class GenerationReport:
    """Result of one CMA-ES generation"""

    generation: int
    stage: FitnessStage
    mean_fitness: np.ndarray
    best_fitness: np.ndarray
    elite_fitness: np.ndarray
    median_births_per_family: float
    stage_switched: bool


def candidate_seeds(seed: int, generation: int, candidate: int, count: int) -> list[int]:
    """Episode seeds of candidate set `candidate` of a generation"""
    sequence = np.random.SeedSequence([seed, generation, candidate])
    return [int(value) for value in sequence.generate_state(count)]


class CmaesTrainer:
    """CMA-ES Trainer

    Keeps one independent search distribution per founder family of an
    asexual world. Candidate k of every family plays in the same episodes.
    """

    __logger = getLogger(__name__)

    def __init__(
        self,
        world_config: WorldConfig,
        config: CmaesConfig,
        spec: NetworkSpec,
        states: list[CmaState] | None = None,
        generation: int = 0,
        stage: FitnessStage = FitnessStage.CUMULATIVE_FAMILY,
        elites: list[EliteRecord] | None = None,
    ):
        world_config.validate()
        config.validate()
        if world_config.reproduction_mode is not ReproductionMode.ASEXUAL:
            raise ValueError("CMA-ES runs in the asexual world only.")
        self.dimension = check_dimension(spec, config.max_dimension)
        self.world_config = world_config
        self.config = config
        self.spec = spec
        self.generation = generation
        self.stage = stage
        if states is None:
            population_size = config.resolved_population_size(self.dimension)
            states = [
                CmaState.create(
                    QNetwork.create(spec, config.seed + family).parameters,
                    config.sigma0,
                    population_size,
                    config.seed + family,
                )
                for family in range(world_config.founder_count)
            ]
        if len(states) != world_config.founder_count:
            raise ValueError(
                "One search distribution per founder family is required. "
                f"states={len(states)} founders={world_config.founder_count}"
            )
        if any(state.dimension != self.dimension for state in states):
            raise ValueError("Search distribution dimension does not match the network.")
        self.states = states
        self.elites = [EliteRecord() for _ in states] if elites is None or len(elites) == 0 else elites

    def __evaluate(self, samples: list[np.ndarray]) -> list[CandidateEvaluation]:
        population_size = min(len(family_samples) for family_samples in samples)
        jobs = [
            (
                [family_samples[candidate] for family_samples in samples],
                candidate_seeds(
                    self.config.seed,
                    self.generation,
                    candidate,
                    self.config.episodes_per_candidate,
                ),
            )
            for candidate in range(population_size)
        ]
        run = partial(
            _evaluate_job,
            self.world_config,
            self.spec,
            self.stage,
            self.config.episode_length,
        )
        if self.config.workers == 1:
            return [run(job) for job in jobs]
        with ProcessPoolExecutor(max_workers=self.config.workers) as executor:
            return list(executor.map(run, jobs))

    def run_generation(self) -> GenerationReport:
        """Sample, evaluate and update every family once

        Returns:
            GenerationReport: Report
        """
        samples = [
            sample_generation(state, self.config.eigenvalue_floor) for state in self.states
        ]
        evaluations = self.__evaluate(samples)
        fitnesses = np.stack([evaluation.fitnesses for evaluation in evaluations])

        for family, state in enumerate(self.states):
            family_samples = samples[family][: len(evaluations)]
            update(state, family_samples, fitnesses[:, family])
            best = int(np.argmax(fitnesses[:, family]))
            if fitnesses[best, family] > self.elites[family].fitness:
                self.elites[family] = EliteRecord(
                    float(fitnesses[best, family]), family_samples[best].copy()
                )

        median_births = float(np.median([evaluation.births_per_family for evaluation in evaluations]))
        switched = False
        if (
            self.stage is FitnessStage.CUMULATIVE_FAMILY
            and median_births >= self.config.stage_switch_births
        ):
            self.stage = FitnessStage.FINAL_FAMILY
            # Fitness scales differ between stages
            self.elites = [
                EliteRecord(float("-inf"), elite.parameters) for elite in self.elites
            ]
            switched = True
            CmaesTrainer.__logger.info(
                f"Fitness stage switched. generation={self.generation} "
                f"median_births_per_family={median_births:.2f}"
            )

        report = GenerationReport(
            self.generation,
            FitnessStage.CUMULATIVE_FAMILY if switched else self.stage,
            fitnesses.mean(axis=0),
            fitnesses.max(axis=0),
            np.array([elite.fitness for elite in self.elites]),
            median_births,
            switched,
        )
        self.generation += 1
        return report

    def train(
        self,
        checkpoint_path: str | None = None,
        on_generation: Callable[[GenerationReport], None] | None = None,
        progress: bool = False,
    ) -> None:
        """Run generations until `generations`, checkpointing every `checkpoint_interval`"""
        CmaesTrainer.__logger.info(
            f"CMA-ES started. generation={self.generation} generations={self.config.generations} "
            f"dimension={self.dimension} families={len(self.states)} "
            f"population_size={self.states[0].population_size}"
        )
        for _ in tqdm(
            range(self.generation, self.config.generations), desc="CMA-ES", disable=not progress
        ):
            report = self.run_generation()
            if on_generation is not None:
                on_generation(report)
            if checkpoint_path is not None and self.generation % self.config.checkpoint_interval == 0:
                self.save(checkpoint_path)
        if checkpoint_path is not None:
            self.save(checkpoint_path)
        CmaesTrainer.__logger.info(f"CMA-ES finished. generation={self.generation}")

    def mean_pool(self) -> PolicyPool:
        """Networks at the distribution means, one per founder family"""
        return PolicyPool([QNetwork(self.spec, state.mean) for state in self.states])

    def elite_pool(self) -> PolicyPool:
        """Best candidates seen, the mean where a family has none"""
        return PolicyPool(
            [
                QNetwork(self.spec, state.mean if elite.parameters is None else elite.parameters)
                for state, elite in zip(self.states, self.elites)
            ]
        )

    def save(self, path: str) -> None:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        CmaesCheckpoint(
            self.generation, self.stage, self.states, self.elites, np.random.get_state()
        ).save(path)
        CmaesTrainer.__logger.info(f"Checkpoint written. path={path} generation={self.generation}")

    @classmethod
    def resume(
        cls, path: str, world_config: WorldConfig, config: CmaesConfig, spec: NetworkSpec
    ) -> Self:
        """Resume from a checkpoint written by `save`

        Raises:
            ValueError: Checkpoint dimension does not match `spec`
        """
        checkpoint = CmaesCheckpoint.load(path)
        if checkpoint.global_rng_state is not None:
            np.random.set_state(checkpoint.global_rng_state)
        return cls(
            world_config,
            config,
            spec,
            checkpoint.states,
            checkpoint.generation,
            checkpoint.stage,
            checkpoint.elites,
        )


def _evaluate_job(
    world_config: WorldConfig,
    spec: NetworkSpec,
    stage: FitnessStage,
    length: int,
    job: tuple[list[np.ndarray], list[int]],
) -> CandidateEvaluation:
    candidates, seeds = job
    return evaluate_fitness(world_config, spec, candidates, stage, seeds, length)
