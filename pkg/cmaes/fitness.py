from dataclasses import dataclass
from enum import Enum
from typing import Self

import numpy as np

from analytics.episodes import run_episode
from analytics.metrics import EpisodeSummary
from evdn.policy_pool import PolicyPool
from neural.network import QNetwork
from neural.spec import NetworkSpec
from world.config import WorldConfig


class FitnessStage(Enum):
    """Fitness Stage

    Cumulative family size first, final family size once agents reproduce.
    """

    CUMULATIVE_FAMILY = "cumulative_family"
    FINAL_FAMILY = "final_family"

    def id(self) -> int:
        return {FitnessStage.CUMULATIVE_FAMILY: 1, FitnessStage.FINAL_FAMILY: 2}[self]

    @classmethod
    def from_id(cls, stage_id: int) -> Self:
        for stage in cls:
            if stage.id() == stage_id:
                return stage
        raise ValueError(f"Unknown fitness stage id. stage_id={stage_id}")


def family_fitness(summary: EpisodeSummary, family: int, stage: FitnessStage) -> float:
    """Σ_t |family_t| over ticks 0..L, or |family_L|"""
    match stage:
        case FitnessStage.CUMULATIVE_FAMILY:
            return summary.cumulative_family(family)
        case FitnessStage.FINAL_FAMILY:
            return summary.final_family(family)
        case _:
            raise ValueError(f"Unknown fitness stage. stage={stage}")


@dataclass(frozen=True)
class CandidateEvaluation:
    """Fitness of one candidate set, averaged over its episodes"""

    fitnesses: np.ndarray
    births_per_family: float


def evaluate_fitness(
    world_config: WorldConfig,
    spec: NetworkSpec,
    candidates: list[np.ndarray],
    stage: FitnessStage,
    seeds: list[int],
    length: int = 500,
) -> CandidateEvaluation:
    """Fitness of one candidate per founder family

    Candidate f controls founder family f; every seed runs one greedy episode.

    Args:
        world_config (WorldConfig): Asexual world configuration
        spec (NetworkSpec): Network specification of the candidates
        candidates (list[np.ndarray]): One parameter vector per founder
        stage (FitnessStage): Fitness stage
        seeds (list[int]): Episode seeds
        length (int, optional): Episode length. Defaults to 500.

    Raises:
        ValueError: Candidate count differs from the founder count

    Returns:
        CandidateEvaluation: Mean fitness per family and mean births per family and episode
    """
    if len(candidates) != world_config.founder_count:
        raise ValueError(
            "One candidate per founder family is required. "
            f"candidates={len(candidates)} founders={world_config.founder_count}"
        )
    pool = PolicyPool([QNetwork(spec, candidate) for candidate in candidates])
    assignment = pool.identity_assignment(world_config.founder_count)
    fitnesses = np.zeros((len(seeds), len(candidates)))
    births = np.zeros(len(seeds))
    for row, seed in enumerate(seeds):
        summary = run_episode(world_config, pool, assignment, length, seed)
        fitnesses[row] = [
            family_fitness(summary, family, stage) for family in range(len(candidates))
        ]
        births[row] = summary.total("births") / len(candidates)
    return CandidateEvaluation(fitnesses.mean(axis=0), float(births.mean()))
