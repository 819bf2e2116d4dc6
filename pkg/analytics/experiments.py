from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from logging import getLogger
from typing import Any

import numpy as np

from evdn.policy_pool import PolicyPool
from neural.network import QNetwork
from world.config import ReproductionMode, WorldConfig
from .config import EvaluationConfig
from .episodes import run_episode
from .metrics import EpisodeSummary
from .stats import (
    ConfidenceInterval,
    MeanTest,
    confidence_interval,
    series_confidence,
    two_sided_mean_test,
)

__logger = getLogger(__name__)

HEAD_TO_HEAD_ENTRIES = 4


def run_episodes(
    world_config: WorldConfig,
    pool: PolicyPool,
    assignment: tuple[int, ...],
    config: EvaluationConfig,
) -> list[EpisodeSummary]:
    """Run the seeded episodes of an experiment arm, in worker processes when `workers` > 1"""
    config.validate()
    run = partial(run_episode, world_config, pool, assignment, config.length, epsilon=config.epsilon)
    seeds = config.episode_seeds()
    if config.workers == 1:
        return [run(seed) for seed in seeds]
    with ProcessPoolExecutor(max_workers=config.workers) as executor:
        return list(executor.map(run, seeds))


def _episode_metrics(summary: EpisodeSummary) -> dict[str, float]:
    violence = [tick.violence_per_capita for tick in summary.ticks]
    return {
        "final_population": float(summary.population[-1]),
        "mean_population": float(summary.population.mean()),
        "survived": 1.0 if summary.survived() else 0.0,
        "births": summary.total("births"),
        "deaths": summary.total("deaths"),
        "attacks": summary.total("attacks"),
        "intra_family_attacks": summary.total("intra_family_attacks"),
        "violence_per_capita": float(np.mean(violence)) if len(violence) > 0 else 0.0,
        "mean_lifespan": summary.mean_lifespan(),
        "final_entropy": float(summary.entropy[-1]),
    }


@dataclass
class EvaluationResult:
    """Evaluation Result

    `metrics` holds the mean and 95% confidence interval of every
    per-episode metric over the episodes where it is defined.
    """

    summaries: list[EpisodeSummary]
    metrics: dict[str, ConfidenceInterval] = field(default_factory=dict)

    EPISODE_FIELDS = (
        "episode",
        "seed",
        "final_population",
        "mean_population",
        "survived",
        "births",
        "deaths",
        "attacks",
        "intra_family_attacks",
        "violence_per_capita",
        "mean_lifespan",
        "final_entropy",
    )

    def episode_rows(self) -> list[list[Any]]:
        rows = []
        for episode, summary in enumerate(self.summaries):
            metrics = _episode_metrics(summary)
            rows.append([episode, summary.seed] + [metrics[name] for name in self.EPISODE_FIELDS[2:]])
        return rows

    def population_series(self) -> tuple[np.ndarray, np.ndarray]:
        return series_confidence(np.stack([summary.population for summary in self.summaries]))

    def to_json_serializable(self) -> dict[str, Any]:
        return {name: interval.to_json_serializable() for name, interval in self.metrics.items()}


def evaluate(
    world_config: WorldConfig, pool: PolicyPool, config: EvaluationConfig
) -> EvaluationResult:
    """Evaluate a pool with the identity assignment

    Args:
        world_config (WorldConfig): World configuration
        pool (PolicyPool): Trained pool
        config (EvaluationConfig): Episodes, length, seed and ε

    Returns:
        EvaluationResult: Per-episode summaries and aggregated metrics with CIs
    """
    assignment = pool.identity_assignment(world_config.founder_count)
    summaries = run_episodes(world_config, pool, assignment, config)
    per_episode = [_episode_metrics(summary) for summary in summaries]
    metrics = {}
    for name in per_episode[0]:
        values = np.array([metrics_of[name] for metrics_of in per_episode])
        values = values[~np.isnan(values)]
        if values.size > 0:
            metrics[name] = confidence_interval(values)
    __logger.info(
        f"Evaluation finished. episodes={config.episodes} "
        f"final_population={metrics['final_population'].mean:.2f}"
    )
    return EvaluationResult(summaries, metrics)


@dataclass
class FamilySeries:
    """Per-episode family-size series of one experiment arm, (episodes, ticks + 1) each"""

    sizes: dict[int, np.ndarray]

    def confidence(self, family: int) -> tuple[np.ndarray, np.ndarray]:
        return series_confidence(self.sizes[family])


@dataclass
class HeadToHeadResult:
    """Head-to-head Result

    Entries 0 and 1 are side A, entries 2 and 3 side B; rows report families
    by founder genome. `gap_test` compares the final side sizes over the
    episodes.
    """

    summaries: list[EpisodeSummary]
    series: FamilySeries
    gap_test: MeanTest

    FIELDS = ("episode", "tick", "family", "size")

    def rows(self) -> list[list[Any]]:
        rows = []
        for episode, summary in enumerate(self.summaries):
            for tick, sizes in enumerate(summary.family_sizes):
                for family, size in enumerate(sizes):
                    rows.append([episode, tick, family, float(size)])
        return rows

    def to_json_serializable(self) -> dict[str, Any]:
        return {
            "entries": {
                str(index): confidence_interval(sizes[:, -1]).to_json_serializable()
                for index, sizes in self.series.sizes.items()
            },
            "gap_test": {"statistic": self.gap_test.statistic, "p_value": self.gap_test.p_value},
        }


def head_to_head(
    world_config: WorldConfig,
    entries: list[tuple[QNetwork, int]],
    config: EvaluationConfig,
) -> HeadToHeadResult:
    """Four policies, each controlling one founder family, in one asexual world

    Args:
        world_config (WorldConfig): World configuration, played with 4 founders
        entries (list[tuple[QNetwork, int]]): (network, founder genome) pairs, side A first
        config (EvaluationConfig): Episodes, length and seed

    Raises:
        ValueError: Not exactly 4 entries, or genomes not a permutation of 0..3

    Returns:
        HeadToHeadResult: Family-size series with CIs and the final gap test
    """
    if len(entries) != HEAD_TO_HEAD_ENTRIES:
        raise ValueError(
            f"Head-to-head takes exactly {HEAD_TO_HEAD_ENTRIES} (checkpoint, genome) pairs. "
            f"entries={len(entries)}"
        )
    genomes = [genome for _, genome in entries]
    if sorted(genomes) != list(range(HEAD_TO_HEAD_ENTRIES)):
        raise ValueError(f"Head-to-head genomes must be 0, 1, 2 and 3 once each. genomes={genomes}")
    if len({net.spec for net, _ in entries}) != 1:
        raise ValueError("Head-to-head networks differ in architecture.")

    world_config = replace(
        world_config,
        founder_count=HEAD_TO_HEAD_ENTRIES,
        reproduction_mode=ReproductionMode.ASEXUAL,
    )
    assignment = [0] * HEAD_TO_HEAD_ENTRIES
    for index, genome in enumerate(genomes):
        assignment[genome] = index
    pool = PolicyPool([net for net, _ in entries])
    summaries = run_episodes(world_config, pool, tuple(assignment), config)

    sizes = {
        index: np.stack([summary.family_sizes[:, genome] for summary in summaries])
        for index, genome in enumerate(genomes)
    }
    side_a = sizes[0][:, -1] + sizes[1][:, -1]
    side_b = sizes[2][:, -1] + sizes[3][:, -1]
    return HeadToHeadResult(summaries, FamilySeries(sizes), two_sided_mean_test(side_a, side_b))


@dataclass
class AblationResult:
    """Paired arms with and without the intra-family attack block"""

    family: int
    arms: dict[str, list[EpisodeSummary]]

    FIELDS = ("arm", "episode", "tick", "family_size", "clone_attacks")

    def series(self, arm: str) -> tuple[np.ndarray, np.ndarray]:
        return series_confidence(
            np.stack([summary.family_sizes[:, self.family] for summary in self.arms[arm]])
        )

    def clone_attacks(self, arm: str) -> int:
        return sum(
            tick.clone_attacks[self.family]
            for summary in self.arms[arm]
            for tick in summary.ticks
        )

    def rows(self) -> list[list[Any]]:
        rows = []
        for arm, summaries in self.arms.items():
            for episode, summary in enumerate(summaries):
                for tick, sizes in enumerate(summary.family_sizes):
                    attacks = summary.ticks[tick - 1].clone_attacks[self.family] if tick > 0 else 0
                    rows.append([arm, episode, tick, float(sizes[self.family]), attacks])
        return rows

    def to_json_serializable(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "arms": {
                arm: {
                    "final_family_size": confidence_interval(
                        [summary.final_family(self.family) for summary in summaries]
                    ).to_json_serializable(),
                    "clone_attacks": self.clone_attacks(arm),
                }
                for arm, summaries in self.arms.items()
            },
        }


def ablate_intra_family_attacks(
    world_config: WorldConfig, pool: PolicyPool, config: EvaluationConfig
) -> AblationResult:
    """Paired runs with attacks inside one founder family open and blocked

    Both arms use the same seeds; blocked attacks still draw their victim, so
    the arms only diverge through the voided attacks.
    """
    family = config.ablation_family
    if family >= world_config.founder_count:
        raise ValueError(
            f"Ablation family out of range. family={family} founders={world_config.founder_count}"
        )
    assignment = pool.identity_assignment(world_config.founder_count)
    arms = {
        "open": run_episodes(
            replace(world_config, blocked_attack_family=None), pool, assignment, config
        ),
        "blocked": run_episodes(
            replace(world_config, blocked_attack_family=family), pool, assignment, config
        ),
    }
    return AblationResult(family, arms)


@dataclass
class DriftResult:
    """Allele-entropy series with the kinship feature intact and zeroed"""

    arms: dict[str, list[EpisodeSummary]]

    FIELDS = ("arm", "episode", "tick", "entropy")

    def series(self, arm: str) -> tuple[np.ndarray, np.ndarray]:
        return series_confidence(np.stack([summary.entropy for summary in self.arms[arm]]))

    def rows(self) -> list[list[Any]]:
        return [
            [arm, episode, tick, float(entropy)]
            for arm, summaries in self.arms.items()
            for episode, summary in enumerate(summaries)
            for tick, entropy in enumerate(summary.entropy)
        ]

    def to_json_serializable(self) -> dict[str, Any]:
        return {
            arm: confidence_interval(
                [summary.entropy[-1] for summary in summaries]
            ).to_json_serializable()
            for arm, summaries in self.arms.items()
        }


def kin_masking_drift(
    world_config: WorldConfig, pool: PolicyPool, config: EvaluationConfig
) -> DriftResult:
    """Entropy series of paired runs with the kinship observation channel intact and zeroed"""
    assignment = pool.identity_assignment(world_config.founder_count)
    arms = {
        "intact": run_episodes(replace(world_config, mask_kinship=False), pool, assignment, config),
        "masked": run_episodes(replace(world_config, mask_kinship=True), pool, assignment, config),
    }
    return DriftResult(arms)
