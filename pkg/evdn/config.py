from dataclasses import dataclass, field

import numpy as np

from kinrew.rewards import RewardConfig
from neural.optimizer import OptimizerConfig


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear ε decay from `start` to `end` over `decay_ticks` trainer ticks"""

    start: float = 1.0
    end: float = 0.05
    decay_ticks: int = 100_000

    def validate(self) -> None:
        if not (0.0 <= self.start <= 1.0 and 0.0 <= self.end <= 1.0):
            raise ValueError(
                f"ε bounds must be in [0, 1]. start={self.start} end={self.end}"
            )
        if self.decay_ticks < 0:
            raise ValueError(f"`decay_ticks` must not be negative. decay_ticks={self.decay_ticks}")

    def value(self, tick: int) -> float:
        if self.decay_ticks == 0 or tick >= self.decay_ticks:
            return self.end
        return self.start + (self.end - self.start) * tick / self.decay_ticks


@dataclass(frozen=True)
class TrainerConfig:
    """E-VDN Trainer Configuration

    Training episodes last a length drawn uniformly from
    [`train_length_min`, `train_length_max`]; evaluation episodes last
    `test_length` ticks.
    """

    env_count: int = 16
    train_length_min: int = 450
    train_length_max: int = 550
    test_length: int = 500
    total_ticks: int = 50_000
    checkpoint_interval: int = 1_000
    workers: int = 1
    seed: int = 0
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    reward: RewardConfig = field(default_factory=RewardConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def validate(self) -> None:
        """Validate

        Raises:
            ValueError: Invalid configuration
        """
        if self.env_count < 1:
            raise ValueError(f"`env_count` must be at least 1. env_count={self.env_count}")
        if not 1 <= self.train_length_min <= self.train_length_max:
            raise ValueError(
                "Episode length range must satisfy 1 <= min <= max. "
                f"train_length_min={self.train_length_min} train_length_max={self.train_length_max}"
            )
        if self.test_length < 1:
            raise ValueError(f"`test_length` must be at least 1. test_length={self.test_length}")
        if self.total_ticks < 0:
            raise ValueError(f"`total_ticks` must not be negative. total_ticks={self.total_ticks}")
        if self.checkpoint_interval < 1:
            raise ValueError(
                f"`checkpoint_interval` must be at least 1. checkpoint_interval={self.checkpoint_interval}"
            )
        if self.workers < 1:
            raise ValueError(f"`workers` must be at least 1. workers={self.workers}")
        self.epsilon.validate()
        self.reward.validate()
        self.optimizer.validate()


@dataclass(frozen=True)
class EpisodeSeeds:
    """Seeds of one training episode of one environment"""

    world: int
    acting: np.random.SeedSequence
    schedule: np.random.SeedSequence


def episode_seeds(seed: int, env_index: int, episode: int) -> EpisodeSeeds:
    """Derive the world, acting and schedule seeds of an episode

    Args:
        seed (int): Trainer seed
        env_index (int): Environment index
        episode (int): Episode counter of the environment

    Returns:
        EpisodeSeeds: Seeds
    """
    sequence = np.random.SeedSequence([seed, env_index, episode])
    world_sequence, acting, schedule = sequence.spawn(3)
    return EpisodeSeeds(int(world_sequence.generate_state(1)[0]), acting, schedule)
