from dataclasses import dataclass


@dataclass(frozen=True)
class EvaluationConfig:
    """Evaluation Configuration

    Episode `e` of an experiment is seeded with `seed + e`; every arm of an
    experiment reuses the same seeds.
    """

    episodes: int = 20
    length: int = 500
    seed: int = 0
    epsilon: float = 0.0
    workers: int = 1
    ablation_family: int = 0

    def validate(self) -> None:
        """Validate

        Raises:
            ValueError: Invalid configuration
        """
        if self.episodes < 1:
            raise ValueError(f"`episodes` must be at least 1. episodes={self.episodes}")
        if self.length < 1:
            raise ValueError(f"`length` must be at least 1. length={self.length}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"`epsilon` must be in [0, 1]. epsilon={self.epsilon}")
        if self.workers < 1:
            raise ValueError(f"`workers` must be at least 1. workers={self.workers}")
        if self.ablation_family < 0:
            raise ValueError(
                f"`ablation_family` must not be negative. ablation_family={self.ablation_family}"
            )

    def episode_seeds(self) -> list[int]:
        return [self.seed + episode for episode in range(self.episodes)]
