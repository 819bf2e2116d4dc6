import math
from dataclasses import dataclass

from neural.spec import Architecture, NetworkSpec

# Parameter dimension above which a full covariance matrix is refused
DEFAULT_MAX_DIMENSION = 25_000


def default_population_size(dimension: int) -> int:
    """λ = 4 + floor(3 ln d)"""
    return 4 + int(math.floor(3.0 * math.log(dimension)))


def check_dimension(spec: NetworkSpec, max_dimension: int = DEFAULT_MAX_DIMENSION) -> int:
    """Refuse networks whose full covariance does not fit

    Args:
        spec (NetworkSpec): Network specification
        max_dimension (int, optional): Largest accepted parameter count

    Raises:
        ValueError: LargeMLP, or more parameters than `max_dimension`

    Returns:
        int: Parameter count
    """
    dimension = spec.parameter_count()
    if spec.architecture is Architecture.LARGE_MLP or dimension > max_dimension:
        raise ValueError(
            "parameter count exceeds CMA-ES guard. "
            f"architecture={spec.architecture.value} parameters={dimension} max_dimension={max_dimension}"
        )
    return dimension


@dataclass(frozen=True)
class CmaesConfig:
    """CMA-ES Configuration

    `population_size` 0 selects the default λ for the parameter dimension.
    The stage switches from cumulative to final family size once the median
    candidate set of a generation produces `stage_switch_births` births per
    family and episode.
    """

    sigma0: float = 0.1
    population_size: int = 0
    generations: int = 50
    episodes_per_candidate: int = 3
    episode_length: int = 500
    stage_switch_births: float = 1.0
    max_dimension: int = DEFAULT_MAX_DIMENSION
    eigenvalue_floor: float = 1e-20
    workers: int = 1
    checkpoint_interval: int = 1
    seed: int = 0

    def validate(self) -> None:
        """Validate

        Raises:
            ValueError: Invalid configuration
        """
        if self.sigma0 <= 0.0:
            raise ValueError(f"`sigma0` must be positive. sigma0={self.sigma0}")
        if self.population_size != 0 and self.population_size < 2:
            raise ValueError(
                f"`population_size` must be 0 or at least 2. population_size={self.population_size}"
            )
        if self.generations < 0:
            raise ValueError(f"`generations` must not be negative. generations={self.generations}")
        if self.episodes_per_candidate < 1:
            raise ValueError(
                "`episodes_per_candidate` must be at least 1. "
                f"episodes_per_candidate={self.episodes_per_candidate}"
            )
        if self.episode_length < 1:
            raise ValueError(f"`episode_length` must be at least 1. episode_length={self.episode_length}")
        if self.eigenvalue_floor <= 0.0:
            raise ValueError(f"`eigenvalue_floor` must be positive. eigenvalue_floor={self.eigenvalue_floor}")
        if self.workers < 1:
            raise ValueError(f"`workers` must be at least 1. workers={self.workers}")
        if self.checkpoint_interval < 1:
            raise ValueError(
                f"`checkpoint_interval` must be at least 1. checkpoint_interval={self.checkpoint_interval}"
            )

    def resolved_population_size(self, dimension: int) -> int:
        return self.population_size if self.population_size > 0 else default_population_size(dimension)
