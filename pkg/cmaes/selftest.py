from dataclasses import dataclass
from logging import getLogger

import numpy as np

from .config import default_population_size
from .state import CmaState, sample_generation, update

__logger = getLogger(__name__)


@dataclass(frozen=True)
class SelftestResult:
    dimension: int
    generations: int
    best_value: float
    converged: bool


def sphere(x: np.ndarray) -> np.ndarray:
    return np.sum(np.atleast_2d(x) ** 2, axis=1)


def sphere_selftest(
    dimension: int = 20,
    max_generations: int = 200,
    target: float = 1e-8,
    seed: int = 1,
) -> SelftestResult:
    """Minimise the sphere function with the same strategy wrapper used for training

    Args:
        dimension (int, optional): Dimension. Defaults to 20.
        max_generations (int, optional): Generation budget. Defaults to 200.
        target (float, optional): Value to reach. Defaults to 1e-8.
        seed (int, optional): Seed. Defaults to 1.

    Returns:
        SelftestResult: Generations used and best value reached
    """
    rng = np.random.default_rng(seed)
    state = CmaState.create(
        rng.uniform(-1.0, 1.0, size=dimension), 0.5, default_population_size(dimension), seed
    )
    best = float("inf")
    generation = 0
    while generation < max_generations and best >= target:
        candidates = sample_generation(state)
        values = sphere(candidates)
        update(state, candidates, -values)
        best = min(best, float(values.min()))
        generation += 1
    __logger.info(
        f"Sphere self-test finished. dimension={dimension} generations={generation} best={best:.3e}"
    )
    return SelftestResult(dimension, generation, best, best < target)
