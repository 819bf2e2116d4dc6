from logging import getLogger
from typing import Self

import cma
import numpy as np

__logger = getLogger(__name__)


class CmaState:
    """One search distribution N(m, σ²C), backed by `cma.CMAEvolutionStrategy`

    Fitness is maximised; the strategy minimises the negated values.
    """

    def __init__(self, strategy: cma.CMAEvolutionStrategy):
        self.strategy = strategy

    @classmethod
    def create(cls, mean: np.ndarray, sigma: float, population_size: int, seed: int) -> Self:
        """New distribution

        Args:
            mean (np.ndarray): Initial mean
            sigma (float): Initial step size
            population_size (int): λ
            seed (int): Sampling seed

        Returns:
            Self: Instance of this class
        """
        options = {
            "popsize": population_size,
            # cma treats seed 0 as "seed from the clock"
            "seed": seed + 1,
            "verbose": -9,
            "tolfun": 0.0,
            "tolx": 0.0,
            "tolfunhist": 0.0,
            "tolstagnation": int(1e9),
            "tolconditioncov": float("inf"),
        }
        return cls(cma.CMAEvolutionStrategy(np.asarray(mean, dtype=np.float64).tolist(), sigma, options))

    @property
    def mean(self) -> np.ndarray:
        return np.array(self.strategy.mean, dtype=np.float64)

    @property
    def sigma(self) -> float:
        return float(self.strategy.sigma)

    @property
    def generation(self) -> int:
        return int(self.strategy.countiter)

    @property
    def population_size(self) -> int:
        return int(self.strategy.popsize)

    @property
    def dimension(self) -> int:
        return int(self.strategy.N)


def repair_covariance(state: CmaState, eigenvalue_floor: float) -> bool:
    """Raise covariance eigenvalues below `eigenvalue_floor` to the floor

    Reads the eigendecomposition `cma` keeps for sampling (`sm.B`, `sm.D`
    with D² the eigenvalues), so a healthy covariance costs no decomposition.

    Returns:
        bool: True if the covariance was repaired
    """
    sampler = state.strategy.sm
    eigenvectors = getattr(sampler, "B", None)
    scales = getattr(sampler, "D", None)
    if eigenvectors is None or scales is None or np.ndim(eigenvectors) != 2:
        return False
    eigenvalues = np.asarray(scales, dtype=np.float64) ** 2
    if np.all(np.isfinite(eigenvalues)) and eigenvalues.min() >= eigenvalue_floor:
        return False
    __logger.warning(
        f"Covariance is not positive definite, raising eigenvalues to the floor. "
        f"min_eigenvalue={np.nanmin(eigenvalues)} floor={eigenvalue_floor}"
    )
    eigenvectors = np.asarray(eigenvectors, dtype=np.float64)
    eigenvalues = np.where(np.isfinite(eigenvalues), eigenvalues, eigenvalue_floor)
    sampler.C = (eigenvectors * np.maximum(eigenvalues, eigenvalue_floor)) @ eigenvectors.T
    if hasattr(sampler, "update_now"):
        sampler.update_now(-1)
    return True


def sample_generation(state: CmaState, eigenvalue_floor: float = 1e-20) -> np.ndarray:
    """λ draws from N(m, σ²C)

    Args:
        state (CmaState): Distribution
        eigenvalue_floor (float, optional): Smallest accepted covariance eigenvalue

    Returns:
        np.ndarray: (λ, d) candidates
    """
    repair_covariance(state, eigenvalue_floor)
    return np.array(state.strategy.ask(), dtype=np.float64)


def update(state: CmaState, candidates: np.ndarray, fitnesses: np.ndarray) -> CmaState:
    """Rank-based mean, step-size and covariance update

    Args:
        state (CmaState): Distribution that produced `candidates`
        candidates (np.ndarray): (λ, d) evaluated candidates, any order
        fitnesses (np.ndarray): (λ,) fitness of every candidate, higher is better

    Raises:
        ValueError: Candidate and fitness counts differ, or a fitness is not finite

    Returns:
        CmaState: The updated distribution (same instance)
    """
    fitnesses = np.asarray(fitnesses, dtype=np.float64)
    if len(candidates) != len(fitnesses):
        raise ValueError(
            f"Candidate and fitness counts differ. candidates={len(candidates)} fitnesses={len(fitnesses)}"
        )
    if not np.all(np.isfinite(fitnesses)):
        raise ValueError("Fitness values must be finite.")
    state.strategy.tell([np.asarray(candidate) for candidate in candidates], (-fitnesses).tolist())
    return state
