import numpy as np
from scipy.stats import entropy

from world.state import WorldState


def entropy_bits(frequencies: np.ndarray) -> float:
    """Shannon entropy in bits of a frequency vector (zeros allowed)

    Raises:
        ValueError: No positive frequency
    """
    frequencies = np.asarray(frequencies, dtype=np.float64)
    if frequencies.size == 0 or frequencies.sum() <= 0.0:
        raise ValueError("Entropy of an empty distribution.")
    return float(entropy(frequencies, base=2))


def allele_entropy(alleles: np.ndarray) -> float:
    """Allele entropy of a census

    Args:
        alleles (np.ndarray): (agents, genes) allele matrix of the living agents

    Raises:
        ValueError: Empty census

    Returns:
        float: Entropy in bits of the allele frequencies pooled over every genome position
    """
    if alleles.size == 0:
        raise ValueError("Allele entropy of an empty census.")
    _, counts = np.unique(alleles, return_counts=True)
    return entropy_bits(counts)


def state_allele_entropy(state: WorldState) -> float:
    """Allele entropy of the living population, 0 once extinct"""
    if state.population() == 0:
        return 0.0
    return allele_entropy(state.allele_matrix())


def distinct_alleles(state: WorldState) -> set[int]:
    """Alleles carried by the living population; at most one left means fixation or extinction"""
    return {allele for agent in state.agents.values() for allele in agent.genome.alleles}
