import numpy as np

from world.genome import Genome, genome_matrix, kinship_matrix
from world.state import WorldState


def kinship(a: Genome, b: Genome) -> float:
    """Kinship between two genomes

    Args:
        a (Genome): First genome
        b (Genome): Second genome

    Raises:
        ValueError: Genome lengths differ.

    Returns:
        float: Fraction of positionally identical alleles, in [0, 1]
    """
    if len(a) != len(b):
        raise ValueError(f"Genome lengths differ. length_a={len(a)} length_b={len(b)}")
    matches = sum(1 for allele_a, allele_b in zip(a.alleles, b.alleles) if allele_a == allele_b)
    return matches / len(a)


def kinship_to_population(state: WorldState, genome: Genome) -> np.ndarray:
    """Kinship of `genome` with every living agent, in `living_ids()` order"""
    if state.population() == 0:
        return np.zeros(0)
    return kinship_matrix(genome_matrix([genome]), state.allele_matrix())[0]


def family_census(state: WorldState, genome: Genome) -> float:
    """n = sum of kinship between `genome` and every living agent"""
    return float(kinship_to_population(state, genome).sum())


def founder_family_sizes(state: WorldState) -> np.ndarray:
    """Family size of every founder, sum over agents of kinship with the founder genome

    In the asexual world this is the head count of each family; in the sexual
    world it is the founder-allele frequency. The sizes always sum to the
    population because every allele descends from a founder.
    """
    founders = genome_matrix(state.founder_genomes())
    if state.population() == 0:
        return np.zeros(len(founders))
    return kinship_matrix(founders, state.allele_matrix()).sum(axis=1)
