from dataclasses import dataclass
from typing import Self

import numpy as np


@dataclass(frozen=True)
class Genome:
    """Genome

    Fixed-length vector of non-negative integer alleles. There is no mutation
    operator, so a genome never changes after the agent carrying it is born.
    """

    alleles: tuple[int, ...]

    def __post_init__(self):
        if len(self.alleles) < 1:
            raise ValueError("Genome must have at least one allele.")
        for allele in self.alleles:
            if allele < 0:
                raise ValueError(f"Alleles must be non-negative. allele={allele}")

    @classmethod
    def founder(cls, founder_index: int, length: int) -> Self:
        """Founder genome, every allele equal to the founder index

        Args:
            founder_index (int): Founder index
            length (int): Genome length

        Returns:
            Self: Instance of this class
        """
        return cls((founder_index,) * length)

    @classmethod
    def from_array(cls, array: np.ndarray) -> Self:
        return cls(tuple(int(allele) for allele in array))

    def __len__(self) -> int:
        return len(self.alleles)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alleles, dtype=np.int64)

    def recombine(self, other: "Genome", rng: np.random.Generator) -> "Genome":
        """Recombine with another genome

        A uniformly random half of the positions is taken from this genome and
        the other half from `other`.

        Args:
            other (Genome): Second parent genome
            rng (np.random.Generator): Random stream

        Raises:
            ValueError: Genome lengths differ.

        Returns:
            Genome: Child genome
        """
        if len(other) != len(self):
            raise ValueError(
                f"Genome lengths differ. length={len(self)} other_length={len(other)}"
            )

        length = len(self)
        from_self = np.zeros(length, dtype=bool)
        from_self[rng.permutation(length)[: length // 2]] = True
        alleles = np.where(from_self, self.as_array(), other.as_array())
        return Genome.from_array(alleles)


def genome_matrix(genomes: list[Genome]) -> np.ndarray:
    """Stack genomes into an (agents, genes) integer matrix

    Args:
        genomes (list[Genome]): Genomes

    Returns:
        np.ndarray: Allele matrix
    """
    if len(genomes) == 0:
        return np.zeros((0, 0), dtype=np.int64)
    return np.stack([genome.as_array() for genome in genomes])


def kinship_matrix(alleles_a: np.ndarray, alleles_b: np.ndarray) -> np.ndarray:
    """Pairwise fraction of positionally identical alleles

    Args:
        alleles_a (np.ndarray): (m, N) allele matrix
        alleles_b (np.ndarray): (n, N) allele matrix

    Raises:
        ValueError: Genome lengths differ.

    Returns:
        np.ndarray: (m, n) kinship matrix with values in {0, 1/N, ..., 1}
    """
    if alleles_a.shape[0] == 0 or alleles_b.shape[0] == 0:
        return np.zeros((alleles_a.shape[0], alleles_b.shape[0]))
    if alleles_a.shape[1] != alleles_b.shape[1]:
        raise ValueError(
            f"Genome lengths differ. length_a={alleles_a.shape[1]} length_b={alleles_b.shape[1]}"
        )
    matches = alleles_a[:, None, :] == alleles_b[None, :, :]
    return matches.sum(axis=2) / alleles_a.shape[1]
