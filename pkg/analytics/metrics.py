from dataclasses import dataclass, field
from typing import Any

import numpy as np

from world.genome import Genome
from world.state import AttackEvent, DeathCause, TickEvents, WorldState


def _related(a: Genome, b: Genome) -> bool:
    return any(allele_a == allele_b for allele_a, allele_b in zip(a.alleles, b.alleles))


def _mean_or_nan(values: list[float]) -> float:
    return float(np.mean(values)) if len(values) > 0 else float("nan")


def allele_histogram(state: WorldState) -> np.ndarray:
    """Count of every founder allele over all positions of the living agents"""
    counts = np.zeros(state.config.founder_count, dtype=np.int64)
    if state.population() > 0:
        values, value_counts = np.unique(state.allele_matrix(), return_counts=True)
        counts[values] = value_counts
    return counts


def clone_attack_counts(attacks: list[AttackEvent], founder_count: int) -> tuple[int, ...]:
    """Attacks between two carriers of the pure founder genome, per founder family"""
    counts = [0] * founder_count
    for attack in attacks:
        alleles = set(attack.attacker_genome.alleles)
        if attack.attacker_genome == attack.victim_genome and len(alleles) == 1:
            family = alleles.pop()
            if family < founder_count:
                counts[family] += 1
    return tuple(counts)


@dataclass(frozen=True)
class TickMetrics:
    """Macro-statistics of one tick

    An attack is intra-family when attacker and victim share at least one
    allele. Lifespans and kill ages are averaged over this tick's events
    only and are NaN when there is none. `clone_attacks[f]` counts attacks
    between two agents both carrying founder f's genome.
    """

    CSV_FIELDS = (
        "tick",
        "population",
        "births",
        "deaths_starvation",
        "deaths_age",
        "deaths_attack",
        "attacks",
        "intra_family_attacks",
        "inter_family_attacks",
        "violence_per_capita",
        "mean_lifespan",
        "mean_cannibal_age",
        "mean_victim_age",
        "allele_histogram",
        "clone_attacks",
    )

    tick: int
    population: int
    births: int
    deaths_starvation: int
    deaths_age: int
    deaths_attack: int
    attacks: int
    intra_family_attacks: int
    inter_family_attacks: int
    violence_per_capita: float
    mean_lifespan: float
    mean_cannibal_age: float
    mean_victim_age: float
    allele_histogram: tuple[int, ...] = field(default_factory=tuple)
    clone_attacks: tuple[int, ...] = field(default_factory=tuple)

    @property
    def deaths(self) -> int:
        return self.deaths_starvation + self.deaths_age + self.deaths_attack

    @classmethod
    def from_tick(
        cls, events: TickEvents, population_before: int, state: WorldState
    ) -> "TickMetrics":
        """Metrics of a tick

        Args:
            events (TickEvents): Events of the tick
            population_before (int): Population before the tick
            state (WorldState): State after the tick

        Returns:
            TickMetrics: Metrics
        """
        deaths = events.deaths
        attacks = events.attacks
        intra = [attack for attack in attacks if _related(attack.attacker_genome, attack.victim_genome)]
        cannibal_kills = [attack for attack in intra if attack.killed]
        causes = [death.cause for death in deaths]
        return cls(
            events.tick,
            state.population(),
            len(events.births),
            causes.count(DeathCause.STARVATION),
            causes.count(DeathCause.AGE),
            causes.count(DeathCause.ATTACK),
            len(attacks),
            len(intra),
            len(attacks) - len(intra),
            len(attacks) / population_before if population_before > 0 else 0.0,
            _mean_or_nan([death.age for death in deaths]),
            _mean_or_nan([attack.attacker_age for attack in cannibal_kills]),
            _mean_or_nan([attack.victim_age for attack in cannibal_kills]),
            tuple(int(count) for count in allele_histogram(state)),
            clone_attack_counts(attacks, state.config.founder_count),
        )

    def to_row(self) -> list[Any]:
        return [
            self.tick,
            self.population,
            self.births,
            self.deaths_starvation,
            self.deaths_age,
            self.deaths_attack,
            self.attacks,
            self.intra_family_attacks,
            self.inter_family_attacks,
            self.violence_per_capita,
            self.mean_lifespan,
            self.mean_cannibal_age,
            self.mean_victim_age,
            " ".join(str(count) for count in self.allele_histogram),
            " ".join(str(count) for count in self.clone_attacks),
        ]


@dataclass
class EpisodeSummary:
    """Time series of one episode

    Series hold the initial state plus one entry per tick, so they are one
    longer than the number of ticks run.
    """

    seed: int
    family_sizes: np.ndarray
    population: np.ndarray
    entropy: np.ndarray
    ticks: list[TickMetrics] = field(default_factory=list)

    @property
    def final_sizes(self) -> np.ndarray:
        return self.family_sizes[-1]

    def cumulative_family(self, family: int) -> float:
        return float(self.family_sizes[:, family].sum())

    def final_family(self, family: int) -> float:
        return float(self.family_sizes[-1, family])

    def survived(self) -> bool:
        return bool(self.population[-1] > 0)

    def total(self, field_name: str) -> float:
        return float(sum(getattr(tick, field_name) for tick in self.ticks))

    def mean_lifespan(self) -> float:
        """Mean age at death over every agent that died, survivors excluded"""
        ages = [
            tick.mean_lifespan * tick.deaths
            for tick in self.ticks
            if tick.deaths > 0
        ]
        deaths = sum(tick.deaths for tick in self.ticks)
        return float(sum(ages) / deaths) if deaths > 0 else float("nan")

    def to_json_serializable(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "final_sizes": self.final_sizes.tolist(),
            "final_population": int(self.population[-1]),
            "final_entropy": float(self.entropy[-1]),
            "ticks": len(self.ticks),
        }
