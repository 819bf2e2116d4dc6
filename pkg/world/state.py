import copy
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Any, Self

import numpy as np

from .config import WorldConfig
from .genome import Genome, genome_matrix


class Move(IntEnum):
    """Movement Action"""

    STAY = 0
    NORTH = 1
    EAST = 2
    SOUTH = 3
    WEST = 4


# (dx, dy) per move, North is towards y = 0
MOVE_OFFSETS: dict[Move, tuple[int, int]] = {
    Move.STAY: (0, 0),
    Move.NORTH: (0, -1),
    Move.EAST: (1, 0),
    Move.SOUTH: (0, 1),
    Move.WEST: (-1, 0),
}

NEIGHBOR_MOVES = (Move.NORTH, Move.EAST, Move.SOUTH, Move.WEST)


@dataclass(frozen=True)
class Action:
    """Agent Action

    Network head index = move + 5 * attack.
    """

    COUNT = 10

    move: Move = Move.STAY
    attack: bool = False

    @classmethod
    def from_index(cls, index: int) -> Self:
        """From network head index

        Args:
            index (int): Head index in [0, 10)

        Raises:
            ValueError: Index out of range

        Returns:
            Self: Instance of this class
        """
        if not 0 <= index < Action.COUNT:
            raise ValueError(f"Action index out of range. index={index}")
        return cls(Move(index % 5), index >= 5)

    def index(self) -> int:
        return int(self.move) + (5 if self.attack else 0)


class TileKind(Enum):
    """Tile Kind"""

    FOOD_SOURCE = "food_source"
    DIRT = "dirt"


@dataclass(frozen=True)
class Tile:
    """Tile

    Read-only view of one grid cell.
    """

    kind: TileKind
    occupied: bool
    food_available: float


@dataclass
class AgentState:
    """Agent State"""

    id: int
    position: tuple[int, int]
    health: int
    age: int
    food_stored: float
    genome: Genome
    policy_slot: int = 0

    def is_fertile(self, config: WorldConfig) -> bool:
        """Is fertile

        Args:
            config (WorldConfig): World configuration

        Returns:
            bool: True if food exceeds the threshold and age is inside the window
        """
        return (
            self.food_stored > config.fertility_threshold()
            and config.fertility_start <= self.age <= config.fertility_end
        )

    def to_json_serializable(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "position": list(self.position),
            "health": self.health,
            "age": self.age,
            "food_stored": self.food_stored,
            "genome": list(self.genome.alleles),
            "policy_slot": self.policy_slot,
        }


class DeathCause(Enum):
    """Death Cause"""

    STARVATION = "starvation"
    AGE = "age"
    ATTACK = "attack"


@dataclass(frozen=True)
class HarvestEvent:
    """Harvest Event"""

    tick: int
    agent_id: int
    amount: float

    def to_record(self) -> dict[str, Any]:
        return {
            "kind": "harvest",
            "tick": self.tick,
            "agent_id": self.agent_id,
            "amount": self.amount,
        }


@dataclass(frozen=True)
class BirthEvent:
    """Birth Event"""

    tick: int
    child_id: int
    parent_ids: tuple[int, ...]
    position: tuple[int, int]
    genome: Genome

    def to_record(self) -> dict[str, Any]:
        return {
            "kind": "birth",
            "tick": self.tick,
            "child_id": self.child_id,
            "parent_ids": list(self.parent_ids),
            "position": list(self.position),
            "genome": list(self.genome.alleles),
        }


@dataclass(frozen=True)
class DeathEvent:
    """Death Event"""

    tick: int
    agent_id: int
    cause: DeathCause
    age: int
    food_stored: float
    position: tuple[int, int]
    genome: Genome

    def to_record(self) -> dict[str, Any]:
        return {
            "kind": "death",
            "tick": self.tick,
            "agent_id": self.agent_id,
            "cause": self.cause.value,
            "age": self.age,
            "food_stored": self.food_stored,
            "position": list(self.position),
            "genome": list(self.genome.alleles),
        }


@dataclass(frozen=True)
class AttackEvent:
    """Attack Event"""

    tick: int
    attacker_id: int
    victim_id: int
    attacker_age: int
    victim_age: int
    attacker_genome: Genome
    victim_genome: Genome
    killed: bool
    food_gained: float

    def to_record(self) -> dict[str, Any]:
        return {
            "kind": "attack",
            "tick": self.tick,
            "attacker_id": self.attacker_id,
            "victim_id": self.victim_id,
            "attacker_age": self.attacker_age,
            "victim_age": self.victim_age,
            "attacker_genome": list(self.attacker_genome.alleles),
            "victim_genome": list(self.victim_genome.alleles),
            "killed": self.killed,
            "food_gained": self.food_gained,
        }


WorldEvent = HarvestEvent | BirthEvent | DeathEvent | AttackEvent


@dataclass
class TickEvents:
    """Events and food flows of one tick"""

    tick: int
    events: list[WorldEvent] = field(default_factory=list)
    harvests: dict[int, float] = field(default_factory=dict)
    food_eaten: float = 0.0
    food_destroyed: float = 0.0
    food_grown: float = 0.0

    @property
    def births(self) -> list[BirthEvent]:
        return [event for event in self.events if isinstance(event, BirthEvent)]

    @property
    def deaths(self) -> list[DeathEvent]:
        return [event for event in self.events if isinstance(event, DeathEvent)]

    @property
    def attacks(self) -> list[AttackEvent]:
        return [event for event in self.events if isinstance(event, AttackEvent)]

    def to_records(self) -> list[dict[str, Any]]:
        return [event.to_record() for event in self.events]


@dataclass
class WorldState:
    """World State

    Grid arrays are indexed [y, x]. `occupant` holds the id of the agent on a
    tile or -1.
    """

    config: WorldConfig
    tick: int
    food: np.ndarray
    source: np.ndarray
    occupant: np.ndarray
    agents: dict[int, AgentState]
    rng: np.random.Generator
    next_agent_id: int = 0
    event_log: list[WorldEvent] = field(default_factory=list)

    @classmethod
    def empty(cls, config: WorldConfig) -> Self:
        """Empty world with food sources at capacity

        Args:
            config (WorldConfig): World configuration

        Returns:
            Self: Instance of this class
        """
        config.validate()
        rng = np.random.default_rng(config.seed)
        source = config.food_layout.source_mask(config.width, config.height, rng)
        food = np.where(source, config.food_capacity, 0.0)
        occupant = np.full((config.height, config.width), -1, dtype=np.int64)
        return cls(config, 0, food, source, occupant, {}, rng)

    def copy(self) -> "WorldState":
        return copy.deepcopy(self)

    def wrap(self, x: int, y: int) -> tuple[int, int]:
        return x % self.config.width, y % self.config.height

    def neighbors(self, position: tuple[int, int]) -> list[tuple[int, int]]:
        """4-neighbourhood in N, E, S, W order (toroidal)"""
        x, y = position
        return [
            self.wrap(x + MOVE_OFFSETS[move][0], y + MOVE_OFFSETS[move][1])
            for move in NEIGHBOR_MOVES
        ]

    def tile(self, x: int, y: int) -> Tile:
        kind = TileKind.FOOD_SOURCE if self.source[y, x] else TileKind.DIRT
        return Tile(kind, bool(self.occupant[y, x] >= 0), float(self.food[y, x]))

    def is_occupied(self, position: tuple[int, int]) -> bool:
        x, y = position
        return bool(self.occupant[y, x] >= 0)

    def agent_at(self, position: tuple[int, int]) -> AgentState | None:
        x, y = position
        agent_id = int(self.occupant[y, x])
        if agent_id < 0:
            return None
        return self.agents[agent_id]

    def empty_neighbors(self, position: tuple[int, int]) -> list[tuple[int, int]]:
        return [
            neighbor
            for neighbor in self.neighbors(position)
            if not self.is_occupied(neighbor)
        ]

    def place_agent(
        self,
        position: tuple[int, int],
        genome: Genome,
        food_stored: float | None = None,
        health: int | None = None,
        age: int = 0,
        policy_slot: int = 0,
    ) -> AgentState:
        """Place a new agent

        Args:
            position (tuple[int, int]): Tile coordinates
            genome (Genome): Genome
            food_stored (float | None, optional): Food. Defaults to the endowment.
            health (int | None, optional): Health. Defaults to the initial health.
            age (int, optional): Age. Defaults to 0.
            policy_slot (int, optional): Controlling policy index. Defaults to 0.

        Raises:
            ValueError: Tile already occupied
            ValueError: Genome length differs from the configuration

        Returns:
            AgentState: Placed agent
        """
        position = self.wrap(*position)
        if self.is_occupied(position):
            raise ValueError(f"Tile already occupied. position={position}")
        if len(genome) != self.config.genome_length:
            raise ValueError(
                f"Genome length differs from the configuration. length={len(genome)}"
            )

        agent = AgentState(
            self.next_agent_id,
            position,
            self.config.initial_health if health is None else health,
            age,
            self.config.endowment if food_stored is None else food_stored,
            genome,
            policy_slot,
        )
        self.next_agent_id += 1
        self.agents[agent.id] = agent
        self.occupant[position[1], position[0]] = agent.id
        return agent

    def remove_agent(self, agent_id: int) -> AgentState:
        agent = self.agents.pop(agent_id)
        x, y = agent.position
        self.occupant[y, x] = -1
        return agent

    def move_agent(self, agent_id: int, position: tuple[int, int]) -> None:
        agent = self.agents[agent_id]
        x, y = agent.position
        self.occupant[y, x] = -1
        agent.position = position
        self.occupant[position[1], position[0]] = agent_id

    def living_ids(self) -> list[int]:
        return list(self.agents.keys())

    def population(self) -> int:
        return len(self.agents)

    def allele_matrix(self, agent_ids: list[int] | None = None) -> np.ndarray:
        if agent_ids is None:
            agent_ids = self.living_ids()
        return genome_matrix([self.agents[agent_id].genome for agent_id in agent_ids])

    def founder_genomes(self) -> list[Genome]:
        return [
            Genome.founder(founder, self.config.genome_length)
            for founder in range(self.config.founder_count)
        ]

    def total_tile_food(self) -> float:
        return float(self.food.sum())

    def total_agent_food(self) -> float:
        return float(sum(agent.food_stored for agent in self.agents.values()))
