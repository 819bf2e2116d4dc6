from collections import Counter
from dataclasses import dataclass
from typing import Any, Final, TextIO, Self

import numpy as np
import simplejson

from .config import WorldConfig
from .genome import Genome
from .state import TickEvents, WorldState

FORMAT_NAME: Final[str] = "kinlab-episode"
FORMAT_VERSION: Final[int] = 1


def family_label(genome: Genome) -> int:
    """Most frequent allele of a genome, lowest allele on ties"""
    counts = Counter(genome.alleles)
    return min(counts, key=lambda allele: (-counts[allele], allele))


@dataclass
class Frame:
    """One recorded tick of an episode

    `agents` rows are (id, x, y, family label).
    """

    tick: int
    food: np.ndarray
    agents: list[tuple[int, int, int, int]]
    events: list[dict[str, Any]]

    @classmethod
    def from_state(cls, state: WorldState, events: TickEvents | None = None) -> Self:
        agents = [
            (agent.id, agent.position[0], agent.position[1], family_label(agent.genome))
            for agent in state.agents.values()
        ]
        records = [] if events is None else events.to_records()
        return cls(state.tick, state.food.copy(), agents, records)

    def to_record(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "food": np.round(self.food, 6).tolist(),
            "agents": [list(agent) for agent in self.agents],
            "events": self.events,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> Self:
        return cls(
            record["tick"],
            np.asarray(record["food"], dtype=np.float64),
            [tuple(agent) for agent in record["agents"]],
            record["events"],
        )


@dataclass
class EpisodeHeader:
    """Episode log header line"""

    config: WorldConfig
    source: np.ndarray
    config_hash: str
    seed: int

    def to_record(self) -> dict[str, Any]:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "config": self.config.to_json_serializable(),
            "source": self.source.astype(int).tolist(),
            "config_hash": self.config_hash,
            "seed": self.seed,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> Self:
        if record.get("format") != FORMAT_NAME:
            raise ValueError(f"Not an episode log. format={record.get('format')!r}")
        if record.get("version") != FORMAT_VERSION:
            raise ValueError(f"Unsupported episode log version. version={record.get('version')}")
        return cls(
            WorldConfig.from_json_serializable(record["config"]),
            np.asarray(record["source"], dtype=bool),
            record["config_hash"],
            record["seed"],
        )


class EpisodeRecorder:
    """Writes an episode as line-delimited JSON: one header line, then one frame per tick"""

    def __init__(self, stream: TextIO, state: WorldState, config_hash: str = ""):
        self.__stream = stream
        header = EpisodeHeader(state.config, state.source, config_hash, state.config.seed)
        self.__write(header.to_record())
        self.__write(Frame.from_state(state).to_record())

    def __write(self, record: dict[str, Any]) -> None:
        self.__stream.write(simplejson.dumps(record, separators=(",", ":")))
        self.__stream.write("\n")

    def record(self, state: WorldState, events: TickEvents) -> None:
        self.__write(Frame.from_state(state, events).to_record())


def read_episode(stream: TextIO) -> tuple[EpisodeHeader, list[Frame]]:
    """Read an episode log

    Args:
        stream (TextIO): Input stream

    Raises:
        ValueError: Not an episode log

    Returns:
        tuple[EpisodeHeader, list[Frame]]: Header and frames, initial state first
    """
    first = stream.readline()
    if first == "":
        raise ValueError("Episode log is empty.")
    header = EpisodeHeader.from_record(simplejson.loads(first))
    frames = [
        Frame.from_record(simplejson.loads(line)) for line in stream if line.strip()
    ]
    return header, frames
