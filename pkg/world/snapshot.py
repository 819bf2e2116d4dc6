from dataclasses import dataclass
from io import BytesIO
from typing import BinaryIO, Final, Self

import numpy as np
import simplejson
from fastcrc import crc16

from .config import WorldConfig
from .genome import Genome
from .state import AgentState, WorldState

_MAGIC_BYTES: Final[bytes] = b"KLWS"
_VERSION: Final[int] = 1


def _read_exact(stream: BinaryIO, length: int) -> bytes:
    buffer = stream.read(length)
    if len(buffer) < length:
        raise ValueError("Too less read bytes.")
    return buffer


def _write_section(stream: BinaryIO, payload: bytes) -> None:
    stream.write(len(payload).to_bytes(4, "big"))
    stream.write(payload)


def _read_section(stream: BinaryIO) -> bytes:
    length = int.from_bytes(_read_exact(stream, 4), "big")
    return _read_exact(stream, length)


def canonical_json(value) -> bytes:
    return simplejson.dumps(value, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass
class WorldSnapshot:
    """World Snapshot

    Canonical binary serialization of a WorldState, version 1:

        magic "KLWS" | u16 version | section config JSON | u64 tick
        | u64 next agent id | section RNG state JSON | u1[H*W] source mask
        | >f8[H*W] tile food | u32 agent count | agent records | u16 CRC

    Agent record: u64 id, u32 x, u32 y, u32 health, u32 age, >f8 food,
    u32 policy slot, u16 genome length, u32 alleles. Integers are big-endian.
    The trailing CRC-16/GENIBUS covers every preceding byte.
    """

    state: WorldState

    @classmethod
    def read(cls, stream: BinaryIO) -> Self:
        """Read

        Args:
            stream (BinaryIO): Input stream

        Raises:
            ValueError: Invalid magic bytes, unsupported version or CRC mismatch

        Returns:
            Self: Instance of this class
        """
        start = stream.tell()
        magic_bytes = _read_exact(stream, 4)
        if magic_bytes != _MAGIC_BYTES:
            raise ValueError(
                f"Invalid magic bytes: expected {_MAGIC_BYTES!r}, got {magic_bytes!r}"
            )
        version = int.from_bytes(_read_exact(stream, 2), "big")
        if version != _VERSION:
            raise ValueError(f"Unsupported snapshot version. version={version}")

        config = WorldConfig.from_json_serializable(
            simplejson.loads(_read_section(stream))
        )
        tick = int.from_bytes(_read_exact(stream, 8), "big")
        next_agent_id = int.from_bytes(_read_exact(stream, 8), "big")
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = simplejson.loads(_read_section(stream))

        tiles = config.width * config.height
        source = np.frombuffer(_read_exact(stream, tiles), dtype=np.uint8)
        source = source.reshape(config.height, config.width).astype(bool)
        food = np.frombuffer(_read_exact(stream, 8 * tiles), dtype=">f8")
        food = food.reshape(config.height, config.width).astype(np.float64)

        occupant = np.full((config.height, config.width), -1, dtype=np.int64)
        agents: dict[int, AgentState] = {}
        agent_count = int.from_bytes(_read_exact(stream, 4), "big")
        for _ in range(agent_count):
            buffer = _read_exact(stream, 38)
            agent_id = int.from_bytes(buffer[0:8], "big")
            x = int.from_bytes(buffer[8:12], "big")
            y = int.from_bytes(buffer[12:16], "big")
            health = int.from_bytes(buffer[16:20], "big")
            age = int.from_bytes(buffer[20:24], "big")
            food_stored = float(np.frombuffer(buffer[24:32], dtype=">f8")[0])
            policy_slot = int.from_bytes(buffer[32:36], "big")
            genome_length = int.from_bytes(buffer[36:38], "big")
            alleles_buffer = _read_exact(stream, 4 * genome_length)
            alleles = tuple(
                int.from_bytes(alleles_buffer[4 * p : 4 * p + 4], "big")
                for p in range(genome_length)
            )
            agents[agent_id] = AgentState(
                agent_id, (x, y), health, age, food_stored, Genome(alleles), policy_slot
            )
            occupant[y, x] = agent_id

        end = stream.tell()
        crc_value = int.from_bytes(_read_exact(stream, 2), "big")
        stream.seek(start)
        calculated_crc = crc16.genibus(stream.read(end - start))
        stream.seek(end + 2)
        if calculated_crc != crc_value:
            raise ValueError("Snapshot CRC validation failed.")

        state = WorldState(
            config, tick, food, source, occupant, agents, rng, next_agent_id
        )
        return cls(state)

    def write(self, stream: BinaryIO) -> None:
        """Write

        Args:
            stream (BinaryIO): Output stream
        """
        stream.write(self.to_bytes())

    def to_bytes(self) -> bytes:
        state = self.state
        buffer = BytesIO()
        buffer.write(_MAGIC_BYTES)
        buffer.write(_VERSION.to_bytes(2, "big"))
        _write_section(buffer, canonical_json(state.config.to_json_serializable()))
        buffer.write(state.tick.to_bytes(8, "big"))
        buffer.write(state.next_agent_id.to_bytes(8, "big"))
        _write_section(buffer, canonical_json(state.rng.bit_generator.state))
        buffer.write(state.source.astype(np.uint8).tobytes())
        buffer.write(state.food.astype(">f8").tobytes())
        buffer.write(len(state.agents).to_bytes(4, "big"))
        for agent_id in sorted(state.agents):
            agent = state.agents[agent_id]
            buffer.write(agent.id.to_bytes(8, "big"))
            buffer.write(agent.position[0].to_bytes(4, "big"))
            buffer.write(agent.position[1].to_bytes(4, "big"))
            buffer.write(agent.health.to_bytes(4, "big"))
            buffer.write(agent.age.to_bytes(4, "big"))
            buffer.write(np.array([agent.food_stored], dtype=">f8").tobytes())
            buffer.write(agent.policy_slot.to_bytes(4, "big"))
            buffer.write(len(agent.genome).to_bytes(2, "big"))
            for allele in agent.genome.alleles:
                buffer.write(allele.to_bytes(4, "big"))
        payload = buffer.getvalue()
        return payload + crc16.genibus(payload).to_bytes(2, "big")

    @classmethod
    def from_bytes(cls, payload: bytes) -> Self:
        return cls.read(BytesIO(payload))
