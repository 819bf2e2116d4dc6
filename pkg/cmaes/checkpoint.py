import pickle
from dataclasses import dataclass, field
from io import BytesIO
from logging import getLogger
from typing import Any, BinaryIO, Final, Self

import numpy as np
from fastcrc import crc16

from .fitness import FitnessStage
from .state import CmaState

_MAGIC_BYTES: Final[bytes] = b"KLCM"
_VERSION: Final[int] = 1


def _read_exact(stream: BinaryIO, length: int) -> bytes:
    buffer = stream.read(length)
    if len(buffer) < length:
        raise ValueError("Too less read bytes.")
    return buffer


def _write_section(stream: BinaryIO, payload: bytes) -> None:
    stream.write(len(payload).to_bytes(8, "big"))
    stream.write(payload)


def _read_section(stream: BinaryIO) -> bytes:
    length = int.from_bytes(_read_exact(stream, 8), "big")
    return _read_exact(stream, length)


@dataclass
class EliteRecord:
    """Best candidate of a family seen in the current stage"""

    fitness: float = float("-inf")
    parameters: np.ndarray | None = None


@dataclass
class CmaesCheckpoint:
    """CMA-ES Checkpoint

    Binary layout, version 1, big-endian throughout:

        magic "KLCM" | u16 version | u32 generation | u8 stage id
        | section pickled NumPy global RNG state | u16 family count
        | per family: section pickled strategy | >f8 elite fitness
          | u64 elite parameter count | >f8 elite parameters
        | u16 CRC

    A section is a u64 length followed by its bytes. The trailing
    CRC-16/GENIBUS covers every preceding byte. `cma` draws its samples from
    the NumPy global RNG, so its state is part of the checkpoint.
    """

    __logger = getLogger(__name__)

    generation: int
    stage: FitnessStage
    states: list[CmaState]
    elites: list[EliteRecord] = field(default_factory=list)
    global_rng_state: Any = None

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
        payload = stream.read()
        if len(payload) < 2:
            raise ValueError("Too less read bytes.")
        body, crc_buffer = payload[:-2], payload[-2:]
        if crc16.genibus(body) != int.from_bytes(crc_buffer, "big"):
            raise ValueError("Checkpoint CRC validation failed.")

        body_stream = BytesIO(body)
        magic_bytes = _read_exact(body_stream, 4)
        if magic_bytes != _MAGIC_BYTES:
            raise ValueError(
                f"Invalid magic bytes: expected {_MAGIC_BYTES!r}, got {magic_bytes!r}"
            )
        version = int.from_bytes(_read_exact(body_stream, 2), "big")
        if version != _VERSION:
            raise ValueError(f"Unsupported checkpoint version. version={version}")

        generation = int.from_bytes(_read_exact(body_stream, 4), "big")
        stage = FitnessStage.from_id(_read_exact(body_stream, 1)[0])
        global_rng_state = pickle.loads(_read_section(body_stream))
        family_count = int.from_bytes(_read_exact(body_stream, 2), "big")
        states: list[CmaState] = []
        elites: list[EliteRecord] = []
        for _ in range(family_count):
            states.append(CmaState(pickle.loads(_read_section(body_stream))))
            fitness = float(np.frombuffer(_read_exact(body_stream, 8), dtype=">f8")[0])
            parameter_count = int.from_bytes(_read_exact(body_stream, 8), "big")
            parameters = None
            if parameter_count > 0:
                parameters = np.frombuffer(
                    _read_exact(body_stream, 8 * parameter_count), dtype=">f8"
                ).astype(np.float64)
            elites.append(EliteRecord(fitness, parameters))
        return cls(generation, stage, states, elites, global_rng_state)

    def write(self, stream: BinaryIO) -> None:
        """Write

        Args:
            stream (BinaryIO): Output stream
        """
        elites = self.elites if len(self.elites) > 0 else [EliteRecord() for _ in self.states]
        buffer = BytesIO()
        buffer.write(_MAGIC_BYTES)
        buffer.write(_VERSION.to_bytes(2, "big"))
        buffer.write(self.generation.to_bytes(4, "big"))
        buffer.write(self.stage.id().to_bytes(1, "big"))
        _write_section(buffer, pickle.dumps(self.global_rng_state))
        buffer.write(len(self.states).to_bytes(2, "big"))
        for state, elite in zip(self.states, elites):
            _write_section(buffer, pickle.dumps(state.strategy))
            buffer.write(np.array([elite.fitness], dtype=">f8").tobytes())
            if elite.parameters is None:
                buffer.write((0).to_bytes(8, "big"))
            else:
                buffer.write(len(elite.parameters).to_bytes(8, "big"))
                buffer.write(elite.parameters.astype(">f8").tobytes())
        body = buffer.getvalue()
        stream.write(body)
        stream.write(crc16.genibus(body).to_bytes(2, "big"))

    @classmethod
    def load(cls, path: str) -> Self:
        with open(path, "rb") as checkpoint_file:
            checkpoint = cls.read(checkpoint_file)
        CmaesCheckpoint.__logger.info(
            f"CMA-ES checkpoint loaded. path={path} generation={checkpoint.generation} "
            f"stage={checkpoint.stage.value}"
        )
        return checkpoint

    def save(self, path: str) -> None:
        with open(path, "wb") as checkpoint_file:
            self.write(checkpoint_file)
