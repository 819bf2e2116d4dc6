from dataclasses import dataclass
from io import BytesIO
from logging import getLogger
from typing import BinaryIO, Final, Self

import numpy as np
from fastcrc import crc16

from .network import QNetwork
from .optimizer import OptimizerKind, OptimizerState
from .spec import Architecture, NetworkSpec

_MAGIC_BYTES: Final[bytes] = b"KLQN"
_VERSION: Final[int] = 1


def _read_exact(stream: BinaryIO, length: int) -> bytes:
    buffer = stream.read(length)
    if len(buffer) < length:
        raise ValueError("Too less read bytes.")
    return buffer


def _read_floats(stream: BinaryIO, count: int) -> np.ndarray:
    return np.frombuffer(_read_exact(stream, 8 * count), dtype=">f8").astype(np.float64)


@dataclass
class NetworkCheckpoint:
    """Network Checkpoint

    Binary layout, version 1, big-endian throughout:

        magic "KLQN" | u16 version | u8 architecture id | u16 hidden layer count
        | u32 hidden widths | u32 conv channels | u64 seed | u64 step
        | u64 parameter count | >f8 parameters | u8 optimizer flag
        [ | u8 optimizer id | u64 optimizer step | u8 moments flag
          [ | >f8 first moment | >f8 second moment ] ] | u16 CRC

    The trailing CRC-16/GENIBUS covers every preceding byte.
    """

    __logger = getLogger(__name__)

    net: QNetwork
    optimizer_kind: OptimizerKind | None = None
    optimizer_state: OptimizerState | None = None

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

        architecture = Architecture.from_id(_read_exact(body_stream, 1)[0])
        layer_count = int.from_bytes(_read_exact(body_stream, 2), "big")
        hidden_widths = tuple(
            int.from_bytes(_read_exact(body_stream, 4), "big") for _ in range(layer_count)
        )
        conv_channels = int.from_bytes(_read_exact(body_stream, 4), "big")
        seed = int.from_bytes(_read_exact(body_stream, 8), "big")
        step = int.from_bytes(_read_exact(body_stream, 8), "big")
        parameter_count = int.from_bytes(_read_exact(body_stream, 8), "big")
        spec = NetworkSpec(architecture, hidden_widths, conv_channels)
        if spec.parameter_count() != parameter_count:
            raise ValueError(
                "Parameter count does not match the stored shapes. "
                f"stored={parameter_count} expected={spec.parameter_count()}"
            )
        net = QNetwork(spec, _read_floats(body_stream, parameter_count), seed, step)

        optimizer_kind = None
        optimizer_state = None
        if _read_exact(body_stream, 1)[0] == 1:
            optimizer_id = _read_exact(body_stream, 1)[0]
            optimizer_kind = next(
                kind for kind in OptimizerKind if kind.id() == optimizer_id
            )
            optimizer_step = int.from_bytes(_read_exact(body_stream, 8), "big")
            optimizer_state = OptimizerState(optimizer_step)
            if _read_exact(body_stream, 1)[0] == 1:
                optimizer_state.first_moment = _read_floats(body_stream, parameter_count)
                optimizer_state.second_moment = _read_floats(body_stream, parameter_count)

        return cls(net, optimizer_kind, optimizer_state)

    def write(self, stream: BinaryIO) -> None:
        """Write

        Args:
            stream (BinaryIO): Output stream
        """
        net = self.net
        spec = net.spec
        buffer = BytesIO()
        buffer.write(_MAGIC_BYTES)
        buffer.write(_VERSION.to_bytes(2, "big"))
        buffer.write(spec.architecture.id().to_bytes(1, "big"))
        buffer.write(len(spec.hidden_widths).to_bytes(2, "big"))
        for width in spec.hidden_widths:
            buffer.write(width.to_bytes(4, "big"))
        buffer.write(spec.conv_channels.to_bytes(4, "big"))
        buffer.write(net.seed.to_bytes(8, "big"))
        buffer.write(net.step.to_bytes(8, "big"))
        buffer.write(net.parameter_count().to_bytes(8, "big"))
        buffer.write(net.parameters.astype(">f8").tobytes())

        if self.optimizer_kind is None or self.optimizer_state is None:
            buffer.write(b"\x00")
        else:
            state = self.optimizer_state
            buffer.write(b"\x01")
            buffer.write(self.optimizer_kind.id().to_bytes(1, "big"))
            buffer.write(state.step.to_bytes(8, "big"))
            if state.first_moment is None or state.second_moment is None:
                buffer.write(b"\x00")
            else:
                buffer.write(b"\x01")
                buffer.write(state.first_moment.astype(">f8").tobytes())
                buffer.write(state.second_moment.astype(">f8").tobytes())

        body = buffer.getvalue()
        stream.write(body)
        stream.write(crc16.genibus(body).to_bytes(2, "big"))

    @classmethod
    def load(cls, path: str) -> Self:
        with open(path, "rb") as checkpoint_file:
            checkpoint = cls.read(checkpoint_file)
        NetworkCheckpoint.__logger.info(
            f"Checkpoint loaded. path={path} architecture={checkpoint.net.spec.architecture.value} "
            f"step={checkpoint.net.step}"
        )
        return checkpoint

    def save(self, path: str) -> None:
        with open(path, "wb") as checkpoint_file:
            self.write(checkpoint_file)
