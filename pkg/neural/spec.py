from dataclasses import dataclass
from enum import Enum
from typing import Self

from world.observation import CHANNEL_COUNT, CROP_SIZE, SCALAR_COUNT
from world.state import Action

CONV_KERNEL = 3
CONV_OUTPUT = CROP_SIZE - CONV_KERNEL + 1
CONV_FAN_IN = CONV_KERNEL * CONV_KERNEL * CHANNEL_COUNT
FLAT_INPUT = CROP_SIZE * CROP_SIZE * CHANNEL_COUNT + SCALAR_COUNT


class Architecture(Enum):
    """Network Architecture"""

    LARGE_MLP = "large_mlp"
    SMALL_CONV = "small_conv"

    def id(self) -> int:
        return {Architecture.LARGE_MLP: 1, Architecture.SMALL_CONV: 2}[self]

    @classmethod
    def from_id(cls, architecture_id: int) -> Self:
        for architecture in cls:
            if architecture.id() == architecture_id:
                return architecture
        raise ValueError(f"Unknown architecture id. architecture_id={architecture_id}")


@dataclass(frozen=True)
class NetworkSpec:
    """Network Specification

    LargeMLP: the flattened 5x5x6 crop and the 4 scalars (154 inputs) feed
    dense ReLU layers of `hidden_widths`, then a 10-way linear head.
    Default 3 x 310, 243,980 parameters.

    SmallConv: a 3x3 stride-1 valid convolution with `conv_channels` ReLU
    filters over the crop (3x3 output), flattened and joined with the 4
    scalars, then dense ReLU layers of `hidden_widths` and a 10-way linear
    head. Default 16 channels and one 143-wide layer, 23,627 parameters.
    """

    architecture: Architecture = Architecture.SMALL_CONV
    hidden_widths: tuple[int, ...] = (143,)
    conv_channels: int = 16

    @classmethod
    def default(cls, architecture: Architecture) -> Self:
        if architecture is Architecture.LARGE_MLP:
            return cls(architecture, (310, 310, 310), 0)
        return cls(architecture, (143,), 16)

    def validate(self) -> None:
        """Validate

        Raises:
            ValueError: Invalid specification
        """
        if any(width < 1 for width in self.hidden_widths):
            raise ValueError(f"Hidden widths must be positive. hidden_widths={self.hidden_widths}")
        if self.architecture is Architecture.LARGE_MLP and len(self.hidden_widths) != 3:
            raise ValueError(
                f"LargeMLP has exactly three hidden layers. hidden_widths={self.hidden_widths}"
            )
        if self.architecture is Architecture.SMALL_CONV:
            if self.conv_channels < 1:
                raise ValueError(
                    f"`conv_channels` must be positive. conv_channels={self.conv_channels}"
                )
            if len(self.hidden_widths) != 1:
                raise ValueError(
                    f"SmallConv has exactly one hidden dense layer. hidden_widths={self.hidden_widths}"
                )

    def layer_shapes(self) -> list[tuple[str, tuple[int, int]]]:
        """Weight matrix shape of every layer in parameter order

        Each layer stores its (fan_in, fan_out) weights row-major, then fan_out biases.

        Returns:
            list[tuple[str, tuple[int, int]]]: Layer names and weight shapes
        """
        shapes: list[tuple[str, tuple[int, int]]] = []
        if self.architecture is Architecture.SMALL_CONV:
            shapes.append(("conv", (CONV_FAN_IN, self.conv_channels)))
            fan_in = CONV_OUTPUT * CONV_OUTPUT * self.conv_channels + SCALAR_COUNT
        else:
            fan_in = FLAT_INPUT
        for index, width in enumerate(self.hidden_widths):
            shapes.append((f"dense_{index}", (fan_in, width)))
            fan_in = width
        shapes.append(("head", (fan_in, Action.COUNT)))
        return shapes

    def parameter_count(self) -> int:
        return sum(fan_in * fan_out + fan_out for _, (fan_in, fan_out) in self.layer_shapes())
