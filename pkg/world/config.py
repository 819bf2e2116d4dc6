from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Self

import numpy as np


class ReproductionMode(Enum):
    """Reproduction Mode"""

    ASEXUAL = "asexual"
    SEXUAL = "sexual"


@dataclass(frozen=True)
class FoodLayout:
    """Food Source Layout

    Descriptor strings:
        `random:<fraction>`: uniformly random fraction of tiles drawn from the world seed
        `all`: every tile is a food source
        `none`: no food sources
        `tiles:<x>,<y>;<x>,<y>;...`: explicit source coordinates
    """

    kind: str = "random"
    fraction: float = 0.25
    tiles: tuple[tuple[int, int], ...] = ()

    @classmethod
    def parse(cls, descriptor: str) -> Self:
        """Parse a layout descriptor

        Args:
            descriptor (str): Layout descriptor

        Raises:
            ValueError: Unknown layout descriptor

        Returns:
            Self: Instance of this class
        """
        descriptor = descriptor.strip()
        if descriptor == "all":
            return cls("all", 1.0)
        if descriptor == "none":
            return cls("none", 0.0)
        if descriptor.startswith("random:"):
            return cls("random", float(descriptor.split(":", 1)[1]))
        if descriptor.startswith("tiles:"):
            tiles: list[tuple[int, int]] = []
            body = descriptor.split(":", 1)[1].strip()
            for pair in filter(None, body.split(";")):
                x, y = pair.split(",")
                tiles.append((int(x), int(y)))
            return cls("tiles", 0.0, tuple(tiles))
        raise ValueError(f"Unknown food layout descriptor. descriptor={descriptor!r}")

    def descriptor(self) -> str:
        match self.kind:
            case "all" | "none":
                return self.kind
            case "random":
                return f"random:{self.fraction}"
            case _:
                return "tiles:" + ";".join(f"{x},{y}" for x, y in self.tiles)

    def source_mask(
        self, width: int, height: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Food source mask indexed [y, x]

        Args:
            width (int): World width
            height (int): World height
            rng (np.random.Generator): World random stream

        Returns:
            np.ndarray: Boolean mask
        """
        mask = np.zeros((height, width), dtype=bool)
        match self.kind:
            case "all":
                mask[:, :] = True
            case "none":
                pass
            case "random":
                count = int(round(self.fraction * width * height))
                indices = rng.choice(width * height, size=count, replace=False)
                mask.flat[indices] = True
            case "tiles":
                for x, y in self.tiles:
                    mask[y % height, x % width] = True
            case _:
                raise ValueError(f"Unknown food layout kind. kind={self.kind}")
        return mask


@dataclass(frozen=True)
class WorldConfig:
    """World Configuration

    Defaults are the full-scale asexual world (50x50, five founders).
    """

    width: int = 50
    height: int = 50
    endowment: float = 10.0
    initial_health: int = 2
    fertility_start: int = 5
    fertility_end: int = 40
    longevity: int = 50
    food_growth_rate: float = 0.15
    food_capacity: float = 3.0
    genome_length: int = 1
    reproduction_mode: ReproductionMode = ReproductionMode.ASEXUAL
    founder_count: int = 5
    food_layout: FoodLayout = field(default_factory=FoodLayout)
    seed: int = 0
    # Observation options
    count_soft_cap: float = 100.0
    mask_kinship: bool = False
    # Attacks between identical-genome members of this founder family are voided
    blocked_attack_family: int | None = None

    def validate(self) -> None:
        """Validate

        Raises:
            ValueError: Invalid configuration
        """
        if self.width < 1 or self.height < 1:
            raise ValueError(
                f"World dimensions must be positive. width={self.width} height={self.height}"
            )
        if self.endowment <= 0:
            raise ValueError(f"`endowment` must be positive. endowment={self.endowment}")
        if self.initial_health < 1:
            raise ValueError(
                f"`initial_health` must be at least 1. initial_health={self.initial_health}"
            )
        if not (0 <= self.fertility_start <= self.fertility_end <= self.longevity):
            raise ValueError(
                "Fertility window must satisfy 0 <= fertility_start <= fertility_end <= longevity. "
                f"fertility_start={self.fertility_start} fertility_end={self.fertility_end} "
                f"longevity={self.longevity}"
            )
        if not (0 < self.food_growth_rate <= self.food_capacity):
            raise ValueError(
                "Food growth must satisfy 0 < food_growth_rate <= food_capacity. "
                f"food_growth_rate={self.food_growth_rate} food_capacity={self.food_capacity}"
            )
        if self.genome_length < 1:
            raise ValueError(
                f"`genome_length` must be at least 1. genome_length={self.genome_length}"
            )
        if self.founder_count < 1:
            raise ValueError(
                f"`founder_count` must be at least 1. founder_count={self.founder_count}"
            )
        if self.founder_count > self.width * self.height:
            raise ValueError(
                "World is too small to place the founders. "
                f"founder_count={self.founder_count} tiles={self.width * self.height}"
            )
        if self.food_layout.kind == "random" and not (
            0.0 <= self.food_layout.fraction <= 1.0
        ):
            raise ValueError(
                f"Food source fraction must be in [0, 1]. fraction={self.food_layout.fraction}"
            )
        if self.count_soft_cap <= 0:
            raise ValueError(
                f"`count_soft_cap` must be positive. count_soft_cap={self.count_soft_cap}"
            )

    def fertility_threshold(self) -> float:
        """Food that must be exceeded to be fertile

        Returns:
            float: 2e for asexual worlds, e for sexual worlds
        """
        if self.reproduction_mode is ReproductionMode.ASEXUAL:
            return 2.0 * self.endowment
        return self.endowment

    def to_json_serializable(self) -> dict[str, Any]:
        serializable = asdict(self)
        serializable["reproduction_mode"] = self.reproduction_mode.value
        serializable["food_layout"] = self.food_layout.descriptor()
        return serializable

    @classmethod
    def from_json_serializable(cls, serializable: dict[str, Any]) -> Self:
        values = dict(serializable)
        values["reproduction_mode"] = ReproductionMode(values["reproduction_mode"])
        values["food_layout"] = FoodLayout.parse(values["food_layout"])
        return cls(**values)
