from typing import Final

import numpy as np

from .recording import EpisodeHeader, Frame

# Legend
EMPTY_GLYPH: Final[str] = "."
FULL_SOURCE_GLYPH: Final[str] = "#"
GROWING_SOURCE_GLYPH: Final[str] = "+"
FAMILY_GLYPHS: Final[str] = "0123456789abcdefghijklmnopqrstuvwxyz"

DIRT_COLOR: Final[tuple[int, int, int]] = (40, 30, 20)
FULL_SOURCE_COLOR: Final[tuple[int, int, int]] = (30, 160, 40)
FAMILY_COLORS: Final[list[tuple[int, int, int]]] = [
    (230, 25, 75),
    (0, 130, 200),
    (255, 225, 25),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (250, 190, 212),
    (170, 110, 40),
    (255, 255, 255),
]


def family_glyph(family: int) -> str:
    return FAMILY_GLYPHS[family % len(FAMILY_GLYPHS)]


def family_color(family: int) -> tuple[int, int, int]:
    return FAMILY_COLORS[family % len(FAMILY_COLORS)]


def legend(families: list[int]) -> list[str]:
    lines = [
        f"{EMPTY_GLYPH} empty tile",
        f"{FULL_SOURCE_GLYPH} food source at capacity",
        f"{GROWING_SOURCE_GLYPH} food source regrowing",
    ]
    for family in sorted(set(families)):
        r, g, b = family_color(family)
        lines.append(f"{family_glyph(family)} family {family} rgb({r},{g},{b})")
    return lines


def render_text(header: EpisodeHeader, frame: Frame) -> str:
    """Render a frame as a UTF-8 text grid, one character per tile

    Args:
        header (EpisodeHeader): Episode header
        frame (Frame): Frame

    Returns:
        str: Text grid
    """
    config = header.config
    grid = [[EMPTY_GLYPH] * config.width for _ in range(config.height)]
    for y in range(config.height):
        for x in range(config.width):
            if not header.source[y, x]:
                continue
            if frame.food[y, x] >= config.food_capacity:
                grid[y][x] = FULL_SOURCE_GLYPH
            else:
                grid[y][x] = GROWING_SOURCE_GLYPH
    for _, x, y, family in frame.agents:
        grid[y][x] = family_glyph(family)
    return "\n".join("".join(row) for row in grid) + "\n"


def render_pixmap(header: EpisodeHeader, frame: Frame, cell_size: int = 8) -> bytes:
    """Render a frame as a binary portable pixmap (P6)

    Image size is (width * cell_size) x (height * cell_size). Food sources are
    shaded by their fill level.

    Args:
        header (EpisodeHeader): Episode header
        frame (Frame): Frame
        cell_size (int, optional): Pixels per tile side. Defaults to 8.

    Raises:
        ValueError: Non-positive cell size

    Returns:
        bytes: PPM file content
    """
    if cell_size < 1:
        raise ValueError(f"`cell_size` must be positive. cell_size={cell_size}")

    config = header.config
    level = np.clip(frame.food / config.food_capacity, 0.0, 1.0)[:, :, None]
    dirt = np.array(DIRT_COLOR, dtype=np.float64)
    full = np.array(FULL_SOURCE_COLOR, dtype=np.float64)
    tiles = np.where(header.source[:, :, None], dirt + (full - dirt) * level, dirt)
    for _, x, y, family in frame.agents:
        tiles[y, x] = family_color(family)

    image = np.repeat(np.repeat(tiles, cell_size, axis=0), cell_size, axis=1)
    image = image.round().astype(np.uint8)
    height, width = image.shape[:2]
    return f"P6\n{width} {height}\n255\n".encode("ascii") + image.tobytes()
