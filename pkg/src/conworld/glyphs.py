"""Bitmap digit glyphs and the score strip renderer/reader.

The strip is the top band of every frame: white background, three
zero-padded decimal digits drawn from a fixed 5x7 font scaled x2.
Because the glyphs are known pixel-exactly, readback is exact template
matching rather than OCR.
"""

from __future__ import annotations

import numpy as np

STRIP_HEIGHT = 16
GLYPH_W, GLYPH_H = 5, 7
SCALE = 2
DIGIT_W, DIGIT_H = GLYPH_W * SCALE, GLYPH_H * SCALE  # 10 x 14
DIGIT_GAP = 2
N_DIGITS = 3
STRIP_FG = (0, 0, 0)
STRIP_BG = (255, 255, 255)

_FONT = {
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


class UnreadableScoreError(ValueError):
    """A digit cell in the strip matched no glyph template."""


def _glyph_mask(ch: str) -> np.ndarray:
    rows = _FONT[ch]
    small = np.array([[c == "1" for c in row] for row in rows], dtype=bool)
    return np.kron(small, np.ones((SCALE, SCALE), dtype=bool))


# Scaled boolean masks, indexed by digit value.
GLYPH_MASKS = [_glyph_mask(str(d)) for d in range(10)]


def digit_cell_origins(frame_width: int) -> list[tuple[int, int]]:
    """Top-left (row, col) of each of the three digit cells, centered."""
    total_w = N_DIGITS * DIGIT_W + (N_DIGITS - 1) * DIGIT_GAP
    x0 = (frame_width - total_w) // 2
    y0 = (STRIP_HEIGHT - DIGIT_H) // 2
    return [(y0, x0 + i * (DIGIT_W + DIGIT_GAP)) for i in range(N_DIGITS)]


def render_score_strip(frame_width: int, value: int) -> np.ndarray:
    """Render the (STRIP_HEIGHT, frame_width, 3) strip showing ``value``."""
    if not 0 <= value <= 999:
        raise ValueError(f"score out of renderable range: {value}")
    strip = np.full((STRIP_HEIGHT, frame_width, 3), STRIP_BG, dtype=np.uint8)
    text = f"{value:03d}"
    for (y0, x0), ch in zip(digit_cell_origins(frame_width), text):
        mask = GLYPH_MASKS[int(ch)]
        cell = strip[y0 : y0 + DIGIT_H, x0 : x0 + DIGIT_W]
        cell[mask] = STRIP_FG
    return strip


def read_score_strip(frame: np.ndarray) -> int:
    """Read the score back out of a frame (or bare strip) exactly.

    Raises UnreadableScoreError when any digit cell is not a pixel-exact
    match for one of the ten glyphs.
    """
    strip = frame[:STRIP_HEIGHT]
    width = strip.shape[1]
    value = 0
    for y0, x0 in digit_cell_origins(width):
        cell = strip[y0 : y0 + DIGIT_H, x0 : x0 + DIGIT_W]
        cell_mask = np.all(cell == STRIP_FG, axis=-1)
        for d in range(10):
            if np.array_equal(cell_mask, GLYPH_MASKS[d]):
                value = value * 10 + d
                break
        else:
            raise UnreadableScoreError("digit cell matches no glyph template")
    return value
