"""Traveler: a black square walking an infinite 1D strip of building slots.

The world is a row of 8 px wide slots, each Empty or holding a colored
building. The camera follows the traveler, who sits at the horizontal
center of every frame. Entering an Empty slot erects a new building
there and scores one point.
"""

from __future__ import annotations

import numpy as np

from .. import glyphs
from .base import Engine

FRAME_W = 96
FRAME_H = 96
BAND_H = FRAME_H - glyphs.STRIP_HEIGHT  # world rows below the score strip

SLOT_W = 8  # world px per building slot
SPEED = 4  # px per Left/Right action
GROUND_TOP = 72  # band row where the ground begins
HEIGHT_LO, HEIGHT_HI = 24, 72  # building heights, inclusive
P_EMPTY = 0.15

SKY = (255, 255, 255)
GROUND = (120, 120, 120)
SPRITE_COLOR = (0, 0, 0)
SPRITE_SIZE = 12
# Sprite rect in band coordinates; bottom edge rests on the ground line.
SPRITE_ROW0 = GROUND_TOP - SPRITE_SIZE
SPRITE_COL0 = FRAME_W // 2 - SPRITE_SIZE // 2

PALETTE = (
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (170, 110, 40),
)

# Seed-stream tags. Layout and event fills come from separate per-slot
# streams so the world is identical no matter what order slots are first
# touched in.
_LAYOUT_STREAM = 0x51
_FILL_STREAM = 0x52


def _slot_rng(seed: int, stream: int, slot: int) -> np.random.Generator:
    # Two's-complement the slot index so negative slots seed cleanly.
    return np.random.default_rng((seed, stream, slot & 0xFFFFFFFFFFFFFFFF))


class TravelerEngine(Engine):
    name = "traveler"
    actions = ("left", "right", "stay")
    frame_shape = (FRAME_H, FRAME_W)
    map_topology = "strip"

    def __init__(
        self,
        seed: int,
        p_empty: float = P_EMPTY,
        preset_slots: dict[int, tuple[int, int] | None] | None = None,
    ) -> None:
        super().__init__()
        if not 0.0 <= p_empty <= 1.0:
            raise ValueError(f"p_empty must be in [0, 1], got {p_empty}")
        self.seed = int(seed)
        self.p_empty = float(p_empty)
        self.player_x = 0
        # slot index -> None (empty) or (palette index, height px)
        self._slots: dict[int, tuple[int, int] | None] = {}
        self._preset = dict(preset_slots) if preset_slots else {}
        self._seen_lo = self.player_x - FRAME_W // 2
        self._seen_hi = self.player_x + FRAME_W // 2

    def slot_content(self, slot: int) -> tuple[int, int] | None:
        """World content of a slot, generating it lazily on first touch."""
        if slot in self._slots:
            return self._slots[slot]
        if slot in self._preset:
            content = self._preset[slot]
        else:
            rng = _slot_rng(self.seed, _LAYOUT_STREAM, slot)
            if rng.random() < self.p_empty:
                content = None
            else:
                content = (
                    int(rng.integers(len(PALETTE))),
                    int(rng.integers(HEIGHT_LO, HEIGHT_HI + 1)),
                )
        self._slots[slot] = content
        return content

    def _advance(self, action: str) -> bool:
        dx = {"left": -SPEED, "right": SPEED, "stay": 0}[action]
        old_slot = self.player_x // SLOT_W
        self.player_x += dx
        new_slot = self.player_x // SLOT_W
        event = False
        if new_slot != old_slot and self.slot_content(new_slot) is None:
            fill = _slot_rng(self.seed, _FILL_STREAM, new_slot)
            self._slots[new_slot] = (
                int(fill.integers(len(PALETTE))),
                int(fill.integers(HEIGHT_LO, HEIGHT_HI + 1)),
            )
            event = True
        self._seen_lo = min(self._seen_lo, self.player_x - FRAME_W // 2)
        self._seen_hi = max(self._seen_hi, self.player_x + FRAME_W // 2)
        return event

    def _render_world(
        self,
        x0: int,
        width: int,
        slot_overrides: dict[int, tuple[int, int] | None] | None = None,
    ) -> np.ndarray:
        """Band-height raster of world pixels covering [x0, x0 + width)."""
        band = np.full((BAND_H, width, 3), SKY, dtype=np.uint8)
        band[GROUND_TOP:] = GROUND
        first = x0 // SLOT_W
        last = (x0 + width - 1) // SLOT_W
        for slot in range(first, last + 1):
            content = self.slot_content(slot)
            if slot_overrides is not None and slot in slot_overrides:
                content = slot_overrides[slot]
            if content is None:
                continue
            color_idx, height = content
            c0 = slot * SLOT_W - x0
            band[
                GROUND_TOP - height : GROUND_TOP,
                max(c0, 0) : min(c0 + SLOT_W, width),
            ] = PALETTE[color_idx]
        return band

    def render(
        self, slot_overrides: dict[int, tuple[int, int] | None] | None = None
    ) -> np.ndarray:
        band = self._render_world(
            self.player_x - FRAME_W // 2, FRAME_W, slot_overrides
        )
        band[
            SPRITE_ROW0 : SPRITE_ROW0 + SPRITE_SIZE,
            SPRITE_COL0 : SPRITE_COL0 + SPRITE_SIZE,
        ] = SPRITE_COLOR
        frame = np.empty((FRAME_H, FRAME_W, 3), dtype=np.uint8)
        frame[: glyphs.STRIP_HEIGHT] = glyphs.render_score_strip(FRAME_W, self.score)
        frame[glyphs.STRIP_HEIGHT :] = band
        return frame

    def player_pos(self) -> tuple[int, ...]:
        return (self.player_x,)

    def ground_truth_map(self) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
        width = self._seen_hi - self._seen_lo
        band = self._render_world(self._seen_lo, width)
        observed = np.ones((BAND_H, width), dtype=bool)
        return band, observed, (self._seen_lo,)
