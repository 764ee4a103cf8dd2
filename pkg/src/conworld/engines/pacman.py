"""Pac-Man: a seeded maze of walls and dots with static monsters.

The maze is a 32x28 grid of 8 px cells; the camera keeps the pac at
the frame center and renders anything beyond the maze as black.
Eating a dot is the scoring event; touching a monster ends the game.
"""

from __future__ import annotations

import numpy as np

from .. import glyphs
from .base import Engine

FRAME_W = 128
FRAME_H = 128
BAND_H = FRAME_H - glyphs.STRIP_HEIGHT  # 112

CELL = 8
ROWS, COLS = 32, 28  # world: 256 x 224 px
P_WALL = 0.22
P_DOT = 0.5
N_MONSTERS = 3
MONSTER_MIN_DIST = 6  # Manhattan cells from the spawn

WALL, CORRIDOR, DOT, EATEN = 0, 1, 2, 3

BG = (0, 0, 0)
WALL_COLOR = (33, 33, 222)
DOT_COLOR = (255, 255, 255)
PAC_COLOR = (255, 220, 0)
MONSTER_COLOR = (222, 33, 33)

_MAZE_STREAM = 0x40
_MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1), "stay": (0, 0)}


class PacManEngine(Engine):
    name = "pacman"
    actions = ("up", "down", "left", "right", "stay")
    frame_shape = (FRAME_H, FRAME_W)
    map_topology = "grid"

    def __init__(self, seed: int, p_wall: float = P_WALL, p_dot: float = P_DOT) -> None:
        super().__init__()
        if not 0.0 <= p_wall <= 1.0 or not 0.0 <= p_dot <= 1.0:
            raise ValueError("p_wall and p_dot must be in [0, 1]")
        self.seed = int(seed)
        rng = np.random.default_rng((self.seed, _MAZE_STREAM))

        grid = np.full((ROWS, COLS), CORRIDOR, dtype=np.uint8)
        grid[0, :] = grid[-1, :] = WALL
        grid[:, 0] = grid[:, -1] = WALL
        interior = rng.random((ROWS - 2, COLS - 2))
        grid[1:-1, 1:-1][interior < p_wall] = WALL
        dots = rng.random((ROWS, COLS)) < p_dot
        grid[(grid == CORRIDOR) & dots] = DOT

        self.pac = (ROWS // 2, COLS // 2)
        grid[self.pac] = CORRIDOR

        rr, cc = np.nonzero(grid != WALL)
        dist = np.abs(rr - self.pac[0]) + np.abs(cc - self.pac[1])
        far = np.nonzero(dist >= MONSTER_MIN_DIST)[0]
        picks = rng.choice(len(far), size=min(N_MONSTERS, len(far)), replace=False)
        self.monsters = tuple(
            sorted((int(rr[far[i]]), int(cc[far[i]])) for i in picks)
        )
        for cell in self.monsters:
            grid[cell] = CORRIDOR

        if not (grid == DOT).any():
            # Degenerate draw; promote the first free corridor to a dot.
            free = np.argwhere((grid == CORRIDOR))
            for r, c in free:
                if (r, c) != self.pac and (r, c) not in self.monsters:
                    grid[r, c] = DOT
                    break

        self.grid = grid
        self._raster = self._render_maze()

    def _render_maze(self) -> np.ndarray:
        raster = np.full((ROWS * CELL, COLS * CELL, 3), BG, dtype=np.uint8)
        for r in range(ROWS):
            for c in range(COLS):
                y, x = r * CELL, c * CELL
                if self.grid[r, c] == WALL:
                    raster[y : y + CELL, x : x + CELL] = WALL_COLOR
                elif self.grid[r, c] == DOT:
                    raster[y + 2 : y + 6, x + 2 : x + 6] = DOT_COLOR
        for r, c in self.monsters:
            raster[r * CELL : (r + 1) * CELL, c * CELL : (c + 1) * CELL] = MONSTER_COLOR
        return raster

    def _advance(self, action: str) -> bool:
        dr, dc = _MOVES[action]
        target = (self.pac[0] + dr, self.pac[1] + dc)
        event = False
        if target != self.pac and self.grid[target] != WALL:
            self.pac = target
            if self.grid[target] == DOT:
                self.grid[target] = EATEN
                y, x = target[0] * CELL, target[1] * CELL
                self._raster[y + 2 : y + 6, x + 2 : x + 6] = BG
                event = True
            if target in self.monsters:
                self.terminal = True
        return event

    def render(self) -> np.ndarray:
        band = np.full((BAND_H, FRAME_W, 3), BG, dtype=np.uint8)
        cx, cy = self.player_pos()
        wx0, wy0 = cx - FRAME_W // 2, cy - BAND_H // 2
        sy0, sy1 = max(wy0, 0), min(wy0 + BAND_H, ROWS * CELL)
        sx0, sx1 = max(wx0, 0), min(wx0 + FRAME_W, COLS * CELL)
        if sy0 < sy1 and sx0 < sx1:
            band[sy0 - wy0 : sy1 - wy0, sx0 - wx0 : sx1 - wx0] = self._raster[
                sy0:sy1, sx0:sx1
            ]
        pr, pc = self.pac[0] * CELL - wy0, self.pac[1] * CELL - wx0
        band[pr : pr + CELL, pc : pc + CELL] = PAC_COLOR
        frame = np.empty((FRAME_H, FRAME_W, 3), dtype=np.uint8)
        frame[: glyphs.STRIP_HEIGHT] = glyphs.render_score_strip(FRAME_W, self.score)
        frame[glyphs.STRIP_HEIGHT :] = band
        return frame

    def player_pos(self) -> tuple[int, ...]:
        r, c = self.pac
        return (c * CELL + CELL // 2, r * CELL + CELL // 2)

    def ground_truth_map(self) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
        raster = self._raster.copy()
        observed = np.ones(raster.shape[:2], dtype=bool)
        return raster, observed, (0, 0)
