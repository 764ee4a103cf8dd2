"""Pong: two paddles, one ball, no world map.

Actions drive both paddles at once and are written "left+right", e.g.
"up+stay". A paddle hit is the scoring event; a miss freezes the game
into the post-terminal tail.
"""

from __future__ import annotations

import numpy as np

from .. import glyphs
from .base import Engine, NoMapError

FRAME_W = 128
FRAME_H = 128
TOP = glyphs.STRIP_HEIGHT  # first playfield row
BOTTOM = FRAME_H

PADDLE_W = 4
PADDLE_H = 20
PADDLE_SPEED = 4
LEFT_COL = 4  # left paddle cols [4, 8)
RIGHT_COL = FRAME_W - 8  # right paddle cols [120, 124)
LEFT_PLANE = LEFT_COL + PADDLE_W  # ball bounces off x = 8
RIGHT_PLANE = RIGHT_COL  # and x = 120

BALL = 4
BALL_SPEED = 3

BG = (0, 0, 0)
FG = (255, 255, 255)

_PADDLE_MOVES = ("up", "down", "stay")
_DY = {"up": -PADDLE_SPEED, "down": PADDLE_SPEED, "stay": 0}

_SERVE_STREAM = 0x30


class PongEngine(Engine):
    name = "pong"
    actions = tuple(f"{l}+{r}" for l in _PADDLE_MOVES for r in _PADDLE_MOVES)
    frame_shape = (FRAME_H, FRAME_W)
    map_topology = None

    def __init__(self, seed: int) -> None:
        super().__init__()
        self.seed = int(seed)
        center = TOP + (BOTTOM - TOP - PADDLE_H) // 2
        self.left_y = center
        self.right_y = center
        self.ball_x = FRAME_W // 2 - BALL // 2
        self.ball_y = TOP + (BOTTOM - TOP - BALL) // 2
        rng = np.random.default_rng((self.seed, _SERVE_STREAM))
        self.vel_x = BALL_SPEED if rng.integers(2) else -BALL_SPEED
        self.vel_y = BALL_SPEED if rng.integers(2) else -BALL_SPEED

    @staticmethod
    def _clamp_paddle(y: int) -> int:
        return max(TOP, min(BOTTOM - PADDLE_H, y))

    def _advance(self, action: str) -> bool:
        left_move, right_move = action.split("+")
        self.left_y = self._clamp_paddle(self.left_y + _DY[left_move])
        self.right_y = self._clamp_paddle(self.right_y + _DY[right_move])

        old_x = self.ball_x
        nx = self.ball_x + self.vel_x
        ny = self.ball_y + self.vel_y
        if ny < TOP:
            ny = 2 * TOP - ny
            self.vel_y = -self.vel_y
        elif ny + BALL > BOTTOM:
            ny = 2 * (BOTTOM - BALL) - ny
            self.vel_y = -self.vel_y

        event = False
        if self.vel_x < 0 and old_x >= LEFT_PLANE and nx < LEFT_PLANE:
            if ny < self.left_y + PADDLE_H and ny + BALL > self.left_y:
                nx = 2 * LEFT_PLANE - nx
                self.vel_x = -self.vel_x
                event = True
        elif self.vel_x > 0 and old_x + BALL <= RIGHT_PLANE and nx + BALL > RIGHT_PLANE:
            if ny < self.right_y + PADDLE_H and ny + BALL > self.right_y:
                nx = 2 * (RIGHT_PLANE - BALL) - nx
                self.vel_x = -self.vel_x
                event = True

        self.ball_x, self.ball_y = nx, ny
        if nx + BALL <= 0 or nx >= FRAME_W:
            self.terminal = True
        return event

    def render(self) -> np.ndarray:
        band = np.full((BOTTOM - TOP, FRAME_W, 3), BG, dtype=np.uint8)

        def paint(r0: int, r1: int, c0: int, c1: int) -> None:
            band[
                max(r0 - TOP, 0) : min(r1 - TOP, BOTTOM - TOP),
                max(c0, 0) : min(c1, FRAME_W),
            ] = FG

        paint(self.left_y, self.left_y + PADDLE_H, LEFT_COL, LEFT_COL + PADDLE_W)
        paint(self.right_y, self.right_y + PADDLE_H, RIGHT_COL, RIGHT_COL + PADDLE_W)
        paint(self.ball_y, self.ball_y + BALL, self.ball_x, self.ball_x + BALL)
        frame = np.empty((FRAME_H, FRAME_W, 3), dtype=np.uint8)
        frame[: glyphs.STRIP_HEIGHT] = glyphs.render_score_strip(FRAME_W, self.score)
        frame[glyphs.STRIP_HEIGHT :] = band
        return frame

    def player_pos(self) -> tuple[int, ...]:
        return ()

    def ground_truth_map(self):
        raise NoMapError("pong has no world map")
