"""Common engine contract shared by the three games."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

# Frames frozen after the terminal event before an episode is exhausted.
TAIL_FRAMES = 30


class ExhaustedError(RuntimeError):
    """step() was called after the post-terminal tail ran out."""


class NoMapError(RuntimeError):
    """The game has no persistent world map (score-only games)."""


@dataclass
class StepResult:
    frame: np.ndarray  # (H, W, 3) uint8, score strip included
    score: int
    event: bool  # a scoring event fired on this step
    terminal: bool  # episode entered (or remains in) the frozen tail
    player_pos: tuple[int, ...]  # world coordinates of the player anchor


class Engine:
    """Deterministic seeded game. Subclasses fill in the rules.

    The lifecycle is: construct with a seed, render() the initial frame,
    then step(action) repeatedly. After the terminal event the engine
    serves TAIL_FRAMES frozen frames and then raises ExhaustedError.
    """

    name: str = ""
    actions: tuple[str, ...] = ()
    frame_shape: tuple[int, int] = (0, 0)  # (H, W)

    def __init__(self) -> None:
        self.score = 0
        self.terminal = False
        self._tail_left = TAIL_FRAMES

    def action_index(self, action: str) -> int:
        try:
            return self.actions.index(action)
        except ValueError:
            raise ValueError(f"unknown action {action!r} for {self.name}") from None

    def step(self, action: str) -> StepResult:
        if action not in self.actions:
            raise ValueError(f"unknown action {action!r} for {self.name}")
        if self.terminal:
            if self._tail_left <= 0:
                raise ExhaustedError(f"{self.name} episode is exhausted")
            self._tail_left -= 1
            return StepResult(
                frame=self.render(),
                score=self.score,
                event=False,
                terminal=True,
                player_pos=self.player_pos(),
            )
        event = self._advance(action)
        if event:
            self.score = min(self.score + 1, 999)
        return StepResult(
            frame=self.render(),
            score=self.score,
            event=event,
            terminal=self.terminal,
            player_pos=self.player_pos(),
        )

    @property
    def exhausted(self) -> bool:
        return self.terminal and self._tail_left <= 0

    def clone(self) -> "Engine":
        return copy.deepcopy(self)

    # ---- subclass hooks -------------------------------------------------

    def _advance(self, action: str) -> bool:
        """Apply one action to the live game; return True on a scoring event."""
        raise NotImplementedError

    def render(self) -> np.ndarray:
        raise NotImplementedError

    def player_pos(self) -> tuple[int, ...]:
        raise NotImplementedError

    def ground_truth_map(self) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
        """Full world image, observed mask, and the origin's world coordinate.

        Only meaningful for games with a persistent world; others raise
        NoMapError.
        """
        raise NoMapError(f"{self.name} has no world map")
