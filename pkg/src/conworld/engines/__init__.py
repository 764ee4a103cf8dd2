"""The three seeded reference game engines."""

from __future__ import annotations

from .base import TAIL_FRAMES, Engine, ExhaustedError, NoMapError, StepResult
from .pacman import PacManEngine
from .pong import PongEngine
from .traveler import TravelerEngine

GAMES = ("traveler", "pong", "pacman")

_ENGINES = {
    "traveler": TravelerEngine,
    "pong": PongEngine,
    "pacman": PacManEngine,
}


def make_engine(game: str, seed: int, **config) -> Engine:
    if game not in _ENGINES:
        raise ValueError(f"unknown game {game!r}; expected one of {GAMES}")
    return _ENGINES[game](seed, **config)


__all__ = [
    "Engine",
    "ExhaustedError",
    "GAMES",
    "NoMapError",
    "PacManEngine",
    "PongEngine",
    "StepResult",
    "TAIL_FRAMES",
    "TravelerEngine",
    "make_engine",
]
