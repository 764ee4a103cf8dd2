"""Frame generators: the reference engine behind a generator contract,
plus corruption wrappers that inject controlled inconsistencies.

NumericJitter rewrites the score strip with a wrong value at random
steps; SpatialReshuffle re-randomizes building slots that re-enter the
viewport. Every trace entry carries the engine's ground truth so
metrics can be validated against what was actually injected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import glyphs
from .engines import Engine, make_engine
from .engines import traveler as tv

KINDS = ("reference", "numeric_jitter", "spatial_reshuffle", "composite")

# Corruption RNG streams are independent of the engine's world streams,
# so corrupted and reference runs share identical underlying worlds.
_JITTER_STREAM = 0xC1
_RESHUFFLE_STREAM = 0xC2

JITTER_SPAN = 5  # score offsets drawn from {-5..+5} \ {0}


@dataclass
class GeneratorSpec:
    game: str
    seed: int
    kind: str = "reference"
    p: float = 0.0  # numeric jitter probability per step
    q: float = 0.0  # spatial reshuffle probability per step
    engine_config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0 or not 0.0 <= self.q <= 1.0:
            raise ValueError("corruption probabilities must be in [0, 1]")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "game": self.game, "seed": self.seed}
        if self.kind in ("numeric_jitter", "composite"):
            out["p"] = self.p
        if self.kind in ("spatial_reshuffle", "composite"):
            out["q"] = self.q
        if self.engine_config:
            out["engine_config"] = dict(self.engine_config)
        return out

    @classmethod
    def from_json(cls, data: dict, game: str | None = None,
                  seed: int | None = None) -> "GeneratorSpec":
        """Parse a spec, flattening composite wrapper lists.

        Composite parts are applied outside-in; since the two wrappers
        touch disjoint pixels (strip vs world band), the composition
        collapses to a single (p, q) pipeline. Duplicate kinds are
        rejected.
        """
        data = dict(data)
        kind = data.get("kind", "reference")
        game = data.get("game", game)
        seed = data.get("seed", seed)
        if game is None or seed is None:
            raise ValueError("generator spec needs a game and a seed")
        engine_config = data.get("engine_config", {})
        if kind == "composite":
            p = q = None
            for part in data.get("parts", []):
                part_kind = part.get("kind")
                if part_kind == "numeric_jitter":
                    if p is not None:
                        raise ValueError("composite repeats numeric_jitter")
                    p = float(part.get("p", 0.0))
                elif part_kind == "spatial_reshuffle":
                    if q is not None:
                        raise ValueError("composite repeats spatial_reshuffle")
                    q = float(part.get("q", 0.0))
                else:
                    raise ValueError(f"composite cannot nest kind {part_kind!r}")
            if p is None and "p" in data:
                p = float(data["p"])  # already-flattened form
            if q is None and "q" in data:
                q = float(data["q"])
            return cls(game=game, seed=int(seed), kind="composite",
                       p=p or 0.0, q=q or 0.0, engine_config=engine_config)
        p = float(data.get("p", 0.0))
        q = float(data.get("q", 0.0))
        if kind == "reference" and (p or q):
            raise ValueError("reference generator takes no corruption probabilities")
        if kind == "numeric_jitter" and q:
            raise ValueError("numeric_jitter takes no q")
        if kind == "spatial_reshuffle" and p:
            raise ValueError("spatial_reshuffle takes no p")
        return cls(game=game, seed=int(seed), kind=kind, p=p, q=q,
                   engine_config=engine_config)


@dataclass
class TraceEntry:
    step: int
    action: str
    frame: np.ndarray
    rendered_score: int
    true_score: int
    true_event: bool
    true_player_pos: tuple
    injected_numeric: bool
    injected_spatial: bool
    terminal: bool


def _viewport_slots(player_x: int) -> set[int]:
    x0 = player_x - tv.FRAME_W // 2
    return set(range(x0 // tv.SLOT_W, (x0 + tv.FRAME_W - 1) // tv.SLOT_W + 1))


class Generator:
    """A stepped frame source wrapping one engine, with optional
    numeric-jitter (p) and spatial-reshuffle (q) corruption stages."""

    def __init__(self, spec: GeneratorSpec):
        self.spec = spec
        self.engine: Engine = make_engine(spec.game, spec.seed, **spec.engine_config)
        self.p = float(spec.p)
        self.q = float(spec.q)
        if (self.q > 0 or spec.kind == "spatial_reshuffle") and spec.game != "traveler":
            raise ValueError("spatial reshuffle needs a slot world (traveler only)")
        self._jitter_rng = np.random.default_rng((spec.seed, _JITTER_STREAM))
        self._reshuffle_rng = np.random.default_rng((spec.seed, _RESHUFFLE_STREAM))
        self._overrides: dict[int, tuple[int, int]] = {}
        if spec.game == "traveler":
            self._seen = _viewport_slots(self.engine.player_x)
            self._away: set[int] = set()
        self._step = 0

    @property
    def game(self) -> str:
        return self.spec.game

    @property
    def exhausted(self) -> bool:
        return self.engine.exhausted

    def set_corruption(self, p: float | None = None, q: float | None = None) -> None:
        """Live-adjust corruption rates (used by interactive sessions)."""
        if p is not None:
            if not 0.0 <= p <= 1.0:
                raise ValueError("p must be in [0, 1]")
            self.p = float(p)
        if q is not None:
            if not 0.0 <= q <= 1.0:
                raise ValueError("q must be in [0, 1]")
            if q > 0 and self.game != "traveler":
                raise ValueError("spatial reshuffle needs a slot world (traveler only)")
            self.q = float(q)

    def _stay_action(self) -> str:
        return "stay+stay" if self.game == "pong" else "stay"

    def initial(self) -> TraceEntry:
        """Frame 0 with a placeholder 'stay' action and no corruption."""
        frame = self.engine.render()
        return TraceEntry(
            step=0,
            action=self._stay_action(),
            frame=frame,
            rendered_score=self.engine.score,
            true_score=self.engine.score,
            true_event=False,
            true_player_pos=self.engine.player_pos(),
            injected_numeric=False,
            injected_spatial=False,
            terminal=self.engine.terminal,
        )

    def _apply_reshuffle(self) -> bool:
        """Re-randomize building slots re-entering the viewport. One
        Bernoulli draw per step keeps the stream aligned under live
        q toggles."""
        fired = self._reshuffle_rng.random() < self.q
        now = _viewport_slots(self.engine.player_x)
        re_entering = now & self._away
        self._seen |= now
        self._away = self._seen - now
        if not fired or not re_entering:
            return False
        injected = False
        for slot in sorted(re_entering):
            current = self._overrides.get(slot, self.engine.slot_content(slot))
            if current is None:
                continue  # empty slots have nothing to reshuffle
            while True:
                sub = (
                    int(self._reshuffle_rng.integers(len(tv.PALETTE))),
                    int(self._reshuffle_rng.integers(tv.HEIGHT_LO, tv.HEIGHT_HI + 1)),
                )
                if sub != current:
                    break
            self._overrides[slot] = sub
            injected = True
        return injected

    def _apply_jitter(self, frame: np.ndarray, true_score: int) -> tuple[int, bool]:
        """Overwrite the strip with a wrong nearby score. One uniform
        draw per step keeps the stream aligned under live p toggles."""
        fired = self._jitter_rng.random() < self.p
        if not fired:
            return true_score, False
        while True:
            u = int(self._jitter_rng.integers(-JITTER_SPAN, JITTER_SPAN + 1))
            if u == 0:
                continue
            wrong = max(0, min(999, true_score + u))
            if wrong != true_score:
                break
        frame[: glyphs.STRIP_HEIGHT] = glyphs.render_score_strip(
            frame.shape[1], wrong
        )
        return wrong, True

    def step(self, action: str) -> TraceEntry:
        self._step += 1
        result = self.engine.step(action)
        injected_spatial = False
        if self.game == "traveler":
            injected_spatial = self._apply_reshuffle()
            if self._overrides:
                frame = self.engine.render(slot_overrides=self._overrides)
            else:
                frame = result.frame
        else:
            frame = result.frame
        frame = frame if frame.flags.writeable else frame.copy()
        rendered, injected_numeric = self._apply_jitter(frame, result.score)
        return TraceEntry(
            step=self._step,
            action=action,
            frame=frame,
            rendered_score=rendered,
            true_score=result.score,
            true_event=result.event,
            true_player_pos=result.player_pos,
            injected_numeric=injected_numeric,
            injected_spatial=injected_spatial,
            terminal=result.terminal,
        )


def build_generator(spec: GeneratorSpec | dict, game: str | None = None,
                    seed: int | None = None) -> Generator:
    if isinstance(spec, dict):
        spec = GeneratorSpec.from_json(spec, game=game, seed=seed)
    return Generator(spec)


# ---- collection policies ---------------------------------------------------

PONG_FOLLOW_PROB = 0.8


def make_policy(game: str, rng: np.random.Generator):
    """The per-game action source used for dataset collection and
    evaluation. Traveler and PacMan walk uniformly at random; Pong
    paddles follow the ball with probability 0.8, otherwise move at
    random. All policies hold still once the game is over (the frozen
    tail carries no motion to imitate)."""
    if game == "traveler":
        choices = ("left", "right", "stay")

        def policy(engine):
            if engine.terminal:
                return "stay"
            return choices[rng.integers(3)]

        return policy

    if game == "pacman":

        def policy(engine):
            if engine.terminal:
                return "stay"
            return engine.actions[rng.integers(len(engine.actions))]

        return policy

    if game == "pong":
        from .engines import pong as pg

        moves = ("up", "down", "stay")

        def follow(paddle_y: int, ball_y: int) -> str:
            ball_c = ball_y + pg.BALL // 2
            paddle_c = paddle_y + pg.PADDLE_H // 2
            if ball_c < paddle_c:
                return "up"
            if ball_c > paddle_c:
                return "down"
            return "stay"

        def policy(engine):
            if engine.terminal:
                return "stay+stay"
            parts = []
            for paddle_y in (engine.left_y, engine.right_y):
                if rng.random() < PONG_FOLLOW_PROB:
                    parts.append(follow(paddle_y, engine.ball_y))
                else:
                    parts.append(moves[rng.integers(3)])
            return f"{parts[0]}+{parts[1]}"

        return policy

    raise ValueError(f"unknown game {game!r}")
