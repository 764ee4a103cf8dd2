"""Numerical consistency: the score ledger, a rule-based event oracle,
and a small trainable event classifier over pooled frame features.

The ledger is the source of truth for scores; the classifier exists to
exercise the learnable-predictor contract and is trained with plain
mini-batch gradient descent on a one-hidden-layer perceptron written
directly in numpy (float64 math, float32 storage).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import glyphs
from .engines.base import Engine

SCORE_MAX = 999
POOLED = 24  # featurizer output is POOLED x POOLED

_PONG_MOVES = ("up", "down", "stay")


def decompose_digits(value: int) -> tuple[str, str, str]:
    """Zero-padded hundreds/tens/units characters of a ledger value."""
    if not 0 <= value <= SCORE_MAX:
        raise ValueError(f"value out of ledger range: {value}")
    text = f"{value:03d}"
    return (text[0], text[1], text[2])


@dataclass(frozen=True)
class ScoreRecord:
    value: int
    digits: tuple[str, str, str]
    saturated: bool = False

    @classmethod
    def from_value(cls, value: int, saturated: bool = False) -> "ScoreRecord":
        return cls(value=value, digits=decompose_digits(value), saturated=saturated)


def logic_calculate(record: ScoreRecord, event: bool) -> ScoreRecord:
    """Fold one event into the ledger; saturates (flagged) at 999."""
    if not event:
        return record
    if record.value >= SCORE_MAX:
        return ScoreRecord.from_value(SCORE_MAX, saturated=True)
    return ScoreRecord.from_value(record.value + 1)


# ---- rule-based event oracle ---------------------------------------------


def oracle_event(engine: Engine, action: str) -> bool:
    """Would this action trigger the scoring event? Pure; no stepping.

    Re-evaluates the game rules directly against engine state, so it can
    be co-simulated against engine.step as an independent check.
    """
    if action not in engine.actions:
        raise ValueError(f"unknown action {action!r} for {engine.name}")
    if engine.terminal:
        return False

    if engine.name == "traveler":
        dx = {"left": -4, "right": 4, "stay": 0}[action]
        old_slot = engine.player_x // 8
        new_slot = (engine.player_x + dx) // 8
        return new_slot != old_slot and engine.slot_content(new_slot) is None

    if engine.name == "pong":
        from .engines import pong as pg

        left_move, right_move = action.split("+")
        dy = {"up": -pg.PADDLE_SPEED, "down": pg.PADDLE_SPEED, "stay": 0}
        left_y = pg.PongEngine._clamp_paddle(engine.left_y + dy[left_move])
        right_y = pg.PongEngine._clamp_paddle(engine.right_y + dy[right_move])
        nx = engine.ball_x + engine.vel_x
        ny = engine.ball_y + engine.vel_y
        if ny < pg.TOP:
            ny = 2 * pg.TOP - ny
        elif ny + pg.BALL > pg.BOTTOM:
            ny = 2 * (pg.BOTTOM - pg.BALL) - ny
        if engine.vel_x < 0 and engine.ball_x >= pg.LEFT_PLANE and nx < pg.LEFT_PLANE:
            return ny < left_y + pg.PADDLE_H and ny + pg.BALL > left_y
        if (
            engine.vel_x > 0
            and engine.ball_x + pg.BALL <= pg.RIGHT_PLANE
            and nx + pg.BALL > pg.RIGHT_PLANE
        ):
            return ny < right_y + pg.PADDLE_H and ny + pg.BALL > right_y
        return False

    if engine.name == "pacman":
        from .engines import pacman as pm

        dr, dc = pm._MOVES[action]
        target = (engine.pac[0] + dr, engine.pac[1] + dc)
        if target == engine.pac or engine.grid[target] == pm.WALL:
            return False
        return engine.grid[target] == pm.DOT

    raise ValueError(f"no oracle for game {engine.name!r}")


# ---- features -------------------------------------------------------------


def action_one_hot(action: str, game: str) -> np.ndarray:
    if game == "pong":
        left_move, right_move = action.split("+")
        vec = np.zeros(6, dtype=np.float32)
        vec[_PONG_MOVES.index(left_move)] = 1.0
        vec[3 + _PONG_MOVES.index(right_move)] = 1.0
        return vec
    actions = {"traveler": ("left", "right", "stay"),
               "pacman": ("up", "down", "left", "right", "stay")}[game]
    vec = np.zeros(len(actions), dtype=np.float32)
    vec[actions.index(action)] = 1.0
    return vec


def featurize(frame: np.ndarray, action: str, game: str) -> np.ndarray:
    """Strip-free grayscale frame average-pooled to 24x24 in [0,1],
    concatenated with the game's one-hot action embedding."""
    band = frame[glyphs.STRIP_HEIGHT:].astype(np.float32)
    gray = band.mean(axis=2) / 255.0
    img = Image.fromarray(gray, mode="F")
    pooled = np.asarray(img.resize((POOLED, POOLED), Image.BOX), dtype=np.float32)
    return np.concatenate([pooled.ravel(), action_one_hot(action, game)])


def feature_length(game: str) -> int:
    onehot = {"traveler": 3, "pong": 6, "pacman": 5}[game]
    return POOLED * POOLED + onehot


# ---- event classifier ------------------------------------------------------

HIDDEN = 128


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class EventPredictor:
    """One-hidden-layer rectifier perceptron with a single event logit."""

    def __init__(self, in_dim: int, hidden: int = HIDDEN, seed: int = 0,
                 game: str | None = None):
        self.in_dim = int(in_dim)
        self.hidden = int(hidden)
        self.seed = int(seed)
        self.game = game
        rng = np.random.default_rng((self.seed, 0x77))
        self.W1 = rng.normal(0.0, np.sqrt(2.0 / in_dim), (in_dim, hidden))
        self.b1 = np.zeros(hidden)
        self.W2 = rng.normal(0.0, np.sqrt(2.0 / hidden), (hidden, 1))
        self.b2 = np.zeros(1)
        self.history: dict = {}
        self._input_folded = False

    # -- math ---------------------------------------------------------------

    def logits(self, X: np.ndarray) -> np.ndarray:
        z1 = X.astype(np.float64) @ self.W1 + self.b1
        a1 = np.maximum(z1, 0.0)
        return (a1 @ self.W2 + self.b2).ravel()

    def loss_and_grad(self, X: np.ndarray, y: np.ndarray):
        """Mean cross-entropy and its analytic gradients."""
        X = X.astype(np.float64)
        y = y.astype(np.float64)
        z1 = X @ self.W1 + self.b1
        a1 = np.maximum(z1, 0.0)
        z2 = (a1 @ self.W2 + self.b2).ravel()
        loss = float(np.mean(np.logaddexp(0.0, z2) - y * z2))
        dz2 = ((_sigmoid(z2) - y) / len(y))[:, None]
        grads = {
            "W2": a1.T @ dz2,
            "b2": dz2.sum(axis=0),
        }
        dz1 = (dz2 @ self.W2.T) * (z1 > 0.0)
        grads["W1"] = X.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        grads["b2"] = grads["b2"].ravel()
        return loss, grads

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        z = self.logits(X)
        return float(np.mean(np.logaddexp(0.0, z) - y.astype(np.float64) * z))

    # -- training -------------------------------------------------------------

    def fit(self, X: np.ndarray, y: np.ndarray, epochs: int = 40,
            lr: float = 0.03, batch_size: int = 64, momentum: float = 0.9,
            val: tuple[np.ndarray, np.ndarray] | None = None) -> dict:
        y = np.asarray(y)
        if len(np.unique(y)) < 2:
            raise ValueError("degenerate dataset: only one class present")
        if not self._input_folded:
            # Fold training-set statistics into the input layer so the net
            # starts in a standardized regime. Pure reparameterization: the
            # weight layout (and the saved blob) is unchanged, but gradient
            # descent no longer has to fight correlated all-positive inputs.
            mu = X.mean(axis=0, dtype=np.float64)
            sd = np.maximum(X.std(axis=0, dtype=np.float64), 0.05)
            self.W1 = self.W1 / sd[:, None]
            self.b1 = self.b1 - mu @ self.W1
            self._input_folded = True
        rng = np.random.default_rng((self.seed, 0x78))
        velocity = {k: np.zeros_like(getattr(self, k)) for k in ("W1", "b1", "W2", "b2")}
        epoch_loss = []
        for _ in range(epochs):
            order = rng.permutation(len(y))
            for start in range(0, len(y), batch_size):
                idx = order[start : start + batch_size]
                _, grads = self.loss_and_grad(X[idx], y[idx])
                for k, g in grads.items():
                    velocity[k] = momentum * velocity[k] - lr * g
                    setattr(self, k, getattr(self, k) + velocity[k])
            epoch_loss.append(self.loss(X, y))
        # Weights are stored as float32; quantize now so in-memory
        # predictions match the serialized model exactly.
        for k in ("W1", "b1", "W2", "b2"):
            setattr(self, k, getattr(self, k).astype(np.float32).astype(np.float64))
        self.history = {
            "epochs": epochs,
            "lr": lr,
            "batch_size": batch_size,
            "momentum": momentum,
            "epoch_loss": epoch_loss,
            "joint_loss_weight": 1e-4,  # manifest bookkeeping; the standalone fit ignores it
        }
        if val is not None:
            self.history["val_accuracy"] = self.accuracy(*val)
        return self.history

    # -- inference --------------------------------------------------------------

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(np.atleast_2d(X)))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X) >= 0.5

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y, dtype=bool)))

    def predict_event(self, frame: np.ndarray, action: str) -> float:
        if self.game is None:
            raise ValueError("model carries no game tag")
        feats = featurize(frame, action, self.game)
        if feats.shape[0] != self.in_dim:
            raise ValueError(f"feature length {feats.shape[0]} != model input {self.in_dim}")
        return float(self.predict_proba(feats)[0])

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """JSON manifest plus a flat little-endian float32 weight blob."""
        base = Path(path)
        if base.suffix == ".json":
            base = base.with_suffix("")
        parts = [np.asarray(getattr(self, k), dtype="<f4").ravel()
                 for k in ("W1", "b1", "W2", "b2")]
        blob = np.concatenate(parts)
        Path(f"{base}.bin").write_bytes(blob.tobytes())
        manifest = {
            "in_dim": self.in_dim,
            "hidden": self.hidden,
            "seed": self.seed,
            "game": self.game,
            "history": self.history,
        }
        Path(f"{base}.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "EventPredictor":
        base = Path(path)
        if base.suffix in (".json", ".bin"):
            base = base.with_suffix("")
        manifest = json.loads(Path(f"{base}.json").read_text(encoding="utf-8"))
        model = cls(manifest["in_dim"], manifest["hidden"], manifest["seed"],
                    manifest["game"])
        blob = np.frombuffer(Path(f"{base}.bin").read_bytes(), dtype="<f4")
        shapes = [
            ("W1", (model.in_dim, model.hidden)),
            ("b1", (model.hidden,)),
            ("W2", (model.hidden, 1)),
            ("b2", (1,)),
        ]
        at = 0
        for name, shape in shapes:
            n = int(np.prod(shape))
            setattr(model, name, blob[at : at + n].reshape(shape).astype(np.float64))
            at += n
        if at != blob.size:
            raise ValueError("weight blob size does not match manifest dims")
        model.history = manifest["history"]
        model._input_folded = bool(model.history)
        return model
