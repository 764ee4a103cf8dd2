"""Consistency metrics over generated traces: SpaCon, NumCon, ActAcc.

All three are computed from frames alone (plus the logged input actions
and ground-truth events), never from generator internals: scores come
back through exact glyph readback, positions through sliding-window map
linking, and actions through deterministic frame-difference extractors.
The same accumulator drives offline evaluation and live service
telemetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import glyphs, spatial
from .engines import pacman as pm
from .engines import pong as pg
from .engines import traveler as tv
from .generators import Generator, GeneratorSpec, make_policy
from .glyphs import UnreadableScoreError, read_score_strip

readback_score = read_score_strip

TRAVELER_SPRITE_RECT = (
    tv.SPRITE_ROW0,
    tv.SPRITE_ROW0 + tv.SPRITE_SIZE,
    tv.SPRITE_COL0,
    tv.SPRITE_COL0 + tv.SPRITE_SIZE,
)
_PAC_R0 = pm.BAND_H // 2 - pm.CELL // 2
_PAC_C0 = pm.FRAME_W // 2 - pm.CELL // 2
PACMAN_SPRITE_RECT = (_PAC_R0, _PAC_R0 + pm.CELL, _PAC_C0, _PAC_C0 + pm.CELL)


def match_config_for(game: str) -> spatial.MatchConfig:
    if game == "traveler":
        d1, d2 = spatial.MATCH_DELTAS["traveler"]
        return spatial.MatchConfig(
            delta1=d1, delta2=d2, write_exclude_rect=TRAVELER_SPRITE_RECT
        )
    if game == "pacman":
        d1, d2 = spatial.MATCH_DELTAS["pacman"]
        return spatial.MatchConfig(
            delta1=d1, delta2=d2, write_exclude_rect=PACMAN_SPRITE_RECT
        )
    raise ValueError(f"{game} has no map to match against")


# ---- action extractors -----------------------------------------------------


def _shift_mse(prev: np.ndarray, cur: np.ndarray, dx: int, dy: int,
               exclude) -> float:
    """MSE of cur against prev shifted so cur[r, c] ~ prev[r+dy, c+dx]."""
    h, w = cur.shape[:2]
    c0, c1 = max(0, -dx), min(w, w - dx)
    r0, r1 = max(0, -dy), min(h, h - dy)
    a = cur[r0:r1, c0:c1].astype(np.int32)
    b = prev[r0 + dy : r1 + dy, c0 + dx : c1 + dx]
    d = a - b
    sq = (d * d).sum(axis=2, dtype=np.int64)
    er0, er1, ec0, ec1 = exclude
    xr0, xr1 = max(er0 - r0, 0), min(max(er1 - r0, 0), r1 - r0)
    xc0, xc1 = max(ec0 - c0, 0), min(max(ec1 - c0, 0), c1 - c0)
    total = int(sq.sum())
    kept = sq.size
    if xr0 < xr1 and xc0 < xc1:
        total -= int(sq[xr0:xr1, xc0:xc1].sum())
        kept -= (xr1 - xr0) * (xc1 - xc0)
    if kept == 0:
        return math.inf
    return total / (kept * cur.shape[2])


def infer_action_traveler(prev: np.ndarray, cur: np.ndarray) -> str:
    """Which action was taken between two frames, from the band shift."""
    prev_band, cur_band = prev[glyphs.STRIP_HEIGHT:], cur[glyphs.STRIP_HEIGHT:]
    # The screen-fixed sprite (padded by the step size) never votes.
    exclude = (
        tv.SPRITE_ROW0,
        tv.SPRITE_ROW0 + tv.SPRITE_SIZE,
        tv.SPRITE_COL0 - tv.SPEED,
        tv.SPRITE_COL0 + tv.SPRITE_SIZE + tv.SPEED,
    )
    best, best_d = math.inf, 0
    for d in (0, -tv.SPEED, tv.SPEED):
        mse = _shift_mse(prev_band, cur_band, d, 0, exclude)
        if mse < best:
            best, best_d = mse, d
    return {0: "stay", tv.SPEED: "right", -tv.SPEED: "left"}[best_d]


def _paddle_center(frame: np.ndarray, col0: int) -> float | None:
    """Center row of the longest all-white vertical run in the paddle lane."""
    lane = frame[glyphs.STRIP_HEIGHT :, col0 : col0 + pg.PADDLE_W]
    rows = (lane == 255).all(axis=2).all(axis=1)
    best_len, best_start = 0, -1
    run_start = None
    for r, white in enumerate(list(rows) + [False]):
        if white and run_start is None:
            run_start = r
        elif not white and run_start is not None:
            if r - run_start > best_len:
                best_len, best_start = r - run_start, run_start
            run_start = None
    if best_len == 0:
        return None
    return best_start + (best_len - 1) / 2.0


def infer_action_pong(prev: np.ndarray, cur: np.ndarray) -> str | None:
    moves = []
    for col0 in (pg.LEFT_COL, pg.RIGHT_COL):
        a = _paddle_center(prev, col0)
        b = _paddle_center(cur, col0)
        if a is None or b is None:
            return None
        delta = b - a
        moves.append("down" if delta > 0 else "up" if delta < 0 else "stay")
    return f"{moves[0]}+{moves[1]}"


def infer_action_pacman(prev: np.ndarray, cur: np.ndarray) -> str:
    prev_band, cur_band = prev[glyphs.STRIP_HEIGHT:], cur[glyphs.STRIP_HEIGHT:]
    exclude = (
        PACMAN_SPRITE_RECT[0] - pm.CELL,
        PACMAN_SPRITE_RECT[1] + pm.CELL,
        PACMAN_SPRITE_RECT[2] - pm.CELL,
        PACMAN_SPRITE_RECT[3] + pm.CELL,
    )
    candidates = (
        ("stay", 0, 0),
        ("up", 0, -pm.CELL),
        ("down", 0, pm.CELL),
        ("left", -pm.CELL, 0),
        ("right", pm.CELL, 0),
    )
    best, best_a = math.inf, "stay"
    for name, dx, dy in candidates:
        mse = _shift_mse(prev_band, cur_band, dx, dy, exclude)
        if mse < best:
            best, best_a = mse, name
    return best_a


def infer_action(game: str, prev: np.ndarray, cur: np.ndarray) -> str | None:
    return {
        "traveler": infer_action_traveler,
        "pong": infer_action_pong,
        "pacman": infer_action_pacman,
    }[game](prev, cur)


# ---- the accumulator -------------------------------------------------------


def f_measure(tp: int, fp: int, fn: int) -> float:
    """F with the eventless conventions: 1.0 when neither side has
    events, 0.0 when exactly one side does."""
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


class ConsistencyAccumulator:
    """Folds a trace, one entry at a time, into the three metrics."""

    def __init__(self, game: str, config: spatial.MatchConfig | None = None,
                 with_map: bool = True):
        self.game = game
        self.has_map = with_map and game != "pong"
        self.config = config or (match_config_for(game) if self.has_map else None)
        self.map = spatial.map_for_game(game) if self.has_map else None
        self.spacon_sum = 0.0
        self.spacon_steps = 0
        self.tp = self.fp = self.fn = self.tn = 0
        self.unreadable = 0
        self.act_correct = 0
        self.act_total = 0
        self.links = 0
        self.ambiguous = 0
        self.steps = 0
        self.position_trail: list = []
        self._prev_frame: np.ndarray | None = None
        self._prev_read: int | None = None
        self._prev_pos = None

    # -- spacon helpers ------------------------------------------------------

    def _spacon_sample_strip(self, band, new_x, old_x) -> None:
        w = band.shape[1]
        nx0 = new_x - w // 2
        newly = np.ones(w, dtype=bool)
        o_lo, o_hi = old_x - w // 2, old_x + w // 2
        lo, hi = max(nx0, o_lo), min(nx0 + w, o_hi)
        if lo < hi:
            newly[lo - nx0 : hi - nx0] = False
        if not newly.any():
            return
        mx0 = self.map.origin[0]
        mw = self.map.pixels.shape[1]
        lo, hi = max(nx0, mx0), min(nx0 + w, mx0 + mw)
        if lo >= hi:
            return
        obs_crop = band[:, lo - nx0 : hi - nx0]
        map_crop = self.map.pixels[:, lo - mx0 : hi - mx0]
        mask = self.map.observed[:, lo - mx0 : hi - mx0] & newly[lo - nx0 : hi - nx0][None, :]
        if not mask.any():
            return
        self.spacon_sum += spatial.psnr(obs_crop, map_crop, mask, self.config.psnr_cap)
        self.spacon_steps += 1

    def _spacon_sample_grid(self, band, new_pos, old_pos) -> None:
        h, w = band.shape[:2]
        nx0, ny0 = new_pos[0] - w // 2, new_pos[1] - h // 2
        ox0, oy0 = old_pos[0] - w // 2, old_pos[1] - h // 2
        newly = np.ones((h, w), dtype=bool)
        lx, hx = max(nx0, ox0), min(nx0 + w, ox0 + w)
        ly, hy = max(ny0, oy0), min(ny0 + h, oy0 + h)
        if lx < hx and ly < hy:
            newly[ly - ny0 : hy - ny0, lx - nx0 : hx - nx0] = False
        if not newly.any():
            return
        mx0, my0 = self.map.origin
        mh, mw = self.map.pixels.shape[:2]
        lx, hx = max(nx0, mx0), min(nx0 + w, mx0 + mw)
        ly, hy = max(ny0, my0), min(ny0 + h, my0 + mh)
        if lx >= hx or ly >= hy:
            return
        obs_crop = band[ly - ny0 : hy - ny0, lx - nx0 : hx - nx0]
        map_crop = self.map.pixels[ly - my0 : hy - my0, lx - mx0 : hx - mx0]
        mask = (
            self.map.observed[ly - my0 : hy - my0, lx - mx0 : hx - mx0]
            & newly[ly - ny0 : hy - ny0, lx - nx0 : hx - nx0]
        )
        if not mask.any():
            return
        self.spacon_sum += spatial.psnr(obs_crop, map_crop, mask, self.config.psnr_cap)
        self.spacon_steps += 1

    # -- folding ---------------------------------------------------------------

    def observe(self, entry) -> dict:
        """Fold one TraceEntry; returns the step's live telemetry."""
        try:
            read = read_score_strip(entry.frame)
        except UnreadableScoreError:
            read = None
        ambiguous = False

        if self.has_map:
            band = spatial.map_band(entry.frame)
            if self.map.empty:
                spatial.link_observation(self.map, entry.frame, config=self.config)
                self._prev_pos = self.map.player_pos
            else:
                m = spatial.match_observation(
                    self.map, band, self.config.delta2, self.config
                )
                new_pos = m.position if self.map.topology == "grid" else (m.position,)
                if self.map.topology == "strip":
                    self._spacon_sample_strip(band, new_pos[0], self._prev_pos[0])
                else:
                    self._spacon_sample_grid(band, new_pos, self._prev_pos)
                spatial.write_observation(self.map, band, m.position, self.config)
                self.links += 1
                self.ambiguous += int(m.ambiguous)
                ambiguous = m.ambiguous
                self._prev_pos = new_pos
            self.position_trail.append(
                self._prev_pos[0] if self.map.topology == "strip" else self._prev_pos
            )

        if self._prev_frame is not None:
            self.steps += 1
            if read is None or self._prev_read is None:
                self.unreadable += 1
            else:
                pred = read - self._prev_read == 1
                truth = entry.true_event
                if pred and truth:
                    self.tp += 1
                elif pred:
                    self.fp += 1
                elif truth:
                    self.fn += 1
                else:
                    self.tn += 1
            inferred = infer_action(self.game, self._prev_frame, entry.frame)
            if inferred is not None:
                self.act_total += 1
                self.act_correct += int(inferred == entry.action)

        self._prev_frame = entry.frame
        self._prev_read = read
        return {
            "score_readback": read,
            "ambiguous_match": ambiguous,
            "spacon_running": self.spacon(),
            "numcon_running": self.numcon(),
            "actacc_running": self.actacc(),
        }

    # -- results -----------------------------------------------------------------

    def spacon(self) -> float | None:
        if not self.has_map or self.spacon_steps == 0:
            return None
        return self.spacon_sum / self.spacon_steps

    def numcon(self) -> float:
        return f_measure(self.tp, self.fp, self.fn)

    def actacc(self) -> float | None:
        if self.act_total == 0:
            return None
        return self.act_correct / self.act_total

    def ambiguity_rate(self) -> float | None:
        if self.links == 0:
            return None
        return self.ambiguous / self.links

    def counts(self) -> dict:
        return {
            "steps": self.steps,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "unreadable": self.unreadable,
            "act_correct": self.act_correct,
            "act_total": self.act_total,
            "spacon_sum": self.spacon_sum,
            "spacon_steps": self.spacon_steps,
            "links": self.links,
            "ambiguous": self.ambiguous,
        }


# ---- whole-trace and evaluation entry points -------------------------------


def spacon(entries, game: str, config: spatial.MatchConfig | None = None) -> float | None:
    if game == "pong":
        raise ValueError("pong has no map; spacon undefined")
    acc = ConsistencyAccumulator(game, config)
    for e in entries:
        acc.observe(e)
    return acc.spacon()


def numcon(entries, game: str) -> float:
    acc = ConsistencyAccumulator(game, with_map=False)
    for e in entries:
        acc.observe(e)
    return acc.numcon()


def actacc(entries, game: str) -> float | None:
    acc = ConsistencyAccumulator(game, with_map=False)
    for e in entries:
        acc.observe(e)
    return acc.actacc()


@dataclass
class MetricReport:
    game: str
    generator: dict
    n_episodes: int
    episode_len: int
    seed: int
    spacon: float | None
    numcon: float
    precision: float | None
    recall: float | None
    actacc: float | None
    ambiguity_rate: float | None
    totals: dict
    per_episode: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "game": self.game,
            "generator": self.generator,
            "n_episodes": self.n_episodes,
            "episode_len": self.episode_len,
            "seed": self.seed,
            "metrics": {
                "spacon": self.spacon,
                "numcon": self.numcon,
                "precision": self.precision,
                "recall": self.recall,
                "actacc": self.actacc,
                "ambiguity_rate": self.ambiguity_rate,
                "fid": "n/a",
                "fvd": "n/a",
            },
            "totals": self.totals,
            "per_episode": self.per_episode,
        }


def episode_seed(master_seed: int, index: int) -> int:
    """Stable per-episode seed, independent of collection order."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def episode_policy_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index, 1)))


def evaluate(spec: GeneratorSpec, n_episodes: int = 100, episode_len: int = 48,
             config: spatial.MatchConfig | None = None) -> MetricReport:
    """Run the evaluation protocol: n seeded episodes through the
    generator, metrics pooled over all steps. spec.seed is the master
    seed; each episode derives its own. episode_len counts frames, so
    an episode is the initial frame plus episode_len - 1 policy steps.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if episode_len < 2:
        raise ValueError("episode_len must be >= 2")
    has_map = spec.game != "pong"
    totals = {
        "tp": 0, "fp": 0, "fn": 0, "tn": 0, "unreadable": 0,
        "act_correct": 0, "act_total": 0, "spacon_sum": 0.0,
        "spacon_steps": 0, "links": 0, "ambiguous": 0, "steps": 0,
    }
    per_episode = []
    for i in range(n_episodes):
        ep_spec = replace(spec, seed=episode_seed(spec.seed, i))
        gen = Generator(ep_spec)
        policy = make_policy(spec.game, episode_policy_rng(spec.seed, i))
        acc = ConsistencyAccumulator(spec.game, config, with_map=has_map)
        acc.observe(gen.initial())
        for _ in range(episode_len - 1):
            if gen.exhausted:
                break
            acc.observe(gen.step(policy(gen.engine)))
        counts = acc.counts()
        for k in totals:
            totals[k] += counts[k]
        per_episode.append({
            "index": i,
            "seed": ep_spec.seed,
            **counts,
            "numcon": acc.numcon(),
            "spacon": acc.spacon(),
            "actacc": acc.actacc(),
        })
    tp, fp, fn = totals["tp"], totals["fp"], totals["fn"]
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    return MetricReport(
        game=spec.game,
        generator=spec.to_json(),
        n_episodes=n_episodes,
        episode_len=episode_len,
        seed=spec.seed,
        spacon=(totals["spacon_sum"] / totals["spacon_steps"]
                if totals["spacon_steps"] else None),
        numcon=f_measure(tp, fp, fn),
        precision=precision,
        recall=recall,
        actacc=(totals["act_correct"] / totals["act_total"]
                if totals["act_total"] else None),
        ambiguity_rate=(totals["ambiguous"] / totals["links"]
                        if totals["links"] else None),
        totals=totals,
        per_episode=per_episode,
    )


def format_table(reports) -> str:
    """Render reports in the familiar metric-table layout."""
    if isinstance(reports, MetricReport):
        reports = [reports]
    headers = ["Game", "Generator", "ActAcc", "NumCon", "SpaCon", "FID", "FVD"]
    rows = []
    for r in reports:
        gen = r.generator.get("kind", "reference")
        extras = []
        if r.generator.get("p"):
            extras.append(f"p={r.generator['p']}")
        if r.generator.get("q"):
            extras.append(f"q={r.generator['q']}")
        if extras:
            gen += "{" + ",".join(extras) + "}"
        rows.append([
            r.game,
            gen,
            "n/a" if r.actacc is None else f"{r.actacc:.4f}",
            f"{r.numcon:.4f}",
            "n/a" if r.spacon is None else f"{r.spacon:.2f}",
            "n/a",
            "n/a",
        ])
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
