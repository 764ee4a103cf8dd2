"""Episode collection, storage, splits, replay, and offline stitching.

An episode directory is self-describing: manifest.json carries the
generator spec, the action script, and the logged truth lists, frames/
holds one lossless PNG per frame, and gt_map.png (+ mask) snapshots the
engine's world raster at the end of the walk. Everything a worker
writes is a pure function of (game, episode seed, episode length), so
collection output is byte-identical no matter how many processes share
the work.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import spatial
from .engines.base import NoMapError
from .generators import Generator, GeneratorSpec, make_policy
from .metrics import episode_seed, match_config_for
from .numeric import featurize

FPS = 30
FRAME_CAP = 512
DEFAULT_EPISODES = {"traveler": 1000, "pong": 300, "pacman": 300}


class ReplayError(Exception):
    """A stored episode no longer reproduces from its manifest."""


@dataclass
class Episode:
    manifest: dict
    frames: list[np.ndarray]
    gt_map: np.ndarray | None = None
    gt_mask: np.ndarray | None = None

    @property
    def game(self) -> str:
        return self.manifest["game"]

    @property
    def gt_origin(self):
        origin = self.manifest.get("gt_origin")
        return None if origin is None else tuple(origin)


def _episode_policy_rng(ep_seed: int) -> np.random.Generator:
    # Derived from the episode seed alone so a worker needs no shared state.
    return np.random.default_rng(np.random.SeedSequence(ep_seed, spawn_key=(1,)))


def build_episode(game: str, ep_seed: int, episode_len: int = 48) -> Episode:
    """Run one reference episode and package it, still in memory.

    Fixed-length games record exactly episode_len frames. Variable-length
    games (pong, pacman) run until the engine is exhausted, terminal tail
    included, capped at FRAME_CAP frames.
    """
    spec = GeneratorSpec(game, int(ep_seed))
    gen = Generator(spec)
    policy = make_policy(game, _episode_policy_rng(int(ep_seed)))

    entries = [gen.initial()]
    target = episode_len if game == "traveler" else FRAME_CAP
    while len(entries) < target and not gen.exhausted:
        entries.append(gen.step(policy(gen.engine)))

    terminal_step = next((e.step for e in entries if e.terminal), None)
    try:
        gt_pixels, gt_mask, gt_origin = gen.engine.ground_truth_map()
    except NoMapError:
        gt_pixels = gt_mask = gt_origin = None

    manifest = {
        "game": game,
        "seed": int(ep_seed),
        "generator": spec.to_json(),
        "frame_size": list(entries[0].frame.shape[:2]),
        "fps": FPS,
        "frame_cap": FRAME_CAP,
        "episode_len": len(entries),
        "terminal_step": terminal_step,
        "actions": [e.action for e in entries],
        "events": [bool(e.true_event) for e in entries],
        "scores": [int(e.true_score) for e in entries],
        "player_x": [_pos_json(e.true_player_pos) for e in entries],
        "gt_origin": None if gt_origin is None else list(gt_origin),
    }
    return Episode(manifest, [e.frame for e in entries], gt_pixels, gt_mask)


def _pos_json(pos):
    if pos is None or pos == ():
        return None
    if len(pos) == 1:
        return int(pos[0])
    return [int(v) for v in pos]


def _pos_tuple(raw):
    if raw is None:
        return None
    if isinstance(raw, int):
        return (raw,)
    return tuple(raw)


def save_episode(ep: Episode, ep_dir: str | Path) -> None:
    ep_dir = Path(ep_dir)
    (ep_dir / "frames").mkdir(parents=True, exist_ok=True)
    with open(ep_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(ep.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for i, frame in enumerate(ep.frames):
        Image.fromarray(frame).save(ep_dir / "frames" / f"frame_{i:04d}.png")
    if ep.gt_map is not None:
        Image.fromarray(ep.gt_map).save(ep_dir / "gt_map.png")
        Image.fromarray(ep.gt_mask).save(ep_dir / "gt_map_mask.png")


def load_episode(ep_dir: str | Path) -> Episode:
    ep_dir = Path(ep_dir)
    with open(ep_dir / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    frames = []
    for i in range(manifest["episode_len"]):
        with Image.open(ep_dir / "frames" / f"frame_{i:04d}.png") as img:
            frames.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
    gt_map = gt_mask = None
    if (ep_dir / "gt_map.png").exists():
        with Image.open(ep_dir / "gt_map.png") as img:
            gt_map = np.asarray(img.convert("RGB"), dtype=np.uint8)
        with Image.open(ep_dir / "gt_map_mask.png") as img:
            gt_mask = np.asarray(img, dtype=bool)
    return Episode(manifest, frames, gt_map, gt_mask)


def _collect_worker(args) -> dict:
    game, index, ep_seed, episode_len, out_dir = args
    ep = build_episode(game, ep_seed, episode_len)
    ep_id = f"ep{index:05d}"
    save_episode(ep, Path(out_dir) / ep_id)
    return {
        "id": ep_id,
        "index": index,
        "seed": int(ep_seed),
        "n_frames": ep.manifest["episode_len"],
        "terminal_step": ep.manifest["terminal_step"],
    }


def collect(game: str, n_episodes: int, episode_len: int = 48, seed: int = 0,
            parallelism: int = 1, out_dir: str | Path = "collection",
            seeds=None) -> dict:
    """Collect reference episodes into out_dir, one directory each.

    Episode seeds come from the master seed through a splittable counter
    scheme, or verbatim from `seeds` when given. Workers share nothing,
    so any parallelism degree yields byte-identical output.
    """
    derived = seeds is None
    if derived:
        if n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        seeds = [episode_seed(seed, i) for i in range(n_episodes)]
    else:
        seeds = [int(s) for s in seeds]
        n_episodes = len(seeds)
        if not seeds:
            raise ValueError("seeds must be non-empty")
    if episode_len < 2:
        raise ValueError("episode_len must be >= 2")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(game, i, s, episode_len, str(out_dir)) for i, s in enumerate(seeds)]
    if parallelism > 1:
        with multiprocessing.Pool(parallelism) as pool:
            rows = pool.map(_collect_worker, jobs, chunksize=1)
    else:
        rows = [_collect_worker(j) for j in jobs]
    rows.sort(key=lambda r: r["index"])

    summary = {
        "game": game,
        "master_seed": seed if derived else None,
        "n_episodes": n_episodes,
        "episode_len": episode_len,
        "fps": FPS,
        "frame_cap": FRAME_CAP,
        "episodes": rows,
    }
    with open(out_dir / "collection.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def load_collection(path: str | Path) -> dict:
    path = Path(path)
    with open(path / "collection.json", encoding="utf-8") as fh:
        return json.load(fh)


def split(collection: dict | str | Path, eval_fraction: float):
    """Deterministic (train_ids, eval_ids) partition by hashed episode seed."""
    if not isinstance(collection, dict):
        collection = load_collection(collection)
    if not 0.0 < eval_fraction < 1.0:
        raise ValueError("eval_fraction must be in (0, 1)")
    episodes = collection["episodes"]
    if not episodes:
        raise ValueError("empty collection")
    ranked = sorted(
        episodes,
        key=lambda e: hashlib.sha256(str(e["seed"]).encode()).hexdigest(),
    )
    n_eval = int(round(len(episodes) * eval_fraction))
    n_eval = min(max(n_eval, 1), len(episodes) - 1) if len(episodes) > 1 else 1
    eval_ids = sorted(e["id"] for e in ranked[:n_eval])
    train_ids = sorted(e["id"] for e in ranked[n_eval:])
    return train_ids, eval_ids


@dataclass
class StitchResult:
    constructed: spatial.WorldMap
    psnr_vs_gt: float
    position_errors: list
    ambiguous_steps: list

    @property
    def max_position_error(self) -> int:
        return max(self.position_errors) if self.position_errors else 0


def stitch_episode(episode: Episode | str | Path,
                   config: spatial.MatchConfig | None = None) -> StitchResult:
    """Rebuild the world map from stored frames alone and score it.

    Folds link_observation over the frames, then compares the construction
    against the stored ground-truth raster over the jointly observed
    region. Position error per step is the deviation of the exported
    trajectory from the logged one, after aligning the anchor frames.
    """
    ep = episode if isinstance(episode, Episode) else load_episode(episode)
    if ep.gt_map is None:
        raise NoMapError(f"{ep.game} episodes carry no ground-truth map")
    cfg = config or match_config_for(ep.game)
    wmap = spatial.map_for_game(ep.game)

    exported = []
    ambiguous = []
    for t, frame in enumerate(ep.frames):
        res = spatial.link_observation(wmap, frame, config=cfg)
        exported.append(wmap.player_pos)
        if res.ambiguous:
            ambiguous.append(t)

    logged = [_pos_tuple(p) for p in ep.manifest["player_x"]]
    # The map anchors wherever the first frame landed; compare shapes of
    # the two trajectories, not absolute coordinates.
    base_l, base_e = logged[0], exported[0]
    errors = []
    for lp, xp in zip(logged, exported):
        errors.append(max(
            abs((xv - bx) - (lv - bl))
            for xv, bx, lv, bl in zip(xp, base_e, lp, base_l)
        ))

    # Same anchor correction puts the constructed raster in world coords.
    shift = tuple(lv - xv for lv, xv in zip(base_l, base_e))
    psnr_vs_gt = _map_vs_gt_psnr(wmap, ep, shift, cfg.psnr_cap)
    return StitchResult(wmap, psnr_vs_gt, errors, ambiguous)


def _map_vs_gt_psnr(wmap: spatial.WorldMap, ep: Episode, shift, cap: float) -> float:
    gt_origin = ep.gt_origin or (0,) * (2 if wmap.topology == "grid" else 1)
    if wmap.topology == "strip":
        mx0, gx0 = wmap.origin[0] + shift[0], gt_origin[0]
        lo = max(mx0, gx0)
        hi = min(mx0 + wmap.pixels.shape[1], gx0 + ep.gt_map.shape[1])
        if lo >= hi:
            raise ValueError("constructed map does not overlap the ground truth")
        cons = wmap.pixels[:, lo - mx0 : hi - mx0]
        mask = wmap.observed[:, lo - mx0 : hi - mx0] \
            & ep.gt_mask[:, lo - gx0 : hi - gx0]
        gt = ep.gt_map[:, lo - gx0 : hi - gx0]
        return spatial.psnr(cons, gt, mask, cap)
    mx0, my0 = wmap.origin[0] + shift[0], wmap.origin[1] + shift[1]
    gx0, gy0 = gt_origin
    lx = max(mx0, gx0)
    hx = min(mx0 + wmap.pixels.shape[1], gx0 + ep.gt_map.shape[1])
    ly = max(my0, gy0)
    hy = min(my0 + wmap.pixels.shape[0], gy0 + ep.gt_map.shape[0])
    if lx >= hx or ly >= hy:
        raise ValueError("constructed map does not overlap the ground truth")
    cons = wmap.pixels[ly - my0 : hy - my0, lx - mx0 : hx - mx0]
    mask = wmap.observed[ly - my0 : hy - my0, lx - mx0 : hx - mx0] \
        & ep.gt_mask[ly - gy0 : hy - gy0, lx - gx0 : hx - gx0]
    gt = ep.gt_map[ly - gy0 : hy - gy0, lx - gx0 : hx - gx0]
    return spatial.psnr(cons, gt, mask, cap)


def replay_episode(episode: Episode | str | Path) -> int:
    """Re-run the stored action script; raise ReplayError on any drift.

    Returns the number of frames verified.
    """
    ep = episode if isinstance(episode, Episode) else load_episode(episode)
    man = ep.manifest
    spec = GeneratorSpec.from_json(man["generator"])
    gen = Generator(spec)
    entry = gen.initial()
    for t in range(man["episode_len"]):
        if t > 0:
            entry = gen.step(man["actions"][t])
        if not np.array_equal(entry.frame, ep.frames[t]):
            raise ReplayError(f"frame mismatch at step {t}")
        if int(entry.true_score) != man["scores"][t]:
            raise ReplayError(f"score mismatch at step {t}")
        if bool(entry.true_event) != man["events"][t]:
            raise ReplayError(f"event mismatch at step {t}")
        if _pos_json(entry.true_player_pos) != man["player_x"][t]:
            raise ReplayError(f"position mismatch at step {t}")
    return man["episode_len"]


def event_training_set(collection_dir: str | Path, ids=None):
    """(X, y) transition samples for the event predictor.

    Each sample pairs frame t with the action taken at t+1; the label is
    whether that step fired the score event. Post-terminal tail frames
    carry no decisions and are skipped.
    """
    collection_dir = Path(collection_dir)
    summary = load_collection(collection_dir)
    game = summary["game"]
    if ids is None:
        ids = sorted(e["id"] for e in summary["episodes"])
    xs, ys = [], []
    for ep_id in ids:
        ep = load_episode(collection_dir / ep_id)
        man = ep.manifest
        last = man["episode_len"] - 1
        if man["terminal_step"] is not None:
            last = min(last, man["terminal_step"])
        for t in range(last):
            xs.append(featurize(ep.frames[t], man["actions"][t + 1], game))
            ys.append(man["events"][t + 1])
    if not xs:
        raise ValueError("no transitions in the selected episodes")
    return np.stack(xs), np.asarray(ys, dtype=bool)
