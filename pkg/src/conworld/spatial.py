"""Explicit world maps and sliding-window observation linking.

A WorldMap is a growable raster with a per-pixel observed mask and a
tracked player position. New observations are placed by exhaustive
integer-offset search within +-delta2 of the previous position,
maximizing PSNR over pixels that are both inside the map and already
observed. 1D strips compare raw RGB; 2D grids compare a blue-feature
mask. The newest observation always overwrites prior content.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import glyphs

PSNR_CAP = 99.0

# (delta1, delta2) per game with a map.
MATCH_DELTAS = {"traveler": (64, 10), "pacman": (74, 10)}


class UnparsableColumnError(ValueError):
    """A preset-map column is neither a building nor empty sky."""


@dataclass
class MatchConfig:
    delta1: int = 64
    delta2: int = 10
    ambiguity_epsilon: float = 0.5
    psnr_cap: float = PSNR_CAP
    blue_floor: int = 128
    blue_margin: int = 48
    # (row0, row1, col0, col1) in observation band coordinates; pixels in
    # this rect are never written into the map (screen-fixed sprite).
    write_exclude_rect: tuple[int, int, int, int] | None = None


@dataclass
class MatchResult:
    offset: int | tuple[int, int]
    position: int | tuple[int, int]
    best_psnr: float
    runner_up_margin: float
    ambiguous: bool
    overlap_fraction: float


@dataclass
class LocalMapWindow:
    pixels: np.ndarray
    extent: tuple  # world-coordinate interval(s) the window covers
    delta1: int


@dataclass
class WorldMap:
    topology: str  # "strip" or "grid"
    band_height: int
    frame_width: int
    pixels: np.ndarray | None = None  # (H, W, 3) uint8
    observed: np.ndarray | None = None  # (H, W) bool
    origin: tuple = ()  # world coordinate of raster (0, 0): (x,) or (x, y)
    player_pos: tuple | None = None
    linked: int = 0  # observations linked so far

    def __post_init__(self):
        if self.topology not in ("strip", "grid"):
            raise ValueError(f"unknown topology {self.topology!r}")

    @property
    def empty(self) -> bool:
        return self.pixels is None


def new_map(topology: str, band_height: int, frame_width: int) -> WorldMap:
    return WorldMap(topology=topology, band_height=band_height, frame_width=frame_width)


def map_for_game(game: str) -> WorldMap:
    from .engines import make_engine  # local import to avoid a cycle

    eng_cls = type(make_engine(game, 0))
    topology = eng_cls.map_topology
    if topology is None:
        raise ValueError(f"{game} has no world map")
    h, w = eng_cls.frame_shape
    return new_map(topology, h - glyphs.STRIP_HEIGHT, w)


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None,
         cap: float = PSNR_CAP) -> float:
    """10*log10(255^2 / MSE) over masked pixels, all channels; capped.

    Integer rasters are scored in exact integer arithmetic, so the
    result is independent of summation order and any two
    implementations of the same MSE agree bitwise (ties in matching
    stay ties).
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if mask is not None and not mask.any():
        raise ValueError("empty mask")
    if np.issubdtype(a.dtype, np.integer) and np.issubdtype(b.dtype, np.integer):
        d = a.astype(np.int64) - b.astype(np.int64)
        sq = d * d
        if sq.ndim == 3:
            sq = sq.sum(axis=2)
        if mask is None:
            total = int(sq.sum())
            count = sq.size
        else:
            total = int(sq[mask].sum())
            count = int(np.count_nonzero(mask))
        channels = a.shape[2] if a.ndim == 3 else 1
        if total == 0:
            return cap
        mse = total / (count * channels)
    else:
        if mask is not None:
            a = a[mask]
            b = b[mask]
        diff = a.astype(np.float64) - b.astype(np.float64)
        mse = float(np.mean(diff * diff))
        if mse == 0.0:
            return cap
    return min(10.0 * math.log10(255.0 * 255.0 / mse), cap)


def blue_mask(rgb: np.ndarray, floor: int = 128, margin: int = 48) -> np.ndarray:
    """Pixels that read as 'blue': strong B channel dominating R and G."""
    r = rgb[..., 0].astype(np.int16)
    g = rgb[..., 1].astype(np.int16)
    b = rgb[..., 2].astype(np.int16)
    return (b >= floor) & (b - np.maximum(r, g) >= margin)


def map_band(frame: np.ndarray) -> np.ndarray:
    """Frame with the score strip rows removed."""
    return frame[glyphs.STRIP_HEIGHT:]


@functools.lru_cache(maxsize=None)
def _candidate_offsets_1d(delta2: int) -> tuple[int, ...]:
    # Tie-break order: smaller |d| first, then the negative one.
    return tuple(sorted(range(-delta2, delta2 + 1), key=lambda d: (abs(d), d)))


@functools.lru_cache(maxsize=None)
def _candidate_offsets_2d(delta2: int) -> tuple[tuple[int, int], ...]:
    cands = [(dx, dy) for dx in range(-delta2, delta2 + 1)
             for dy in range(-delta2, delta2 + 1)]
    return tuple(sorted(cands, key=lambda c: (abs(c[0]) + abs(c[1]), c[0], c[1])))


def _strip_scores(wmap: WorldMap, band: np.ndarray, prev: int, delta2: int,
                  cap: float) -> tuple[dict[int, float], dict[int, int]]:
    """Score every candidate offset in one vectorized pass.

    The map window is copied into a zero-padded extent with an all-False
    mask outside it, so windows hanging off the map edge score only
    their in-map pixels. Sums are exact integers, which makes each score
    equal bit for bit to psnr() on the corresponding crops.
    """
    h, w = band.shape[:2]
    lo_needed = prev - delta2 - w // 2
    width_ext = w + 2 * delta2
    ext = np.zeros((h, width_ext, 3), dtype=np.float64)
    extmask = np.zeros((h, width_ext), dtype=np.float64)
    mx0 = wmap.origin[0]
    mw = wmap.pixels.shape[1]
    lo = max(lo_needed, mx0)
    hi = min(lo_needed + width_ext, mx0 + mw)
    if lo < hi:
        ext[:, lo - lo_needed : hi - lo_needed] = wmap.pixels[:, lo - mx0 : hi - mx0]
        extmask[:, lo - lo_needed : hi - lo_needed] = wmap.observed[:, lo - mx0 : hi - mx0]

    # Sum_m (a-b)^2 = Sum m*a^2 + Sum m*b^2 - 2 Sum m*a*b, with the cross
    # and a^2 terms as GEMMs over the row*channel axis. Every intermediate
    # is an integer below 2^53, so float64 keeps the totals exact.
    obs = band.astype(np.float64)
    em = ext * extmask[:, :, None]
    e2_col = ((ext * ext).sum(axis=2) * extmask).sum(axis=0)
    cnt_col = extmask.sum(axis=0)
    obs2 = (obs * obs).sum(axis=2)

    obs_rc = obs.transpose(0, 2, 1).reshape(h * 3, w)
    em_rc = em.transpose(0, 2, 1).reshape(h * 3, width_ext)
    tmat = obs2.T @ extmask - 2.0 * (obs_rc.T @ em_rc)

    e2_cum = np.concatenate(([0.0], np.cumsum(e2_col)))
    cnt_cum = np.concatenate(([0.0], np.cumsum(cnt_col)))

    scores: dict[int, float] = {}
    ns: dict[int, int] = {}
    for off in range(-delta2, delta2 + 1):
        s = off + delta2
        n = int(cnt_cum[s + w] - cnt_cum[s])
        total = int(np.trace(tmat, offset=s) + (e2_cum[s + w] - e2_cum[s]))
        if n == 0:
            scores[off], ns[off] = -math.inf, 0
        elif total == 0:
            scores[off], ns[off] = cap, n
        else:
            mse = total / (n * 3)
            scores[off] = min(10.0 * math.log10(255.0 * 255.0 / mse), cap)
            ns[off] = n
    return scores, ns


def _grid_scores(map_feat: np.ndarray, observed: np.ndarray, obs_feat: np.ndarray,
                 origin: tuple, prev: tuple[int, int], delta2: int, cap: float):
    """Feature-mask scores for the full 2D candidate grid, one pass."""
    h, w = obs_feat.shape
    lo_x = prev[0] - delta2 - w // 2
    lo_y = prev[1] - delta2 - h // 2
    ext = np.zeros((h + 2 * delta2, w + 2 * delta2), dtype=bool)
    extmask = np.zeros_like(ext)
    mx0, my0 = origin
    mh, mw = map_feat.shape
    lx = max(lo_x, mx0)
    hx = min(lo_x + w + 2 * delta2, mx0 + mw)
    ly = max(lo_y, my0)
    hy = min(lo_y + h + 2 * delta2, my0 + mh)
    if lx < hx and ly < hy:
        ext[ly - lo_y : hy - lo_y, lx - lo_x : hx - lo_x] = \
            map_feat[ly - my0 : hy - my0, lx - mx0 : hx - mx0]
        extmask[ly - lo_y : hy - lo_y, lx - lo_x : hx - lo_x] = \
            observed[ly - my0 : hy - my0, lx - mx0 : hx - mx0]

    wins = np.lib.stride_tricks.sliding_window_view(ext, (h, w))
    wmask = np.lib.stride_tricks.sliding_window_view(extmask, (h, w))
    neq = wins != obs_feat
    neq &= wmask
    differs = neq.view(np.uint8).sum(axis=(2, 3), dtype=np.int64)
    # Mask-pixel counts per window via a summed-area table.
    sat = np.zeros((ext.shape[0] + 1, ext.shape[1] + 1), dtype=np.int64)
    sat[1:, 1:] = extmask.cumsum(axis=0).cumsum(axis=1)
    counts = sat[h:, w:] - sat[:-h, w:] - sat[h:, :-w] + sat[:-h, :-w]

    scores: dict[tuple[int, int], float] = {}
    ns: dict[tuple[int, int], int] = {}
    for dy in range(-delta2, delta2 + 1):
        for dx in range(-delta2, delta2 + 1):
            n = int(counts[dy + delta2, dx + delta2])
            differ = int(differs[dy + delta2, dx + delta2])
            if n == 0:
                scores[dx, dy], ns[dx, dy] = -math.inf, 0
            elif differ == 0:
                scores[dx, dy], ns[dx, dy] = cap, n
            else:
                mse = (differ * 65025.0) / n
                scores[dx, dy] = min(10.0 * math.log10(65025.0 / mse), cap)
                ns[dx, dy] = n
    return scores, ns


def match_observation(wmap: WorldMap, band: np.ndarray, delta2: int,
                      config: MatchConfig) -> MatchResult:
    """Best placement for a strip-free observation band; map unchanged."""
    cap = config.psnr_cap
    n_obs = band.shape[0] * band.shape[1]
    if wmap.topology == "strip":
        prev = wmap.player_pos[0]
        scores, counts = _strip_scores(wmap, band, prev, delta2, cap)
        best_d, best = None, -math.inf
        for d in _candidate_offsets_1d(delta2):
            if scores[d] > best:
                best_d, best = d, scores[d]
        if best_d is None or best == -math.inf:
            return MatchResult(0, prev, cap, math.inf, True, 0.0)
        runners = [s for d, s in scores.items() if abs(d - best_d) > 1]
        margin = best - max(runners) if runners else math.inf
        return MatchResult(
            offset=best_d,
            position=prev + best_d,
            best_psnr=best,
            runner_up_margin=margin,
            ambiguous=margin < config.ambiguity_epsilon,
            overlap_fraction=counts[best_d] / n_obs,
        )

    prev = wmap.player_pos
    obs_feat = blue_mask(band, config.blue_floor, config.blue_margin)
    map_feat = blue_mask(wmap.pixels, config.blue_floor, config.blue_margin)
    scores, counts = _grid_scores(map_feat, wmap.observed, obs_feat,
                                  wmap.origin, prev, delta2, cap)
    best_d, best = None, -math.inf
    for d in _candidate_offsets_2d(delta2):
        if scores[d] > best:
            best_d, best = d, scores[d]
    if best_d is None or best == -math.inf:
        return MatchResult((0, 0), prev, cap, math.inf, True, 0.0)
    runners = [
        s for d, s in scores.items()
        if max(abs(d[0] - best_d[0]), abs(d[1] - best_d[1])) > 1
    ]
    margin = best - max(runners) if runners else math.inf
    return MatchResult(
        offset=best_d,
        position=(prev[0] + best_d[0], prev[1] + best_d[1]),
        best_psnr=best,
        runner_up_margin=margin,
        ambiguous=margin < config.ambiguity_epsilon,
        overlap_fraction=counts[best_d] / n_obs,
    )


def _write_mask(shape: tuple[int, int], rect) -> np.ndarray:
    mask = np.ones(shape, dtype=bool)
    if rect is not None:
        r0, r1, c0, c1 = rect
        mask[r0:r1, c0:c1] = False
    return mask


def write_observation(wmap: WorldMap, band: np.ndarray, position,
                      config: MatchConfig | None = None) -> None:
    """Write an observation band into the map at a world position.

    Grows the raster as needed; the newest observation overwrites prior
    content except inside config.write_exclude_rect, which is skipped
    entirely (neither pixels nor the observed mask are touched there).
    """
    rect = config.write_exclude_rect if config else None
    h, w = band.shape[:2]
    writable = _write_mask((h, w), rect)

    if wmap.topology == "strip":
        x = position if isinstance(position, int) else position[0]
        ox0 = x - w // 2
        if wmap.empty:
            wmap.pixels = np.zeros((h, w, 3), dtype=np.uint8)
            wmap.observed = np.zeros((h, w), dtype=bool)
            wmap.origin = (ox0,)
        mx0 = wmap.origin[0]
        mw = wmap.pixels.shape[1]
        new_lo = min(mx0, ox0)
        new_hi = max(mx0 + mw, ox0 + w)
        if new_lo < mx0 or new_hi > mx0 + mw:
            pixels = np.zeros((h, new_hi - new_lo, 3), dtype=np.uint8)
            observed = np.zeros((h, new_hi - new_lo), dtype=bool)
            pixels[:, mx0 - new_lo : mx0 - new_lo + mw] = wmap.pixels
            observed[:, mx0 - new_lo : mx0 - new_lo + mw] = wmap.observed
            wmap.pixels, wmap.observed, wmap.origin = pixels, observed, (new_lo,)
            mx0 = new_lo
        c0 = ox0 - mx0
        region = wmap.pixels[:, c0 : c0 + w]
        region[writable] = band[writable]
        wmap.observed[:, c0 : c0 + w] |= writable
        wmap.player_pos = (x,)
    else:
        x, y = position
        ox0, oy0 = x - w // 2, y - h // 2
        if wmap.empty:
            wmap.pixels = np.zeros((h, w, 3), dtype=np.uint8)
            wmap.observed = np.zeros((h, w), dtype=bool)
            wmap.origin = (ox0, oy0)
        mx0, my0 = wmap.origin
        mh, mw = wmap.pixels.shape[:2]
        nlx, nly = min(mx0, ox0), min(my0, oy0)
        nhx, nhy = max(mx0 + mw, ox0 + w), max(my0 + mh, oy0 + h)
        if (nlx, nly) != (mx0, my0) or (nhx, nhy) != (mx0 + mw, my0 + mh):
            pixels = np.zeros((nhy - nly, nhx - nlx, 3), dtype=np.uint8)
            observed = np.zeros((nhy - nly, nhx - nlx), dtype=bool)
            pixels[my0 - nly : my0 - nly + mh, mx0 - nlx : mx0 - nlx + mw] = wmap.pixels
            observed[my0 - nly : my0 - nly + mh, mx0 - nlx : mx0 - nlx + mw] = wmap.observed
            wmap.pixels, wmap.observed, wmap.origin = pixels, observed, (nlx, nly)
            mx0, my0 = nlx, nly
        r0, c0 = oy0 - my0, ox0 - mx0
        region = wmap.pixels[r0 : r0 + h, c0 : c0 + w]
        region[writable] = band[writable]
        wmap.observed[r0 : r0 + h, c0 : c0 + w] |= writable
        wmap.player_pos = (x, y)
    wmap.linked += 1


def link_observation(wmap: WorldMap, obs: np.ndarray, delta2: int | None = None,
                     config: MatchConfig | None = None) -> MatchResult:
    """Match a full frame against the map, then write it at the winner.

    The score strip rows are removed before matching. The first-ever
    observation anchors at the world origin by definition.
    """
    config = config or MatchConfig()
    delta2 = config.delta2 if delta2 is None else delta2
    band = map_band(obs)
    if wmap.empty:
        # First observation ever: anchor at the world origin by definition
        # (unless a preset map provided content to match against).
        if wmap.player_pos is None:
            wmap.player_pos = (0,) if wmap.topology == "strip" else (0, 0)
        pos = wmap.player_pos[0] if wmap.topology == "strip" else wmap.player_pos
        zero = 0 if wmap.topology == "strip" else (0, 0)
        result = MatchResult(zero, pos, config.psnr_cap, math.inf, False, 1.0)
    else:
        result = match_observation(wmap, band, delta2, config)
    write_observation(wmap, band, result.position, config)
    return result


def export_position(wmap: WorldMap):
    """World coordinate of the last linked observation's center."""
    if wmap.player_pos is None or wmap.linked == 0:
        raise ValueError("map has no linked observation")
    return wmap.player_pos[0] if wmap.topology == "strip" else wmap.player_pos


def retrieve_local_map(wmap: WorldMap, delta1: int) -> LocalMapWindow:
    """A 2*delta1-wide crop centered on the player; unobserved areas black."""
    if 2 * delta1 <= wmap.frame_width:
        raise ValueError(
            f"delta1 {delta1} too small: window 2*{delta1} must exceed "
            f"observation width {wmap.frame_width}"
        )
    if wmap.topology == "strip":
        cx = wmap.player_pos[0] if wmap.player_pos else 0
        window = np.zeros((wmap.band_height, 2 * delta1, 3), dtype=np.uint8)
        if not wmap.empty:
            wx0 = cx - delta1
            mx0 = wmap.origin[0]
            lo = max(wx0, mx0)
            hi = min(wx0 + 2 * delta1, mx0 + wmap.pixels.shape[1])
            if lo < hi:
                src = wmap.pixels[:, lo - mx0 : hi - mx0]
                obs = wmap.observed[:, lo - mx0 : hi - mx0]
                dst = window[:, lo - wx0 : hi - wx0]
                dst[obs] = src[obs]
        extent = ((cx - delta1, cx + delta1),)
        return LocalMapWindow(window, extent, delta1)

    cx, cy = wmap.player_pos if wmap.player_pos else (0, 0)
    side = 2 * delta1
    window = np.zeros((side, side, 3), dtype=np.uint8)
    if not wmap.empty:
        wx0, wy0 = cx - delta1, cy - delta1
        mx0, my0 = wmap.origin
        mh, mw = wmap.pixels.shape[:2]
        lx, hx = max(wx0, mx0), min(wx0 + side, mx0 + mw)
        ly, hy = max(wy0, my0), min(wy0 + side, my0 + mh)
        if lx < hx and ly < hy:
            src = wmap.pixels[ly - my0 : hy - my0, lx - mx0 : hx - mx0]
            obs = wmap.observed[ly - my0 : hy - my0, lx - mx0 : hx - mx0]
            dst = window[ly - wy0 : hy - wy0, lx - wx0 : hx - wx0]
            dst[obs] = src[obs]
    extent = ((cx - delta1, cx + delta1), (cy - delta1, cy + delta1))
    return LocalMapWindow(window, extent, delta1)


# ---- persistence ---------------------------------------------------------


def save_map(wmap: WorldMap, png_path: str | Path) -> None:
    """Write pixels as PNG, mask as a bilevel PNG, metadata as JSON."""
    if wmap.empty:
        raise ValueError("cannot save a map with no linked observations")
    png_path = Path(png_path)
    base = png_path.with_suffix("") if png_path.suffix == ".png" else png_path
    Image.fromarray(wmap.pixels, "RGB").save(base.with_suffix(".png"), format="PNG")
    Image.fromarray(wmap.observed).save(Path(f"{base}.mask.png"), format="PNG")
    meta = {
        "topology": wmap.topology,
        "band_height": wmap.band_height,
        "frame_width": wmap.frame_width,
        "origin": list(wmap.origin),
        "player_pos": list(wmap.player_pos) if wmap.player_pos else None,
        "linked": wmap.linked,
    }
    Path(f"{base}.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_map(png_path: str | Path) -> WorldMap:
    png_path = Path(png_path)
    base = png_path.with_suffix("") if png_path.suffix == ".png" else png_path
    meta = json.loads(Path(f"{base}.json").read_text(encoding="utf-8"))
    pixels = np.asarray(Image.open(base.with_suffix(".png")).convert("RGB"))
    observed = np.asarray(Image.open(Path(f"{base}.mask.png"))).astype(bool)
    wmap = WorldMap(
        topology=meta["topology"],
        band_height=meta["band_height"],
        frame_width=meta["frame_width"],
        origin=tuple(meta["origin"]),
        player_pos=tuple(meta["player_pos"]) if meta["player_pos"] else None,
        linked=meta["linked"],
    )
    if pixels.size:
        wmap.pixels = pixels.copy()
        wmap.observed = observed.reshape(pixels.shape[:2]).copy()
    return wmap


# ---- preset maps ---------------------------------------------------------


def parse_preset_slots(image: np.ndarray, origin_x: int = 0):
    """Parse a map band back into column slots for engine seeding.

    Strict per-slot parse: a slot is Empty (sky above the ground line)
    or a Building (one uniform palette color block of legal height on
    the ground, sky above). Anything else raises UnparsableColumnError.
    """
    from .engines import traveler as tv

    h, w = image.shape[:2]
    if h != tv.BAND_H:
        raise UnparsableColumnError(
            f"preset height {h} != map band height {tv.BAND_H}"
        )
    if w < tv.FRAME_W:
        raise UnparsableColumnError(
            f"preset width {w} narrower than one frame ({tv.FRAME_W})"
        )
    if w % tv.SLOT_W or origin_x % tv.SLOT_W:
        raise UnparsableColumnError("preset width/origin must align to 8 px slots")

    palette = {color: i for i, color in enumerate(tv.PALETTE)}
    slots = {}
    for block in range(w // tv.SLOT_W):
        col = image[:, block * tv.SLOT_W : (block + 1) * tv.SLOT_W]
        slot = origin_x // tv.SLOT_W + block
        if not (col[tv.GROUND_TOP :] == tv.GROUND).all():
            raise UnparsableColumnError(f"slot {slot}: bad ground rows")
        above = col[: tv.GROUND_TOP]
        sky = (above == tv.SKY).all(axis=(1, 2))
        if sky.all():
            slots[slot] = None
            continue
        top = int(np.argmin(sky))
        height = tv.GROUND_TOP - top
        color = tuple(int(v) for v in above[top, 0])
        if (
            height < tv.HEIGHT_LO
            or height > tv.HEIGHT_HI
            or color not in palette
            or not (above[top:] == color).all()
            or not sky[:top].all()
        ):
            raise UnparsableColumnError(f"slot {slot}: not a building or empty")
        slots[slot] = (palette[color], height)
    return slots


def load_preset_map(image: np.ndarray, origin_x: int = 0) -> WorldMap:
    """A fully observed strip map from a hand-made (or exported) band image."""
    parse_preset_slots(image, origin_x)  # validates the image
    from .engines import traveler as tv

    wmap = new_map("strip", tv.BAND_H, tv.FRAME_W)
    wmap.pixels = np.ascontiguousarray(image, dtype=np.uint8).copy()
    wmap.observed = np.ones(image.shape[:2], dtype=bool)
    wmap.origin = (origin_x,)
    wmap.player_pos = (0,)
    return wmap
