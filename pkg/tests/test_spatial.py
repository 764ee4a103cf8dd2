"""Map construction: psnr, matching (vs a brute-force oracle), writes,
local windows, persistence, and preset parsing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conworld import spatial
from conworld.engines import make_engine
from conworld.engines import traveler as tv
from conworld.metrics import match_config_for

from oracle_helpers import brute_match, random_grid_instance, random_strip_instance

# ---- psnr -------------------------------------------------------------------


def test_psnr_identical_hits_cap():
    a = np.random.default_rng(0).integers(0, 256, (10, 10, 3), dtype=np.uint8)
    assert spatial.psnr(a, a) == spatial.PSNR_CAP


def test_psnr_matches_float_reference():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.integers(0, 256, (9, 13, 3), dtype=np.uint8)
        b = rng.integers(0, 256, (9, 13, 3), dtype=np.uint8)
        mask = rng.random((9, 13)) < 0.7
        if not mask.any():
            continue
        d = a.astype(np.float64) - b.astype(np.float64)
        mse = float(np.mean((d * d)[mask]))
        want = min(10.0 * math.log10(255.0**2 / mse), 99.0) if mse else 99.0
        got = spatial.psnr(a, b, mask)
        assert got == pytest.approx(want, rel=1e-12)


def test_psnr_is_summation_order_independent():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 256, (1, 400, 3), dtype=np.uint8)
    b = rng.integers(0, 256, (1, 400, 3), dtype=np.uint8)
    perm = rng.permutation(400)
    assert spatial.psnr(a, b) == spatial.psnr(a[:, perm], b[:, perm])


def test_psnr_rejects_bad_input():
    a = np.zeros((4, 4, 3), dtype=np.uint8)
    with pytest.raises(ValueError):
        spatial.psnr(a, np.zeros((4, 5, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        spatial.psnr(a, a, np.zeros((4, 4), dtype=bool))


@settings(max_examples=50)
@given(st.integers(0, 255), st.integers(0, 255))
def test_psnr_constant_pair(u, v):
    a = np.full((6, 6, 3), u, dtype=np.uint8)
    b = np.full((6, 6, 3), v, dtype=np.uint8)
    got = spatial.psnr(a, b)
    if u == v:
        assert got == spatial.PSNR_CAP
    else:
        want = 10.0 * math.log10(255.0**2 / (u - v) ** 2)
        assert got == pytest.approx(min(want, 99.0), rel=1e-12)


def test_blue_mask_picks_blue_only():
    img = np.array(
        [[(0, 0, 255), (33, 33, 222), (255, 255, 255),
          (0, 0, 100), (200, 200, 240), (0, 0, 0)]],
        dtype=np.uint8,
    )
    assert spatial.blue_mask(img).tolist() == [[True, True, False, False, False, False]]


# ---- matching vs brute force --------------------------------------------------


def test_strip_matcher_agrees_with_oracle():
    rng = np.random.default_rng(7)
    cfg = spatial.MatchConfig()
    for _ in range(200):
        wmap, band, delta2 = random_strip_instance(rng)
        want_d, want_s, want_amb = brute_match(wmap, band, delta2, cfg)
        res = spatial.match_observation(wmap, band, delta2, cfg)
        if want_d is None:
            assert res.offset == 0 and res.ambiguous
            continue
        assert res.offset == want_d
        assert res.best_psnr == want_s
        assert res.ambiguous == want_amb


def test_grid_matcher_agrees_with_oracle():
    rng = np.random.default_rng(8)
    cfg = spatial.MatchConfig()
    for _ in range(200):
        wmap, band, delta2 = random_grid_instance(rng)
        want_d, want_s, want_amb = brute_match(wmap, band, delta2, cfg)
        res = spatial.match_observation(wmap, band, delta2, cfg)
        if want_d is None:
            assert res.offset == (0, 0) and res.ambiguous
            continue
        assert res.offset == want_d
        assert res.best_psnr == pytest.approx(want_s, rel=1e-12)
        assert res.ambiguous == want_amb


def test_matcher_finds_planted_offset():
    # plant the band at a known shift inside a noise map; no ties possible
    rng = np.random.default_rng(9)
    cfg = spatial.MatchConfig()
    for shift in (-6, -1, 0, 3, 10):
        pixels = rng.integers(0, 256, (24, 200, 3), dtype=np.uint8)
        wmap = spatial.WorldMap(
            topology="strip", band_height=24, frame_width=40,
            pixels=pixels, observed=np.ones((24, 200), dtype=bool),
            origin=(0,), player_pos=(100,), linked=1,
        )
        x = 100 + shift
        band = pixels[:, x - 20 : x + 20].copy()
        res = spatial.match_observation(wmap, band, 10, cfg)
        assert res.offset == shift
        assert res.best_psnr == spatial.PSNR_CAP
        assert not res.ambiguous


def test_tie_breaks_prefer_small_then_negative_offset():
    # constant map and band: every candidate scores the cap
    pixels = np.full((8, 120, 3), 200, dtype=np.uint8)
    wmap = spatial.WorldMap(
        topology="strip", band_height=8, frame_width=24,
        pixels=pixels, observed=np.ones((8, 120), dtype=bool),
        origin=(0,), player_pos=(60,), linked=1,
    )
    band = np.full((8, 24, 3), 200, dtype=np.uint8)
    res = spatial.match_observation(wmap, band, 5, spatial.MatchConfig())
    assert res.offset == 0
    assert res.ambiguous  # flat landscape must raise the flag

    # 2D: Manhattan radius, then lexicographic
    gmap = spatial.WorldMap(
        topology="grid", band_height=16, frame_width=16,
        pixels=np.zeros((60, 60, 3), dtype=np.uint8),
        observed=np.ones((60, 60), dtype=bool),
        origin=(0, 0), player_pos=(30, 30), linked=1,
    )
    gband = np.zeros((16, 16, 3), dtype=np.uint8)
    gres = spatial.match_observation(gmap, gband, 4, spatial.MatchConfig())
    assert gres.offset == (0, 0)
    assert gres.ambiguous


# ---- linking and writing -------------------------------------------------------


def frame_of(eng):
    return eng.render()


def test_first_observation_anchors_at_origin():
    eng = make_engine("traveler", 0)
    wmap = spatial.map_for_game("traveler")
    cfg = match_config_for("traveler")
    res = spatial.link_observation(wmap, frame_of(eng), config=cfg)
    assert res.offset == 0 and res.position == 0
    assert not res.ambiguous
    assert wmap.origin == (-tv.FRAME_W // 2,)
    assert wmap.player_pos == (0,)
    assert wmap.linked == 1


def test_link_tracks_player_and_grows_map():
    eng = make_engine("traveler", 0)
    wmap = spatial.map_for_game("traveler")
    cfg = match_config_for("traveler")
    spatial.link_observation(wmap, frame_of(eng), config=cfg)
    for i in range(10):
        eng.step("right")
        res = spatial.link_observation(wmap, frame_of(eng), config=cfg)
        assert res.offset == tv.SPEED
        assert spatial.export_position(wmap) == eng.player_x
    assert wmap.pixels.shape[1] == tv.FRAME_W + 10 * tv.SPEED
    # every hole left in the mask sits under the final sprite position
    hole_rows = np.nonzero(~wmap.observed)[0]
    assert (~wmap.observed).sum() <= tv.SPRITE_SIZE**2
    assert set(hole_rows) <= set(
        range(tv.SPRITE_ROW0, tv.SPRITE_ROW0 + tv.SPRITE_SIZE)
    )


def test_write_exclude_rect_is_never_written():
    cfg = match_config_for("traveler")
    assert cfg.write_exclude_rect is not None
    eng = make_engine("traveler", 1)
    wmap = spatial.map_for_game("traveler")
    spatial.link_observation(wmap, frame_of(eng), config=cfg)
    r0, r1, c0, c1 = cfg.write_exclude_rect
    c_off = -tv.FRAME_W // 2 - wmap.origin[0]  # obs left edge in map cols
    assert not wmap.observed[r0:r1, c0 + c_off : c1 + c_off].any()
    # after walking away and back, the sprite hole fills with real world
    for _ in range(6):
        eng.step("right")
        spatial.link_observation(wmap, frame_of(eng), config=cfg)
    for _ in range(6):
        eng.step("left")
        spatial.link_observation(wmap, frame_of(eng), config=cfg)
    assert wmap.observed[r0:r1, c0 + c_off : c1 + c_off].all()
    sprite_px = wmap.pixels[r0:r1, c0 + c_off : c1 + c_off]
    assert not (sprite_px == tv.SPRITE_COLOR).all()


def test_newest_write_wins():
    wmap = spatial.new_map("strip", 4, 8)
    a = np.full((4, 8, 3), 10, dtype=np.uint8)
    b = np.full((4, 8, 3), 20, dtype=np.uint8)
    spatial.write_observation(wmap, a, 0)
    spatial.write_observation(wmap, b, 2)
    # columns overwritten by b, the rest keep a
    x0 = wmap.origin[0]
    assert (wmap.pixels[:, 2 - x0 - 4 : 2 - x0 + 4] == 20).all()
    assert (wmap.pixels[:, 0 : 2 - x0 - 4] == 10).all()


def test_grid_write_grows_in_both_axes():
    wmap = spatial.new_map("grid", 6, 6)
    band = np.full((6, 6, 3), 7, dtype=np.uint8)
    spatial.write_observation(wmap, band, (0, 0))
    spatial.write_observation(wmap, band, (-4, 5))
    assert wmap.origin == (-7, -3)
    assert wmap.pixels.shape == (11, 10, 3)
    assert wmap.player_pos == (-4, 5)


def test_retrieve_local_map_window():
    eng = make_engine("traveler", 0)
    wmap = spatial.map_for_game("traveler")
    cfg = match_config_for("traveler")
    spatial.link_observation(wmap, frame_of(eng), config=cfg)
    win = spatial.retrieve_local_map(wmap, cfg.delta1)
    assert win.pixels.shape == (tv.BAND_H, 2 * cfg.delta1, 3)
    assert win.extent == ((-cfg.delta1, cfg.delta1),)
    # observed center comes from the map, unobserved flanks stay black
    pad = cfg.delta1 - tv.FRAME_W // 2
    assert (win.pixels[:, :pad] == 0).all()
    assert (win.pixels[:, -pad:] == 0).all()
    band = spatial.map_band(frame_of(eng))
    r0, r1, c0, c1 = cfg.write_exclude_rect
    seen = np.ones((tv.BAND_H, tv.FRAME_W), dtype=bool)
    seen[r0:r1, c0:c1] = False
    assert np.array_equal(
        win.pixels[:, pad : pad + tv.FRAME_W][seen], band[seen]
    )


def test_retrieve_local_map_needs_wide_window():
    wmap = spatial.map_for_game("traveler")
    with pytest.raises(ValueError):
        spatial.retrieve_local_map(wmap, tv.FRAME_W // 2)


def test_export_position_requires_links():
    wmap = spatial.map_for_game("traveler")
    with pytest.raises(ValueError):
        spatial.export_position(wmap)


# ---- persistence ----------------------------------------------------------------


def test_map_save_load_roundtrip(tmp_path):
    eng = make_engine("traveler", 3)
    wmap = spatial.map_for_game("traveler")
    cfg = match_config_for("traveler")
    spatial.link_observation(wmap, frame_of(eng), config=cfg)
    for _ in range(4):
        eng.step("right")
        spatial.link_observation(wmap, frame_of(eng), config=cfg)
    spatial.save_map(wmap, tmp_path / "m.png")
    back = spatial.load_map(tmp_path / "m.png")
    assert back.topology == wmap.topology
    assert back.origin == wmap.origin
    assert back.player_pos == wmap.player_pos
    assert back.linked == wmap.linked
    assert np.array_equal(back.pixels, wmap.pixels)
    assert np.array_equal(back.observed, wmap.observed)


def test_save_empty_map_rejected(tmp_path):
    with pytest.raises(ValueError):
        spatial.save_map(spatial.map_for_game("traveler"), tmp_path / "m.png")


# ---- preset maps ----------------------------------------------------------------


def make_band(slots, x0=0, width=tv.FRAME_W):
    eng = make_engine("traveler", 0, preset_slots=slots)
    return eng._render_world(x0, width)


def test_preset_parse_roundtrip():
    slots = {0: (1, 30), 1: None, 2: (4, 72), 3: (0, 24),
             4: None, 5: (9, 55), 6: (3, 41), 7: (7, 68),
             8: (5, 33), 9: None, 10: (2, 50), 11: (8, 24)}
    band = make_band(slots, 0, 12 * tv.SLOT_W)
    parsed = spatial.parse_preset_slots(band, 0)
    assert parsed == slots


def test_preset_parse_respects_origin():
    slots = {-2: (3, 40), -1: None, **{i: (1, 30) for i in range(10)}}
    band = make_band(slots, -2 * tv.SLOT_W, 12 * tv.SLOT_W)
    parsed = spatial.parse_preset_slots(band, -2 * tv.SLOT_W)
    assert parsed[-2] == (3, 40)
    assert parsed[-1] is None


def test_preset_parse_rejects_garbage():
    band = make_band({i: (1, 30) for i in range(12)}, 0, 12 * tv.SLOT_W)
    bad = band.copy()
    bad[10, 3] = (12, 34, 56)  # stray pixel in the sky
    with pytest.raises(spatial.UnparsableColumnError):
        spatial.parse_preset_slots(bad, 0)

    bad = band.copy()
    bad[tv.GROUND_TOP + 1, 50] = (0, 0, 0)  # hole in the ground
    with pytest.raises(spatial.UnparsableColumnError):
        spatial.parse_preset_slots(bad, 0)

    with pytest.raises(spatial.UnparsableColumnError):
        spatial.parse_preset_slots(band[:, : tv.FRAME_W - 8], 0)  # too narrow

    with pytest.raises(spatial.UnparsableColumnError):
        spatial.parse_preset_slots(band, 3)  # unaligned origin


def test_preset_parse_rejects_illegal_building():
    slots = {i: (1, 30) for i in range(12)}
    band = make_band(slots, 0, 12 * tv.SLOT_W)
    # shave the building in slot 0 down below the legal minimum height
    band[: tv.GROUND_TOP - 10, 0 : tv.SLOT_W] = tv.SKY
    with pytest.raises(spatial.UnparsableColumnError):
        spatial.parse_preset_slots(band, 0)


def test_load_preset_map_is_fully_observed():
    slots = {i: ((i * 3) % 10, 24 + (i * 7) % 49) if i % 4 else None
             for i in range(16)}
    band = make_band(slots, 0, 16 * tv.SLOT_W)
    wmap = spatial.load_preset_map(band, 0)
    assert wmap.topology == "strip"
    assert wmap.observed.all()
    assert wmap.origin == (0,)
    # an engine seeded with the same slots renders frames the map can place
    eng = make_engine("traveler", 0, preset_slots=slots)
    eng.player_x = 64
    wmap.player_pos = (64,)  # resume mid-map
    cfg = match_config_for("traveler")
    res = spatial.link_observation(wmap, eng.render(), config=cfg)
    assert res.position == 64
    assert not res.ambiguous
