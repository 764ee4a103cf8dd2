"""Score strip rendering and exact readback."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conworld import glyphs


def test_roundtrip_every_value():
    for v in range(1000):
        strip = glyphs.render_score_strip(96, v)
        assert glyphs.read_score_strip(strip) == v


@given(st.integers(0, 999), st.sampled_from([96, 128, 200]))
def test_roundtrip_any_width(value, width):
    strip = glyphs.render_score_strip(width, value)
    assert glyphs.read_score_strip(strip) == value


def test_strip_shape_and_palette():
    strip = glyphs.render_score_strip(128, 417)
    assert strip.shape == (glyphs.STRIP_HEIGHT, 128, 3)
    assert strip.dtype == np.uint8
    colors = {tuple(c) for c in strip.reshape(-1, 3)}
    assert colors == {glyphs.STRIP_BG, glyphs.STRIP_FG}


def test_reads_from_full_frame():
    frame = np.zeros((96, 96, 3), dtype=np.uint8)
    frame[: glyphs.STRIP_HEIGHT] = glyphs.render_score_strip(96, 33)
    assert glyphs.read_score_strip(frame) == 33


def test_out_of_range_rejected():
    with pytest.raises(ValueError):
        glyphs.render_score_strip(96, 1000)
    with pytest.raises(ValueError):
        glyphs.render_score_strip(96, -1)


def test_digit_cells_inside_strip():
    origins = glyphs.digit_cell_origins(96)
    assert len(origins) == glyphs.N_DIGITS
    for y0, x0 in origins:
        assert y0 >= 0 and y0 + glyphs.DIGIT_H <= glyphs.STRIP_HEIGHT
        assert x0 >= 0 and x0 + glyphs.DIGIT_W <= 96
    # cells must not overlap
    xs = sorted(x0 for _, x0 in origins)
    assert all(b - a >= glyphs.DIGIT_W for a, b in zip(xs, xs[1:]))


def test_erased_glyph_pixel_is_unreadable():
    strip = glyphs.render_score_strip(96, 555)
    y0, x0 = glyphs.digit_cell_origins(96)[1]
    fg = np.argwhere(np.all(strip[y0 : y0 + glyphs.DIGIT_H,
                                  x0 : x0 + glyphs.DIGIT_W] == 0, axis=-1))
    r, c = fg[0]
    strip[y0 + r, x0 + c] = glyphs.STRIP_BG
    with pytest.raises(glyphs.UnreadableScoreError):
        glyphs.read_score_strip(strip)


def test_stray_ink_is_unreadable():
    strip = glyphs.render_score_strip(96, 0)
    y0, x0 = glyphs.digit_cell_origins(96)[0]
    # corner of the digit cell is background for every glyph
    strip[y0, x0] = glyphs.STRIP_FG
    with pytest.raises(glyphs.UnreadableScoreError):
        glyphs.read_score_strip(strip)


def test_glyph_masks_distinct():
    masks = glyphs.GLYPH_MASKS
    for i in range(10):
        for j in range(i + 1, 10):
            assert not np.array_equal(masks[i], masks[j])
