import numpy as np
import pytest

from attnforge.crf import LabelMap
from attnforge.errors import ConfigError
from attnforge.vocpng import (decode_voc_mask, emit_binary_png,
                              emit_voc_mask, voc_palette)


def test_palette_known_entries():
    pal = voc_palette()
    assert pal[0:3] == [0, 0, 0]          # background: black
    assert pal[3:6] == [128, 0, 0]        # class 1: maroon
    assert pal[15 * 3:15 * 3 + 3] == [192, 128, 128]  # class 15 (person)


def test_all_background_round_trip(tmp_path):
    s = LabelMap(s=np.zeros((5, 5), np.int32))
    emit_voc_mask(s, tmp_path / "m.png")
    assert np.array_equal(decode_voc_mask(tmp_path / "m.png").s, s.s)


def test_checkerboard_round_trip(tmp_path):
    yy, xx = np.mgrid[0:6, 0:6]
    s = LabelMap(s=((yy + xx) % 2).astype(np.int32))
    emit_voc_mask(s, tmp_path / "m.png")
    assert np.array_equal(decode_voc_mask(tmp_path / "m.png").s, s.s)


def test_21_class_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    s = LabelMap(s=rng.integers(0, 21, (32, 32)).astype(np.int32))
    emit_voc_mask(s, tmp_path / "m.png")
    assert np.array_equal(decode_voc_mask(tmp_path / "m.png").s, s.s)


def test_out_of_palette_rejected(tmp_path):
    s = LabelMap(s=np.full((2, 2), 300, np.int32))
    with pytest.raises(ConfigError):
        emit_voc_mask(s, tmp_path / "m.png")


def test_binary_png_values(tmp_path):
    from PIL import Image
    m = np.array([[0, 1], [1, 0]], np.uint8)
    emit_binary_png(m, tmp_path / "r.png")
    back = np.asarray(Image.open(tmp_path / "r.png"))
    assert set(np.unique(back)) == {0, 255}
    assert np.array_equal(back == 255, m.astype(bool))
