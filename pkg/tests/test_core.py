import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from signgan.core import (
    PALETTE, Frame, ModelConfig, ParsingMap, PoseSkeleton, Sample, argmax_decode, denormalize,
    normalize, onehot_encode, palette_colorize, palette_lookup, read_frame, read_parsing, write_frame,
    write_parsing,
)
from signgan.errors import ConfigError, InvalidLabel, RangeError, ShapeError


def test_onehot_all_background():
    out = onehot_encode(ParsingMap(np.zeros((4, 4), dtype=int)))
    assert out.shape == (20, 4, 4)
    assert np.all(out[0] == 1)
    assert np.all(out[1:] == 0)


def test_onehot_single_label():
    labels = np.zeros((4, 4), dtype=int)
    labels[0, 0] = 5
    out = onehot_encode(ParsingMap(labels))
    assert out[5, 0, 0] == 1
    assert all(out[c, 0, 0] == 0 for c in range(20) if c != 5)


def test_onehot_roundtrip_bruteforce():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 20, size=(8, 8))
    out = onehot_encode(ParsingMap(labels))
    for y in range(8):
        for x in range(8):
            assert int(np.argmax(out[:, y, x])) == labels[y, x]
            assert out[:, y, x].sum() == 1


def test_invalid_label_rejected():
    with pytest.raises(InvalidLabel):
        ParsingMap(np.full((4, 4), 20))
    with pytest.raises(InvalidLabel):
        onehot_encode(np.full((2, 2), 25))


@given(hnp.arrays(np.int64, (6, 7), elements=st.integers(0, 19)))
def test_onehot_argmax_identity(labels):
    assert np.array_equal(argmax_decode(onehot_encode(ParsingMap(labels))).labels, labels)


def test_palette_table_matches_committed_json():
    raw = json.loads((Path(__file__).parents[1] / "src" / "signgan" / "palette.json").read_text())
    assert len(raw) == 20
    assert raw["0"] == [0, 0, 0]
    assert len({tuple(v) for v in raw.values()}) == 20
    for k, v in raw.items():
        assert PALETTE[int(k)].tolist() == v


def test_palette_background():
    rgb = palette_colorize(ParsingMap(np.zeros((4, 4), dtype=int)))
    assert np.all(rgb == PALETTE[0])


def test_palette_inverse():
    labels = np.random.default_rng(1).integers(0, 20, size=(16, 16))
    assert np.array_equal(palette_lookup(palette_colorize(ParsingMap(labels))).labels, labels)


def test_palette_pointwise():
    a = np.zeros((8, 8), dtype=int)
    b = a.copy()
    b[3, 4] = 7
    diff = np.any(palette_colorize(ParsingMap(a)) != palette_colorize(ParsingMap(b)), axis=2)
    assert diff.sum() == 1 and diff[3, 4]


def test_palette_lookup_unknown_color():
    with pytest.raises(InvalidLabel):
        palette_lookup(np.full((2, 2, 3), 7, dtype=np.uint8))


def test_normalize_endpoints():
    assert normalize(np.array([0]))[0] == -1.0
    assert normalize(np.array([255]))[0] == 1.0
    assert normalize(np.array([128]))[0] == pytest.approx(128 / 127.5 - 1, abs=1e-7)


def test_normalize_roundtrip_exhaustive():
    values = np.arange(256, dtype=np.uint8)
    back = denormalize(normalize(values))
    assert np.max(np.abs(back.astype(int) - values.astype(int))) <= 1
    rng = np.random.default_rng(2)
    frame = Frame(rng.integers(0, 256, size=(64, 64, 3)))
    restored = denormalize(normalize(frame))
    assert np.max(np.abs(restored.pixels.astype(int) - frame.pixels.astype(int))) <= 1


def test_normalize_range_errors():
    with pytest.raises(RangeError):
        normalize(np.array([256]))
    with pytest.raises(RangeError):
        denormalize(np.array([1.5]))


def test_frame_invariants():
    with pytest.raises(ShapeError):
        Frame(np.zeros((32, 32, 3)))
    with pytest.raises(ShapeError):
        Frame(np.zeros((64, 128, 3)))
    with pytest.raises(RangeError):
        Frame(np.full((64, 64, 3), 2.0), normalized=True)
    f = Frame(np.zeros((64, 64, 3)))
    with pytest.raises(ValueError):
        f.pixels[0, 0, 0] = 1


def test_skeleton_clamping():
    body = np.zeros((25, 3))
    body[0] = (-5, 70, 1)
    body[1] = (500, 500, 0)
    s = PoseSkeleton(body, np.zeros((21, 3)), np.zeros((21, 3)), (64, 64)).clamped()
    assert s.body[0, 0] == 0 and s.body[0, 1] < 64
    assert s.body[1, 0] == 500  # missing joints untouched


def test_sample_size_mismatch():
    f = Frame(np.zeros((64, 64, 3)))
    with pytest.raises(ShapeError):
        Sample(f, ParsingMap(np.zeros((32, 32), dtype=int)), PoseSkeleton.empty((64, 64)))


def test_model_config_defaults_and_errors():
    cfg = ModelConfig()
    assert cfg.depth == 4
    assert ModelConfig(image_size=256).depth == 6
    with pytest.raises(ConfigError) as exc:
        ModelConfig(image_size=48)
    assert exc.value.field == "model.image_size"
    with pytest.raises(ConfigError):
        ModelConfig(depth=2)


def test_png_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    f = Frame(rng.integers(0, 256, size=(64, 64, 3)))
    write_frame(f, tmp_path / "f.png")
    assert np.array_equal(read_frame(tmp_path / "f.png").pixels, f.pixels)
    p = ParsingMap(rng.integers(0, 20, size=(64, 64)))
    write_parsing(p, tmp_path / "p.png")
    assert np.array_equal(read_parsing(tmp_path / "p.png").labels, p.labels)
