import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image
from scipy import ndimage

from signgan.core import PoseSkeleton, denormalize
from signgan.errors import FormatError, NoPersonDetected, SpecError, ValidationError
from signgan.ingestion import (
    BODY_LIMB_COLORS, BODY_LIMBS, KEYPOINT_PATTERN, LABEL_FACE, LABEL_HAND, L_WRIST, NOSE, R_WRIST,
    SyntheticSignerSpec, build_sample_pairs, generate_synthetic_dataset, load_msasl_manifest,
    parse_openpose_json, rasterize_pose, write_synthetic_corpus,
)

FIXTURES = Path(__file__).parent / "fixtures"
CANVAS = (128, 128)


# -- OpenPose ------------------------------------------------------------------

def test_one_person_no_hands():
    s = parse_openpose_json((FIXTURES / "openpose_one_person.json").read_bytes(), CANVAS)
    assert np.all(s.body[:, 2] == 1.0)
    assert np.count_nonzero(s.left_hand[:, 2]) + np.count_nonzero(s.right_hand[:, 2]) == 0


def test_empty_people():
    with pytest.raises(NoPersonDetected):
        parse_openpose_json((FIXTURES / "openpose_empty.json").read_bytes(), CANVAS)


def test_most_confident_person_selected():
    doc = json.loads((FIXTURES / "openpose_two_people.json").read_text())
    # fixture sums: 25 * 0.5 = 12.5 and 25 * 0.8 = 20.0
    s = parse_openpose_json(json.dumps(doc), CANVAS)
    expected = np.asarray(doc["people"][1]["pose_keypoints_2d"]).reshape(25, 3)
    assert np.allclose(s.body, expected)


@pytest.mark.parametrize("doc", [
    b"not json",
    b"[]",
    b'{"people": {}}',
    b'{"people": [1]}',
    b'{"people": [{}]}',
    b'{"people": [{"pose_keypoints_2d": [1, 2]}]}',
    b'{"people": [{"pose_keypoints_2d": ' + json.dumps(["a"] * 75).encode() + b"}]}",
    b'{"people": [{"pose_keypoints_2d": ' + json.dumps([0] * 75).encode() + b', "hand_left_keypoints_2d": [0, 0]}]}',
])
def test_malformed_documents_raise_format_error(doc):
    with pytest.raises(FormatError):
        parse_openpose_json(doc, CANVAS)


@settings(max_examples=200, deadline=None)
@given(st.recursive(
    st.none() | st.booleans() | st.floats(allow_nan=False) | st.integers() | st.text(max_size=4),
    lambda children: st.lists(children, max_size=4) | st.dictionaries(
        st.sampled_from(["people", "pose_keypoints_2d", "hand_left_keypoints_2d", "x"]), children, max_size=3),
    max_leaves=12,
))
def test_parser_total_over_arbitrary_json(value):
    try:
        parse_openpose_json(json.dumps(value), CANVAS)
    except (FormatError, NoPersonDetected):
        pass


def test_coordinates_clamped_to_canvas():
    s = parse_openpose_json((FIXTURES / "openpose_signer.json").read_bytes(), CANVAS)
    for arr in (s.body, s.left_hand, s.right_hand):
        present = arr[arr[:, 2] > 0]
        assert np.all((present[:, 0] >= 0) & (present[:, 0] < 128))
        assert np.all((present[:, 1] >= 0) & (present[:, 1] < 128))


def test_openpose_golden():
    s = parse_openpose_json((FIXTURES / "openpose_signer.json").read_bytes(), CANVAS)
    golden = json.loads((FIXTURES / "openpose_signer.golden.json").read_text())
    assert s.body.tolist() == golden["body"]
    assert s.left_hand.tolist() == golden["left_hand"]
    assert s.right_hand.tolist() == golden["right_hand"]


# -- rasterization -------------------------------------------------------------

def test_render_golden():
    s = parse_openpose_json((FIXTURES / "openpose_signer.json").read_bytes(), CANVAS)
    golden = np.asarray(Image.open(FIXTURES / "openpose_signer.render64.png"))
    assert np.array_equal(denormalize(rasterize_pose(s, 64).pixels), golden)


def test_all_missing_renders_background():
    r = rasterize_pose(PoseSkeleton.empty((64, 64)), 64)
    assert r.pixels.shape == (64, 64, 3)
    assert np.all(r.pixels == -1.0)


def _bresenham_oracle(x0, y0, x1, y1):
    """Pixels hit by the segment: for each step of the major axis, the rounded minor coordinate."""
    n = max(abs(x1 - x0), abs(y1 - y0))
    return {(x0 + round((x1 - x0) * k / n), y0 + round((y1 - y0) * k / n)) for k in range(n + 1)}


def test_single_vertical_limb_exact_pixels():
    body = np.zeros((25, 3))
    body[1] = (0, 0, 1)   # neck
    body[0] = (0, 10, 1)  # nose; limb (1, 0)
    s = PoseSkeleton(body, np.zeros((21, 3)), np.zeros((21, 3)), (64, 64))
    px = denormalize(rasterize_pose(s, 64).pixels)
    color = BODY_LIMB_COLORS[BODY_LIMBS.index((1, 0))]
    hits = {(x, y) for y, x in zip(*np.nonzero(np.all(px == color, axis=2)))}
    assert hits == _bresenham_oracle(0, 0, 0, 10)
    assert len(hits) == 11


@pytest.mark.parametrize("end", [(13, 5), (3, 17), (20, 20), (9, 1)])
def test_diagonal_limb_matches_oracle(end):
    body = np.zeros((25, 3))
    body[1] = (2, 2, 1)
    body[0] = (*end, 1)
    s = PoseSkeleton(body, np.zeros((21, 3)), np.zeros((21, 3)), (64, 64))
    px = denormalize(rasterize_pose(s, 64).pixels)
    color = BODY_LIMB_COLORS[BODY_LIMBS.index((1, 0))]
    hits = {(x, y) for y, x in zip(*np.nonzero(np.all(px == color, axis=2)))}
    oracle = _bresenham_oracle(2, 2, *end)
    # rounding ties may differ by one pixel position, never the pixel count
    assert len(hits) == len(oracle)
    assert len(hits ^ oracle) <= 2


def test_render_deterministic():
    s = parse_openpose_json((FIXTURES / "openpose_signer.json").read_bytes(), CANVAS)
    assert np.array_equal(rasterize_pose(s, 64).pixels, rasterize_pose(s, 64).pixels)


def test_render_background_outside_geometry():
    body = np.zeros((25, 3))
    body[2] = (10, 10, 1)
    body[3] = (30, 10, 1)
    s = PoseSkeleton(body, np.zeros((21, 3)), np.zeros((21, 3)), (64, 64))
    px = rasterize_pose(s, 64).pixels
    drawn = np.any(px != -1.0, axis=2)
    ys, xs = np.nonzero(drawn)
    assert ys.min() >= 9 and ys.max() <= 11 and xs.min() >= 9 and xs.max() <= 31


# -- manifests -----------------------------------------------------------------

def _entry(i, start=0, end=5, **extra):
    e = {"clean_text": "hello", "label": 1, "signer_id": i, "file": f"vid{i}", "url": "",
         "start": start, "end": end, "box": [0.0, 0.0, 1.0, 1.0]}
    e.update(extra)
    return e


def test_manifest_empty(tmp_path):
    (tmp_path / "m.json").write_text("[]")
    assert load_msasl_manifest(tmp_path / "m.json") == []


def test_manifest_flags_missing_dirs(tmp_path):
    for i in (0, 2):
        (tmp_path / "clips" / f"vid{i}_0_5" / "frames").mkdir(parents=True)
    (tmp_path / "m.json").write_text(json.dumps([_entry(0), _entry(1), _entry(2)]))
    records = load_msasl_manifest(tmp_path / "m.json")
    assert len(records) == 3
    assert [r.unavailable for r in records] == [False, True, False]


def test_manifest_rejects_bad_interval(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps([_entry(0), _entry(1, start=9, end=9)]))
    with pytest.raises(ValidationError, match="entry 1"):
        load_msasl_manifest(tmp_path / "m.json")


def test_manifest_rejects_bad_box(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps([_entry(0, box=[0.1, 0.1, 1.4, 0.9])]))
    with pytest.raises(ValidationError, match="entry 0"):
        load_msasl_manifest(tmp_path / "m.json")


@pytest.mark.parametrize("text", ["{not json", '{"a": 1}', '[{"start": 1}]'])
def test_manifest_format_errors(tmp_path, text):
    (tmp_path / "m.json").write_text(text)
    with pytest.raises(FormatError):
        load_msasl_manifest(tmp_path / "m.json")


# -- sample pairs --------------------------------------------------------------

@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    write_synthetic_corpus(root, 1, 5, seed=3)
    return root


def test_pair_counts(corpus):
    clip = load_msasl_manifest(corpus / "manifest.json")[0]
    samples, skipped = build_sample_pairs(clip, stride=1)
    assert len(samples) == 4 and not skipped
    samples, skipped = build_sample_pairs(clip, stride=5)
    assert samples == [] and skipped == []


def test_pair_contents(corpus):
    clip = load_msasl_manifest(corpus / "manifest.json")[0]
    samples, _ = build_sample_pairs(clip, stride=2)
    first = samples[0]
    assert first.frame_id.endswith("000000->000002")
    target = np.asarray(Image.open(clip.frame_dir / "frame_000002.png"))
    assert np.array_equal(first.target_frame.pixels, target)
    doc = json.loads((clip.keypoint_dir / KEYPOINT_PATTERN.format(2)).read_text())
    assert np.allclose(first.target_pose.body.ravel(), doc["people"][0]["pose_keypoints_2d"])


def test_missing_keypoints_skip_only_that_pair(corpus, tmp_path):
    import shutil
    root = tmp_path / "c"
    shutil.copytree(corpus, root)
    clip = load_msasl_manifest(root / "manifest.json")[0]
    (clip.keypoint_dir / KEYPOINT_PATTERN.format(3)).unlink()
    samples, skipped = build_sample_pairs(clip, stride=2)
    assert [s.frame_id[-14:] for s in samples] == ["000000->000002", "000002->000004"]
    assert [(d.input_index, d.target_index) for d in skipped] == [(1, 3)]


def test_parser_callable_used_for_initial_parsing(corpus):
    from signgan.core import ParsingMap
    clip = load_msasl_manifest(corpus / "manifest.json")[0]
    calls = []

    def labeler(frame):
        calls.append(frame)
        return ParsingMap(np.zeros((64, 64), dtype=int))

    samples, _ = build_sample_pairs(clip, 1, parser=labeler)
    assert len(calls) == 4
    assert all(s.initial_parsing.labels.max() == 0 for s in samples)
    assert any(s.target_parsing.labels.max() > 0 for s in samples)  # exact labels preferred


def test_box_crop_and_rescale(tmp_path):
    """A 128px frame cropped to its lower-right quadrant yields 64px samples."""
    clip_dir = tmp_path / "clips" / "big_0_2"
    (clip_dir / "frames").mkdir(parents=True)
    (clip_dir / "keypoints").mkdir()
    img = np.zeros((128, 128, 3), dtype=np.uint8)
    img[64:, 64:] = 200
    body = np.zeros((25, 3))
    body[1] = (100, 100, 1)
    body[0] = (10, 10, 1)  # outside the crop, dropped
    for t in range(2):
        Image.fromarray(img).save(clip_dir / "frames" / f"frame_{t:06d}.png")
        (clip_dir / "keypoints" / KEYPOINT_PATTERN.format(t)).write_text(json.dumps(
            PoseSkeleton(body, np.zeros((21, 3)), np.zeros((21, 3)), (128, 128)).to_openpose()))
    (tmp_path / "m.json").write_text(json.dumps([_entry(0, 0, 2, file="big", box=[0.5, 0.5, 1.0, 1.0])]))
    clip = load_msasl_manifest(tmp_path / "m.json")[0]
    from signgan.core import ParsingMap
    samples, skipped = build_sample_pairs(clip, 1, parser=lambda f: ParsingMap(np.zeros((64, 64), dtype=int)))
    assert not skipped and len(samples) == 1
    s = samples[0]
    assert s.input_frame.height == 64 and np.all(s.input_frame.pixels == 200)
    assert s.target_pose.canvas == (64, 64)
    assert np.allclose(s.target_pose.body[1], (36, 36, 1))
    assert s.target_pose.body[0, 2] == 0


# -- synthetic signer ----------------------------------------------------------

def test_synthetic_identity_trajectory():
    spec = SyntheticSignerSpec(trajectory=np.array([[0.3, 0.5, 0.4, 0.6]]))
    clip = generate_synthetic_dataset(spec, 2)
    assert np.array_equal(clip.frames[0].pixels, clip.frames[1].pixels)
    assert np.array_equal(clip.parsings[0].labels, clip.parsings[1].labels)
    assert np.array_equal(clip.skeletons[0].body, clip.skeletons[1].body)


def test_synthetic_deterministic():
    a = generate_synthetic_dataset(SyntheticSignerSpec.random(5), 6)
    b = generate_synthetic_dataset(SyntheticSignerSpec.random(5), 6)
    for fa, fb in zip(a.frames, b.frames):
        assert np.array_equal(fa.pixels, fb.pixels)
    for pa, pb in zip(a.parsings, b.parsings):
        assert np.array_equal(pa.labels, pb.labels)


def test_synthetic_spec_errors():
    with pytest.raises(SpecError):
        generate_synthetic_dataset(SyntheticSignerSpec(), 1)
    with pytest.raises(SpecError):
        generate_synthetic_dataset(SyntheticSignerSpec(forearm=0.0), 4)
    with pytest.raises(SpecError):
        generate_synthetic_dataset(SyntheticSignerSpec(upper_arm=40.0, forearm=40.0), 4)


def _centroid_xy(mask):
    cy, cx = ndimage.center_of_mass(mask)
    return np.array([cx, cy])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_synthetic_centroid_oracle(seed):
    """Joints re-extracted from label-map region centroids match emitted keypoints."""
    clip = generate_synthetic_dataset(SyntheticSignerSpec.random(seed), 8)
    for skeleton, parsing in zip(clip.skeletons, clip.parsings):
        labels = parsing.labels
        assert np.linalg.norm(_centroid_xy(labels == LABEL_FACE) - skeleton.body[NOSE, :2]) <= 2.0
        components, n = ndimage.label(labels == LABEL_HAND)
        assert n == 2
        centroids = [_centroid_xy(components == k) for k in (1, 2)]
        for joint in (L_WRIST, R_WRIST):
            assert min(np.linalg.norm(c - skeleton.body[joint, :2]) for c in centroids) <= 2.0


def test_synthetic_skeleton_confidence_one():
    clip = generate_synthetic_dataset(SyntheticSignerSpec.random(1), 3)
    s = clip.skeletons[0]
    assert np.all(s.left_hand[:, 2] == 1) and np.all(s.right_hand[:, 2] == 1)
    assert set(np.unique(s.body[:, 2])) == {0.0, 1.0}


def test_corpus_layout(tmp_path):
    write_synthetic_corpus(tmp_path, 2, 3, seed=1)
    records = load_msasl_manifest(tmp_path / "manifest.json")
    assert len(records) == 2 and not any(r.unavailable for r in records)
    for r in records:
        assert len(list(r.frame_dir.glob("frame_*.png"))) == 3
        assert len(list(r.keypoint_dir.glob("*_keypoints.json"))) == 3
        assert len(list(r.parsing_dir.glob("frame_*.png"))) == 3
