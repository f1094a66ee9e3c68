"""External artifacts to Samples: OpenPose JSON, MS-ASL manifests, local
frame directories, and a procedural stick-figure signer for desk-scale runs.

On-disk clip layout (shared by real and synthetic data)::

    <root>/manifest.json                         MS-ASL style JSON array
    <root>/clips/<clip>/frames/frame_%06d.png
    <root>/clips/<clip>/keypoints/frame_%06d_keypoints.json
    <root>/clips/<clip>/parsing/frame_%06d.png   optional exact labels
"""
from __future__ import annotations

import colorsys
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from .core import (
    NUM_BODY, NUM_CLASSES, NUM_HAND, Frame, ParsingMap, PoseRender, PoseSkeleton, Sample,
    check_frame_size, write_frame, write_parsing,
)
from .errors import FormatError, NoPersonDetected, SpecError, ValidationError

log = logging.getLogger(__name__)

FRAME_PATTERN = "frame_{:06d}.png"
KEYPOINT_PATTERN = "frame_{:06d}_keypoints.json"

# OpenPose BODY_25 render pairs.
BODY_LIMBS = (
    (1, 8), (1, 2), (1, 5), (2, 3), (3, 4), (5, 6), (6, 7), (8, 9), (9, 10),
    (10, 11), (8, 12), (12, 13), (13, 14), (1, 0), (0, 15), (15, 17), (0, 16),
    (16, 18), (14, 19), (19, 20), (14, 21), (11, 22), (22, 23), (11, 24),
)
# Five finger chains rooted at the wrist (hand keypoint 0).
HAND_LIMBS = tuple(
    (0 if k == 0 else 4 * f + k, 4 * f + k + 1) for f in range(5) for k in range(4)
)


def _rgb(h: float, s: float, v: float) -> Tuple[int, int, int]:
    return tuple(int(round(c * 255)) for c in colorsys.hsv_to_rgb(h % 1.0, s, v))


BODY_LIMB_COLORS = tuple(_rgb(i / len(BODY_LIMBS), 1.0, 1.0) for i in range(len(BODY_LIMBS)))
LEFT_HAND_COLORS = tuple(_rgb(f / 5, 0.55, 1.0) for f in range(5) for _ in range(4))
RIGHT_HAND_COLORS = tuple(_rgb(f / 5 + 0.1, 0.55, 0.75) for f in range(5) for _ in range(4))
JOINT_COLOR = (255, 255, 255)


# -- OpenPose ----------------------------------------------------------------

def _keypoint_array(person: dict, key: str, n: int, required: bool) -> np.ndarray:
    raw = person.get(key)
    if raw is None or (not required and len(raw) == 0):
        if required:
            raise FormatError(f"person lacks {key!r}")
        return np.zeros((n, 3))
    if not isinstance(raw, list) or len(raw) != 3 * n:
        length = len(raw) if isinstance(raw, list) else type(raw).__name__
        raise FormatError(f"{key} must hold {3 * n} numbers, got {length}")
    try:
        arr = np.asarray(raw, dtype=np.float64).reshape(n, 3)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{key} contains non-numeric entries") from exc
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{key} contains non-finite entries")
    arr[:, 2] = np.clip(arr[:, 2], 0.0, 1.0)
    return arr


def parse_openpose_json(doc: Union[bytes, str, dict], canvas: Tuple[int, int]) -> PoseSkeleton:
    """Skeleton of the most confident person in an OpenPose keypoint document.

    ``canvas`` is the ``(height, width)`` of the frame OpenPose ran on. The
    person with the largest sum of body-keypoint confidences wins.
    """
    if isinstance(doc, dict):
        data = doc
    else:
        try:
            data = json.loads(doc)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise FormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("people"), list):
        raise FormatError("document must be an object with a 'people' array")
    people = data["people"]
    if not people:
        raise NoPersonDetected("OpenPose document has no people")
    best, best_score = None, -math.inf
    for person in people:
        if not isinstance(person, dict):
            raise FormatError("each entry of 'people' must be an object")
        body = _keypoint_array(person, "pose_keypoints_2d", NUM_BODY, required=True)
        left = _keypoint_array(person, "hand_left_keypoints_2d", NUM_HAND, required=False)
        right = _keypoint_array(person, "hand_right_keypoints_2d", NUM_HAND, required=False)
        score = body[:, 2].sum()
        if score > best_score:
            best, best_score = (body, left, right), score
    return PoseSkeleton(*best, canvas=canvas).clamped()


def read_openpose_file(path: Union[str, Path], canvas: Tuple[int, int]) -> PoseSkeleton:
    path = Path(path)
    try:
        return parse_openpose_json(path.read_bytes(), canvas)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_openpose_file(skeleton: PoseSkeleton, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(skeleton.to_openpose()))


# -- pose rasterization ------------------------------------------------------

def bresenham(x0: int, y0: int, x1: int, y1: int) -> List[Tuple[int, int]]:
    """Integer pixels of the segment between two points, endpoints included."""
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx, sy = (1 if x0 < x1 else -1), (1 if y0 < y1 else -1)
    err = dx + dy
    while True:
        points.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return points
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _scaled(pt: np.ndarray, canvas: Tuple[int, int], size: int) -> Tuple[int, int]:
    h, w = canvas
    x = min(max(int(math.floor(pt[0] * size / w + 0.5)), 0), size - 1)
    y = min(max(int(math.floor(pt[1] * size / h + 0.5)), 0), size - 1)
    return x, y


def rasterize_pose(s: PoseSkeleton, size: int) -> PoseRender:
    """Draw joints (radius-1 discs) then limbs (1-px lines) onto a blank canvas.

    Limbs are drawn over joints so every limb pixel carries its limb color.
    Output is normalized; the background is exactly -1.
    """
    check_frame_size(size, size)
    canvas = np.zeros((size, size, 3), dtype=np.uint8)
    groups = (
        (s.body, BODY_LIMBS, BODY_LIMB_COLORS),
        (s.left_hand, HAND_LIMBS, LEFT_HAND_COLORS),
        (s.right_hand, HAND_LIMBS, RIGHT_HAND_COLORS),
    )
    for kps, _, _ in groups:
        for kp in kps:
            if kp[2] <= 0:
                continue
            x, y = _scaled(kp, s.canvas, size)
            for dx, dy in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)):
                if 0 <= x + dx < size and 0 <= y + dy < size:
                    canvas[y + dy, x + dx] = JOINT_COLOR
    for kps, limbs, colors in groups:
        for (a, b), color in zip(limbs, colors):
            if kps[a, 2] <= 0 or kps[b, 2] <= 0:
                continue
            for x, y in bresenham(*_scaled(kps[a], s.canvas, size), *_scaled(kps[b], s.canvas, size)):
                canvas[y, x] = color
    pixels = canvas.astype(np.float32) / np.float32(127.5) - np.float32(1.0)
    return PoseRender(pixels)


# -- MS-ASL manifests ---------------------------------------------------------

@dataclass
class ClipRecord:
    gloss_label: str
    signer_id: int
    frame_dir: Path
    keypoint_dir: Path
    start_frame: int
    end_frame: int
    box: Tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)  # y0, x0, y1, x1
    parsing_dir: Optional[Path] = None
    index: int = 0
    unavailable: bool = False

    @property
    def clip_id(self) -> str:
        return self.frame_dir.parent.name


def _manifest_paths(entry: dict, root: Path) -> Tuple[Path, Path, Optional[Path]]:
    if "frame_dir" in entry:
        frame_dir = root / entry["frame_dir"]
        keypoint_dir = root / entry.get("keypoint_dir", Path(entry["frame_dir"]).parent / "keypoints")
    else:
        clip = root / "clips" / f"{Path(str(entry.get('file', 'clip'))).stem}_{entry['start']}_{entry['end']}"
        frame_dir, keypoint_dir = clip / "frames", clip / "keypoints"
    parsing = entry.get("parsing_dir")
    return frame_dir, keypoint_dir, (root / parsing) if parsing else None


def load_msasl_manifest(path: Union[str, Path], frames_root: Union[str, Path, None] = None) -> List[ClipRecord]:
    """Read an MS-ASL style JSON array into ClipRecords.

    Entries may carry explicit ``frame_dir``/``keypoint_dir``/``parsing_dir``
    paths relative to ``frames_root`` (default: the manifest's directory);
    otherwise the clip lives at ``clips/<file stem>_<start>_<end>``. Records
    whose frame directory is absent are returned with ``unavailable=True``.
    """
    path = Path(path)
    root = Path(frames_root) if frames_root is not None else path.parent
    try:
        entries = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: cannot read manifest: {exc}") from exc
    if not isinstance(entries, list):
        raise FormatError(f"{path}: manifest must be a JSON array")

    records, problems = [], []
    for i, entry in enumerate(entries):
        try:
            start, end = int(entry["start"]), int(entry["end"])
            box = tuple(float(v) for v in entry.get("box", (0.0, 0.0, 1.0, 1.0)))
            gloss = str(entry.get("clean_text", entry.get("text", entry.get("label", ""))))
            signer = int(entry.get("signer_id", entry.get("signer", -1)))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f"{path}: entry {i} is ill-formed: {exc!r}") from exc
        if start >= end:
            problems.append(f"entry {i}: start {start} >= end {end}")
            continue
        if len(box) != 4 or not all(0.0 <= v <= 1.0 for v in box) or box[0] >= box[2] or box[1] >= box[3]:
            problems.append(f"entry {i}: box {box} outside [0, 1]^2")
            continue
        frame_dir, keypoint_dir, parsing_dir = _manifest_paths(entry, root)
        records.append(ClipRecord(
            gloss_label=gloss, signer_id=signer, frame_dir=frame_dir, keypoint_dir=keypoint_dir,
            start_frame=start, end_frame=end, box=box, parsing_dir=parsing_dir, index=i,
            unavailable=not frame_dir.is_dir(),
        ))
    if problems:
        raise ValidationError("invalid manifest entries: " + "; ".join(problems))
    return records


# -- sample construction -----------------------------------------------------

@dataclass
class SkippedSample:
    clip_id: str
    input_index: int
    target_index: int
    reason: str


def _is_full_box(box: Sequence[float]) -> bool:
    return tuple(box) == (0.0, 0.0, 1.0, 1.0)


def _crop_box(shape: Tuple[int, int], box: Sequence[float]) -> Tuple[int, int, int, int]:
    h, w = shape
    y0, x0, y1, x1 = box
    return int(round(x0 * w)), int(round(y0 * h)), int(round(x1 * w)), int(round(y1 * h))


def _load_raster(path: Path, box, size: Optional[int], resample) -> np.ndarray:
    with Image.open(path) as im:
        if not _is_full_box(box):
            im = im.crop(_crop_box((im.height, im.width), box))
        if size is not None and (im.width, im.height) != (size, size):
            im = im.resize((size, size), resample)
        return np.asarray(im)


def transform_pose(s: PoseSkeleton, box, size: int) -> PoseSkeleton:
    if _is_full_box(box) and s.canvas == (size, size):
        return s
    x0, y0, x1, y1 = _crop_box(s.canvas, box)
    parts = []
    for arr in (s.body, s.left_hand, s.right_hand):
        arr = arr.copy()
        inside = (arr[:, 0] >= x0) & (arr[:, 0] < x1) & (arr[:, 1] >= y0) & (arr[:, 1] < y1)
        arr[~inside, 2] = 0.0  # joints outside the crop are dropped, not clamped
        arr[:, 0] = (arr[:, 0] - x0) * size / (x1 - x0)
        arr[:, 1] = (arr[:, 1] - y0) * size / (y1 - y0)
        parts.append(arr)
    return PoseSkeleton(*parts, canvas=(size, size)).clamped()


def load_clip_frame(clip: ClipRecord, t: int, size: Optional[int] = None) -> Frame:
    px = _load_raster(clip.frame_dir / FRAME_PATTERN.format(t), clip.box, size, Image.BILINEAR)
    return Frame(px[..., :3] if px.ndim == 3 else np.repeat(px[..., None], 3, axis=2))


def load_clip_parsing(clip: ClipRecord, t: int, size: Optional[int] = None) -> Optional[ParsingMap]:
    if clip.parsing_dir is None:
        return None
    path = clip.parsing_dir / FRAME_PATTERN.format(t)
    if not path.is_file():
        return None
    return ParsingMap(_load_raster(path, clip.box, size, Image.NEAREST))


def load_clip_pose(clip: ClipRecord, t: int, canvas: Tuple[int, int], size: int) -> PoseSkeleton:
    skeleton = read_openpose_file(clip.keypoint_dir / KEYPOINT_PATTERN.format(t), canvas)
    return transform_pose(skeleton, clip.box, size)


def _source_canvas(clip: ClipRecord, t: int) -> Tuple[int, int]:
    with Image.open(clip.frame_dir / FRAME_PATTERN.format(t)) as im:
        return im.height, im.width


Labeler = Callable[[Frame], ParsingMap]


def _as_labeler(parser) -> Optional[Labeler]:
    if parser is None or not hasattr(parser, "parameters"):
        return parser
    from .models import parse_frame
    return lambda frame: parse_frame(parser, frame)


def build_sample_pairs(clip: ClipRecord, stride: int = 1, parser=None,
                       image_size: Optional[int] = None) -> Tuple[List[Sample], List[SkippedSample]]:
    """Pair frame ``t`` with frame ``t + stride`` across a clip.

    Initial parsings come from ``parser`` (a SemanticParserNet or any
    ``Frame -> ParsingMap`` callable) when given, else from the clip's exact
    labels. Target parsings prefer exact labels and fall back to ``parser``.
    Pairs whose files are missing or unreadable are reported, not raised.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    labeler = _as_labeler(parser)
    samples, skipped = [], []
    cache = {}

    def frame_at(t):
        if t not in cache:
            cache[t] = load_clip_frame(clip, t, image_size)
        return cache[t]

    for t in range(clip.start_frame, clip.end_frame - stride):
        target_t = t + stride
        try:
            input_frame = frame_at(t)
            target_frame = frame_at(target_t)
            size = input_frame.height
            pose = load_clip_pose(clip, target_t, _source_canvas(clip, target_t), size)
            initial = labeler(input_frame) if labeler else load_clip_parsing(clip, t, image_size)
            target_parsing = load_clip_parsing(clip, target_t, image_size)
            if target_parsing is None and labeler is not None:
                target_parsing = labeler(target_frame)
            if initial is None:
                raise FileNotFoundError("no parser given and no exact parsing on disk")
        except (OSError, FormatError, NoPersonDetected, ValueError) as exc:
            diag = SkippedSample(clip.clip_id, t, target_t, f"{type(exc).__name__}: {exc}")
            log.warning("skipping sample %s:%d->%d (%s)", clip.clip_id, t, target_t, diag.reason)
            skipped.append(diag)
            continue
        samples.append(Sample(input_frame, initial, pose, target_parsing, target_frame,
                              frame_id=f"{clip.clip_id}:{t:06d}->{target_t:06d}"))
    return samples, skipped


def load_dataset(data_dir: Union[str, Path], stride: int = 1, parser=None,
                 image_size: Optional[int] = None) -> Tuple[List[Sample], List[SkippedSample]]:
    """All samples of every available clip listed in ``<data_dir>/manifest.json``."""
    samples, skipped = [], []
    for clip in load_msasl_manifest(Path(data_dir) / "manifest.json"):
        if clip.unavailable:
            log.warning("clip %d (%s) unavailable locally", clip.index, clip.frame_dir)
            continue
        got, missed = build_sample_pairs(clip, stride, parser, image_size)
        samples += got
        skipped += missed
    return samples, skipped


def load_labeled_frames(data_dir: Union[str, Path], image_size: Optional[int] = None):
    """Every (frame, exact parsing) pair available on disk, for parser training."""
    frames, labels = [], []
    for clip in load_msasl_manifest(Path(data_dir) / "manifest.json"):
        if clip.unavailable:
            continue
        for t in range(clip.start_frame, clip.end_frame):
            if not (clip.frame_dir / FRAME_PATTERN.format(t)).is_file():
                continue
            parsing = load_clip_parsing(clip, t, image_size)
            if parsing is not None:
                frames.append(load_clip_frame(clip, t, image_size))
                labels.append(parsing)
    return frames, labels


# -- synthetic signer --------------------------------------------------------

# Region labels drawn by the synthetic renderer (CIHP ids).
LABEL_SHIRT = 5
LABEL_FACE = 13
LABEL_LEFT_ARM = 14
LABEL_RIGHT_ARM = 15
LABEL_HAND = 3

# Body keypoints the renderer emits.
NOSE, NECK, R_SHOULDER, R_ELBOW, R_WRIST, L_SHOULDER, L_ELBOW, L_WRIST = range(8)
MID_HIP, R_HIP, L_HIP = 8, 9, 12
R_EYE, L_EYE, R_EAR, L_EAR = 15, 16, 17, 18

SHOULDER_RANGE = (math.radians(5), math.radians(60))
ELBOW_RANGE = (0.0, math.radians(140))


@dataclass
class SyntheticSignerSpec:
    """Appearance, proportions and motion of one procedural signer.

    ``trajectory`` rows are ``(left_shoulder, left_elbow, right_shoulder,
    right_elbow)`` in radians: shoulder angle from hanging straight down
    (positive = outward), elbow flexion (positive = forearm swings inward and
    up). When ``None`` a smooth trajectory is drawn from ``seed``. Lengths are
    in pixels at a 64-pixel canvas and scale with the render size.
    """

    skin: Tuple[int, int, int] = (224, 172, 140)
    shirt: Tuple[int, int, int] = (40, 70, 160)
    background: Tuple[int, int, int] = (200, 200, 190)
    upper_arm: float = 10.0
    forearm: float = 10.0
    head_radius: float = 7.0
    hand_radius: float = 3.0
    trajectory: Optional[np.ndarray] = None
    seed: int = 0

    @classmethod
    def random(cls, seed: int) -> "SyntheticSignerSpec":
        rng = np.random.default_rng(seed)
        skin = tuple(int(v) for v in rng.integers([150, 100, 70], [250, 200, 170]))
        shirt = tuple(int(v) for v in rng.integers(0, 256, size=3))
        background = tuple(int(v) for v in rng.integers(0, 256, size=3))
        return cls(skin=skin, shirt=shirt, background=background,
                   upper_arm=float(rng.uniform(9, 11)), forearm=float(rng.uniform(9, 11)), seed=seed)


@dataclass
class SyntheticClip:
    frames: List[Frame]
    skeletons: List[PoseSkeleton]
    parsings: List[ParsingMap]
    angles: np.ndarray = field(repr=False, default=None)


def _default_trajectory(n_frames: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames)[:, None]
    freq = rng.uniform(0.15, 0.45, size=(1, 4))
    phase = rng.uniform(0, 2 * np.pi, size=(1, 4))
    wave = 0.5 * (1 + np.sin(freq * t + phase))
    lo = np.array([SHOULDER_RANGE[0], ELBOW_RANGE[0]] * 2)
    hi = np.array([SHOULDER_RANGE[1], ELBOW_RANGE[1]] * 2)
    return lo + wave * (hi - lo)


class _Geometry:
    def __init__(self, spec: SyntheticSignerSpec, size: int):
        k = size / 64.0
        self.size = size
        self.k = k
        self.head = np.array([32.0, 13.0]) * k
        self.neck = np.array([32.0, 22.0]) * k
        self.shoulder = {"L": np.array([41.0, 24.0]) * k, "R": np.array([23.0, 24.0]) * k}
        self.torso = (23.0 * k, 21.0 * k, 41.0 * k, 60.0 * k)  # x0, y0, x1, y1
        self.hips = {"mid": np.array([32.0, 56.0]) * k, "R": np.array([27.0, 56.0]) * k,
                     "L": np.array([37.0, 56.0]) * k}
        self.upper = spec.upper_arm * k
        self.fore = spec.forearm * k
        self.head_r = spec.head_radius * k
        self.hand_r = spec.hand_radius * k
        self.upper_halfwidth = 2.5 * k
        self.fore_halfwidth = 2.0 * k

    def arm(self, side: str, shoulder_angle: float, elbow_angle: float):
        sign = 1.0 if side == "L" else -1.0
        s = self.shoulder[side]
        elbow = s + self.upper * np.array([sign * math.sin(shoulder_angle), math.cos(shoulder_angle)])
        phi = shoulder_angle - elbow_angle
        wrist = elbow + self.fore * np.array([sign * math.sin(phi), math.cos(phi)])
        return elbow, wrist, phi

    def hand_ok(self, wrist: np.ndarray, other: Optional[np.ndarray]) -> bool:
        r = self.hand_r
        lo, hi = 1.0 + r, self.size - 2.0 - r
        if not (lo <= wrist[0] <= hi and lo <= wrist[1] <= hi):
            return False
        if np.linalg.norm(wrist - self.head) < self.head_r + r + 2:
            return False
        return other is None or np.linalg.norm(wrist - other) >= 2 * r + 2

    def pose(self, angles: np.ndarray):
        """Project angles onto the valid set by unbending elbows, then shoulders."""
        a = np.array(angles, dtype=np.float64)
        step = math.radians(5)
        for side, (si, ei) in (("L", (0, 1)), ("R", (2, 3))):
            other = self.arm("L", a[0], a[1])[1] if side == "R" else None
            while not self.hand_ok(self.arm(side, a[si], a[ei])[1], other):
                if a[ei] > 0:
                    a[ei] = max(0.0, a[ei] - step)
                elif a[si] > 0:
                    a[si] = max(0.0, a[si] - step)
                else:
                    raise SpecError("arms do not fit the canvas even at rest; shorten the limbs")
        return a


def _segment_mask(xx, yy, p, q, halfwidth):
    d = q - p
    denom = float(d @ d) or 1.0
    t = np.clip(((xx - p[0]) * d[0] + (yy - p[1]) * d[1]) / denom, 0.0, 1.0)
    px, py = p[0] + t * d[0], p[1] + t * d[1]
    return (xx - px) ** 2 + (yy - py) ** 2 <= halfwidth ** 2


def _disc_mask(xx, yy, c, r):
    return (xx - c[0]) ** 2 + (yy - c[1]) ** 2 <= r ** 2


def _hand_keypoints(wrist: np.ndarray, direction: float, sign: float, radius: float) -> np.ndarray:
    kps = np.zeros((NUM_HAND, 3))
    kps[0] = (wrist[0], wrist[1], 1.0)
    for f in range(5):
        ang = direction + sign * (f - 2) * 0.35
        for k in range(4):
            rr = radius * (0.3 + 0.2 * k)
            kps[1 + 4 * f + k] = (wrist[0] + sign * rr * math.sin(ang), wrist[1] + rr * math.cos(ang), 1.0)
    return kps


def render_signer(spec: SyntheticSignerSpec, angles: np.ndarray, size: int = 64):
    """Render one pose; returns ``(pixels uint8, labels uint8, skeleton)``."""
    g = _Geometry(spec, size)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.0
    ramp = (yy[..., None] / size - 0.5) * 24.0
    img = np.clip(np.asarray(spec.background, dtype=np.float64)[None, None] + ramp, 0, 255)
    labels = np.zeros((size, size), dtype=np.uint8)
    skin = np.asarray(spec.skin, dtype=np.float64)
    hand_color = skin * 0.85
    shirt = np.asarray(spec.shirt, dtype=np.float64)

    def paint(mask, color, label):
        img[mask] = color
        labels[mask] = label

    x0, y0, x1, y1 = g.torso
    paint((xx >= x0) & (xx < x1) & (yy >= y0) & (yy < y1), shirt, LABEL_SHIRT)
    paint(_disc_mask(xx, yy, g.head, g.head_r), skin, LABEL_FACE)

    body = np.zeros((NUM_BODY, 3))
    body[NOSE] = (*g.head, 1)
    body[NECK] = (*g.neck, 1)
    body[MID_HIP] = (*g.hips["mid"], 1)
    body[R_HIP] = (*g.hips["R"], 1)
    body[L_HIP] = (*g.hips["L"], 1)
    e = g.head_r
    body[R_EYE] = (g.head[0] - 0.35 * e, g.head[1] - 0.2 * e, 1)
    body[L_EYE] = (g.head[0] + 0.35 * e, g.head[1] - 0.2 * e, 1)
    body[R_EAR] = (g.head[0] - 0.9 * e, g.head[1], 1)
    body[L_EAR] = (g.head[0] + 0.9 * e, g.head[1], 1)

    hands = {}
    joints = {"L": (L_SHOULDER, L_ELBOW, L_WRIST, LABEL_LEFT_ARM, 0),
              "R": (R_SHOULDER, R_ELBOW, R_WRIST, LABEL_RIGHT_ARM, 2)}
    for side, (ks, ke, kw, arm_label, col) in joints.items():
        elbow, wrist, phi = g.arm(side, angles[col], angles[col + 1])
        shoulder = g.shoulder[side]
        paint(_segment_mask(xx, yy, shoulder, elbow, g.upper_halfwidth), shirt, LABEL_SHIRT)
        paint(_segment_mask(xx, yy, elbow, wrist, g.fore_halfwidth), skin, arm_label)
        body[ks] = (*shoulder, 1)
        body[ke] = (*elbow, 1)
        body[kw] = (*wrist, 1)
        hands[side] = (wrist, phi)
    for side, (wrist, phi) in hands.items():
        paint(_disc_mask(xx, yy, wrist, g.hand_r), hand_color, LABEL_HAND)

    sign = {"L": 1.0, "R": -1.0}
    skeleton = PoseSkeleton(
        body,
        _hand_keypoints(hands["L"][0], hands["L"][1], sign["L"], g.hand_r),
        _hand_keypoints(hands["R"][0], hands["R"][1], sign["R"], g.hand_r),
        canvas=(size, size),
    )
    return np.rint(img).astype(np.uint8), labels, skeleton


def generate_synthetic_dataset(spec: SyntheticSignerSpec, n_frames: int, size: int = 64) -> SyntheticClip:
    """Render ``n_frames`` of a stick-figure signer with exact labels and joints."""
    if n_frames < 2:
        raise SpecError(f"n_frames must be >= 2, got {n_frames}")
    for name in ("upper_arm", "forearm", "head_radius", "hand_radius"):
        if not getattr(spec, name) > 0:
            raise SpecError(f"{name} must be positive, got {getattr(spec, name)}")
    check_frame_size(size, size)
    if spec.trajectory is None:
        raw = _default_trajectory(n_frames, spec.seed)
    else:
        raw = np.asarray(spec.trajectory, dtype=np.float64)
        if raw.ndim != 2 or raw.shape[1] != 4 or len(raw) == 0:
            raise SpecError(f"trajectory must have shape (T, 4), got {raw.shape}")
        raw = raw[np.arange(n_frames) % len(raw)]
    geometry = _Geometry(spec, size)
    angles = np.stack([geometry.pose(a) for a in raw])
    frames, skeletons, parsings = [], [], []
    for a in angles:
        px, labels, skeleton = render_signer(spec, a, size)
        frames.append(Frame(px))
        parsings.append(ParsingMap(labels, NUM_CLASSES))
        skeletons.append(skeleton)
    return SyntheticClip(frames, skeletons, parsings, angles)


def write_synthetic_corpus(out: Union[str, Path], n_signers: int, n_frames: int, seed: int = 0,
                           size: int = 64) -> Path:
    """Write ``n_signers`` synthetic clips in the shared layout; returns the manifest path."""
    if n_signers < 1:
        raise SpecError(f"need at least one signer, got {n_signers}")
    out = Path(out)
    entries = []
    for i in range(n_signers):
        spec = SyntheticSignerSpec.random(seed * 1000 + i)
        clip = generate_synthetic_dataset(spec, n_frames, size)
        clip_id = f"signer{i:03d}"
        dirs = {name: out / "clips" / clip_id / name for name in ("frames", "keypoints", "parsing")}
        for d in dirs.values():
            d.mkdir(parents=True, exist_ok=True)
        for t, (frame, skeleton, parsing) in enumerate(zip(clip.frames, clip.skeletons, clip.parsings)):
            write_frame(frame, dirs["frames"] / FRAME_PATTERN.format(t))
            write_openpose_file(skeleton, dirs["keypoints"] / KEYPOINT_PATTERN.format(t))
            write_parsing(parsing, dirs["parsing"] / FRAME_PATTERN.format(t))
        entries.append({
            "org_text": "synthetic", "clean_text": "synthetic", "label": 0,
            "signer_id": i, "signer": i, "file": clip_id, "url": "",
            "start": 0, "end": n_frames, "start_time": 0.0, "end_time": n_frames / 25.0,
            "fps": 25.0, "height": size, "width": size, "box": [0.0, 0.0, 1.0, 1.0],
            "frame_dir": f"clips/{clip_id}/frames",
            "keypoint_dir": f"clips/{clip_id}/keypoints",
            "parsing_dir": f"clips/{clip_id}/parsing",
        })
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps(entries, indent=1))
    return manifest
