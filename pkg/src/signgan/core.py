"""Shared domain types and parsing-map / pixel-range conversions."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from PIL import Image

from .errors import ConfigError, InvalidLabel, RangeError, ShapeError

NUM_CLASSES = 20
NUM_BODY = 25
NUM_HAND = 21

# CIHP category names, index == label id.
CIHP_CLASSES = (
    "background", "hat", "hair", "glove", "sunglasses", "upper_clothes",
    "dress", "coat", "socks", "pants", "torso_skin", "scarf", "skirt",
    "face", "left_arm", "right_arm", "left_leg", "right_leg", "left_shoe",
    "right_shoe",
)


def _load_palette() -> np.ndarray:
    raw = json.loads(resources.files("signgan").joinpath("palette.json").read_text())
    table = np.zeros((len(raw), 3), dtype=np.uint8)
    for key, rgb in raw.items():
        table[int(key)] = rgb
    return table


PALETTE = _load_palette()


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def check_frame_size(height: int, width: int) -> None:
    if height != width or not _is_power_of_two(height) or height < 64:
        raise ShapeError(f"frame must be square, power-of-two, >= 64; got {height}x{width}")


@dataclass(frozen=True, eq=False)
class Frame:
    """An RGB raster, either 8-bit ``[0, 255]`` or normalized ``[-1, 1]``."""

    pixels: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float32 if self.normalized else np.uint8, copy=True)
        if self.normalized:
            src = np.asarray(self.pixels, dtype=np.float64)
            if not np.all(np.isfinite(src)) or src.min(initial=0) < -1 or src.max(initial=0) > 1:
                raise RangeError("normalized frame values must lie in [-1, 1]")
        else:
            src = np.asarray(self.pixels)
            if src.min(initial=0) < 0 or src.max(initial=0) > 255:
                raise RangeError("8-bit frame values must lie in [0, 255]")
        if px.ndim != 3 or px.shape[2] != 3:
            raise ShapeError(f"frame pixels must be HxWx3, got {px.shape}")
        check_frame_size(px.shape[0], px.shape[1])
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.pixels if dtype is None else self.pixels.astype(dtype)


@dataclass(frozen=True, eq=False)
class ParsingMap:
    """Per-pixel category ids; 0 is background."""

    labels: np.ndarray
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ShapeError(f"parsing labels must be HxW, got {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise InvalidLabel(
                f"labels must lie in [0, {self.num_classes}); found range "
                f"[{labels.min()}, {labels.max()}]"
            )
        labels = labels.astype(np.uint8, copy=True)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True, eq=False)
class PoseSkeleton:
    """OpenPose-style 2D keypoints ``(x, y, confidence)``.

    Confidence 0 marks a missing joint. ``canvas`` is ``(height, width)`` of the
    frame the coordinates refer to.
    """

    body: np.ndarray
    left_hand: np.ndarray
    right_hand: np.ndarray
    canvas: Tuple[int, int]

    def __post_init__(self):
        for name, n in (("body", NUM_BODY), ("left_hand", NUM_HAND), ("right_hand", NUM_HAND)):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if arr.shape != (n, 3):
                raise ShapeError(f"{name} must have shape ({n}, 3), got {arr.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "canvas", (int(self.canvas[0]), int(self.canvas[1])))

    @classmethod
    def empty(cls, canvas: Tuple[int, int]) -> "PoseSkeleton":
        return cls(np.zeros((NUM_BODY, 3)), np.zeros((NUM_HAND, 3)), np.zeros((NUM_HAND, 3)), canvas)

    def clamped(self) -> "PoseSkeleton":
        """Copy with present keypoints clamped into the canvas."""
        h, w = self.canvas
        parts = []
        for arr in (self.body, self.left_hand, self.right_hand):
            arr = arr.copy()
            present = arr[:, 2] > 0
            arr[present, 0] = np.clip(arr[present, 0], 0, np.nextafter(w, 0))
            arr[present, 1] = np.clip(arr[present, 1], 0, np.nextafter(h, 0))
            parts.append(arr)
        return PoseSkeleton(*parts, canvas=self.canvas)

    def to_openpose(self) -> dict:
        """Single-person OpenPose JSON document for this skeleton."""
        return {
            "version": 1.3,
            "people": [{
                "person_id": [-1],
                "pose_keypoints_2d": [float(v) for v in self.body.ravel()],
                "hand_left_keypoints_2d": [float(v) for v in self.left_hand.ravel()],
                "hand_right_keypoints_2d": [float(v) for v in self.right_hand.ravel()],
            }],
        }


@dataclass(frozen=True, eq=False)
class PoseRender:
    """Skeleton raster in normalized form; background is exactly -1."""

    pixels: np.ndarray


@dataclass(eq=False)
class Sample:
    """One input/target training pair. Targets may be absent at inference."""

    input_frame: Frame
    initial_parsing: ParsingMap
    target_pose: PoseSkeleton
    target_parsing: Optional[ParsingMap] = None
    target_frame: Optional[Frame] = None
    frame_id: str = ""

    def __post_init__(self):
        size = (self.input_frame.height, self.input_frame.width)
        rasters = [("initial_parsing", self.initial_parsing.shape)]
        if self.target_parsing is not None:
            rasters.append(("target_parsing", self.target_parsing.shape))
        if self.target_frame is not None:
            rasters.append(("target_frame", (self.target_frame.height, self.target_frame.width)))
        for name, shape in rasters:
            if tuple(shape) != size:
                raise ShapeError(f"{name} has size {tuple(shape)}, input frame is {size}")


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 64
    num_classes: int = NUM_CLASSES
    base_channels: int = 64
    depth: Optional[int] = None
    pose_channels: int = 3
    seed: int = 0
    architecture: str = "dual"  # "dual" | "pix2pix" (single-encoder ablation)
    d_real_parsing: str = "predicted"  # "predicted" | "groundtruth"

    def __post_init__(self):
        if not isinstance(self.image_size, int) or not _is_power_of_two(self.image_size) or self.image_size < 64:
            raise ConfigError("model.image_size", f"must be a power of two >= 64, got {self.image_size!r}")
        if self.depth is None:
            object.__setattr__(self, "depth", int(math.log2(self.image_size)) - 2)
        if not isinstance(self.depth, int) or self.depth < 3:
            raise ConfigError("model.depth", f"must be an integer >= 3, got {self.depth!r}")
        if self.image_size >> self.depth < 1:
            raise ConfigError("model.depth", f"image_size / 2**depth must be >= 1 (depth={self.depth})")
        if not isinstance(self.num_classes, int) or not 2 <= self.num_classes <= len(PALETTE):
            raise ConfigError("model.num_classes", f"must be in [2, {len(PALETTE)}], got {self.num_classes!r}")
        if not isinstance(self.base_channels, int) or self.base_channels < 1:
            raise ConfigError("model.base_channels", f"must be a positive integer, got {self.base_channels!r}")
        if self.pose_channels != 3:
            raise ConfigError("model.pose_channels", "pose renders are RGB; must be 3")
        if self.architecture not in ("dual", "pix2pix"):
            raise ConfigError("model.architecture", f"must be 'dual' or 'pix2pix', got {self.architecture!r}")
        if self.d_real_parsing not in ("predicted", "groundtruth"):
            raise ConfigError("model.d_real_parsing", f"must be 'predicted' or 'groundtruth', got {self.d_real_parsing!r}")

    def to_dict(self) -> dict:
        return asdict(self)


# -- conversions -------------------------------------------------------------

def _labels_of(p: Union[ParsingMap, np.ndarray], num_classes: int) -> np.ndarray:
    if isinstance(p, ParsingMap):
        return p.labels
    labels = np.asarray(p)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvalidLabel(f"labels must lie in [0, {num_classes})")
    return labels


def onehot_encode(p: Union[ParsingMap, np.ndarray], num_classes: Optional[int] = None) -> np.ndarray:
    """``C x H x W`` float32 one-hot stack of a parsing map."""
    c = num_classes or (p.num_classes if isinstance(p, ParsingMap) else NUM_CLASSES)
    labels = _labels_of(p, c)
    return (np.arange(c, dtype=labels.dtype)[:, None, None] == labels[None]).astype(np.float32)


def argmax_decode(stack: np.ndarray, num_classes: Optional[int] = None) -> ParsingMap:
    """Inverse of :func:`onehot_encode`; also decodes logits."""
    stack = np.asarray(stack)
    return ParsingMap(np.argmax(stack, axis=0), num_classes or stack.shape[0])


def palette_colorize(p: ParsingMap) -> np.ndarray:
    """HxWx3 uint8 visualization of a parsing map through :data:`PALETTE`."""
    labels = _labels_of(p, len(PALETTE))
    return PALETTE[labels]


def palette_lookup(rgb: np.ndarray, num_classes: int = NUM_CLASSES) -> ParsingMap:
    """Invert :func:`palette_colorize`. Colors outside the palette raise InvalidLabel."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    codes = (rgb[..., 0].astype(np.int32) << 16) | (rgb[..., 1].astype(np.int32) << 8) | rgb[..., 2]
    table = (PALETTE[:, 0].astype(np.int32) << 16) | (PALETTE[:, 1].astype(np.int32) << 8) | PALETTE[:, 2]
    order = np.argsort(table)
    pos = np.searchsorted(table[order], codes).clip(0, len(table) - 1)
    ids = order[pos]
    if not np.all(table[ids] == codes):
        raise InvalidLabel("color not present in palette")
    return ParsingMap(ids, num_classes)


def normalize(f: Union[Frame, np.ndarray]):
    """Map 8-bit values to ``[-1, 1]`` via ``x / 127.5 - 1``."""
    if isinstance(f, Frame):
        if f.normalized:
            raise RangeError("frame is already normalized")
        return Frame(f.pixels.astype(np.float32) / np.float32(127.5) - np.float32(1.0), normalized=True)
    arr = np.asarray(f)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise RangeError("8-bit input must lie in [0, 255]")
    return arr.astype(np.float32) / np.float32(127.5) - np.float32(1.0)


def denormalize(f: Union[Frame, np.ndarray]):
    """Inverse of :func:`normalize`, rounding to the nearest 8-bit value."""
    if isinstance(f, Frame):
        if not f.normalized:
            raise RangeError("frame is not normalized")
        return Frame(denormalize(f.pixels))
    arr = np.asarray(f, dtype=np.float64)
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < -1 or arr.max() > 1):
        raise RangeError("normalized input must lie in [-1, 1]")
    return np.clip(np.rint((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)


def to_uint8(f: Union[Frame, np.ndarray]) -> np.ndarray:
    """8-bit HxWx3 pixels of a frame in either representation."""
    if isinstance(f, Frame):
        return denormalize(f.pixels) if f.normalized else f.pixels
    return np.asarray(f)


# -- disk I/O ----------------------------------------------------------------

def read_frame(path: Union[str, Path]) -> Frame:
    with Image.open(path) as im:
        return Frame(np.asarray(im.convert("RGB")))


def write_frame(f: Union[Frame, np.ndarray], path: Union[str, Path]) -> None:
    Image.fromarray(to_uint8(f)).save(path, format="PNG")


def read_parsing(path: Union[str, Path], num_classes: int = NUM_CLASSES) -> ParsingMap:
    with Image.open(path) as im:
        if im.mode != "L":
            raise ShapeError(f"{path}: parsing PNG must be single-channel, got mode {im.mode}")
        return ParsingMap(np.asarray(im), num_classes)


def write_parsing(p: ParsingMap, path: Union[str, Path]) -> None:
    Image.fromarray(p.labels).save(path, format="PNG")
