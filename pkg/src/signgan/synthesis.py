"""Inference: one identity frame plus a keypoint sequence to a frame sequence."""
from __future__ import annotations

import hashlib
import json
import re
import time
from pathlib import Path
from typing import List, Optional, Sequence, Union

import torch

from .core import Frame, ModelConfig, PoseSkeleton, denormalize, onehot_encode, write_frame
from .errors import EmptySequence, FormatError, ShapeError
from .ingestion import read_openpose_file, rasterize_pose
from .models import Networks, frame_tensor, generator_inputs, logits_to_onehot, parse_frame

_KEYPOINT_FILE = re.compile(r".*_keypoints\.json$")


class _Conditioning:
    """Per-clip tensors that depend only on the constant input frame."""

    def __init__(self, nets: Networks, input_frame: Frame):
        cfg = nets.config
        if input_frame.height != cfg.image_size:
            raise ShapeError(f"input frame is {input_frame.height}px, model expects {cfg.image_size}px")
        self.frame = frame_tensor(input_frame)
        self.initial = torch.from_numpy(onehot_encode(parse_frame(nets.parser, input_frame), cfg.num_classes)).unsqueeze(0)


@torch.no_grad()
def _generate(nets: Networks, cond: _Conditioning, target: PoseSkeleton) -> Frame:
    cfg = nets.config
    pose = torch.from_numpy(rasterize_pose(target, cfg.image_size).pixels).permute(2, 0, 1).unsqueeze(0)
    predicted = logits_to_onehot(nets.predictor(torch.cat([cond.initial, pose], dim=1)))
    out = nets.generator(*generator_inputs(cfg, cond.frame, cond.initial, predicted, pose))
    return Frame(denormalize(out[0].permute(1, 2, 0).clamp(-1, 1).numpy()))


def synthesize_frame(input_frame: Frame, target: PoseSkeleton, nets: Networks) -> Frame:
    """Render the person in ``input_frame`` in pose ``target`` (8-bit output)."""
    nets.eval()
    return _generate(nets, _Conditioning(nets, input_frame), target)


def synthesize_video(input_frame: Frame, sequence: Sequence[PoseSkeleton], nets: Networks) -> List[Frame]:
    """Frame-by-frame synthesis; the input frame is parsed once for the clip."""
    if not sequence:
        raise EmptySequence("pose sequence is empty")
    nets.eval()
    cond = _Conditioning(nets, input_frame)
    return [_generate(nets, cond, s) for s in sequence]


def load_gloss_sequence(directory: Union[str, Path], canvas: Optional[tuple] = None) -> List[PoseSkeleton]:
    """Read every ``*_keypoints.json`` file of a directory in filename order.

    ``canvas`` is the ``(height, width)`` the keypoints were measured on;
    the default is the model's square canvas, supplied by the caller.
    """
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if _KEYPOINT_FILE.match(p.name)) if directory.is_dir() else []
    if not files:
        raise EmptySequence(f"no keypoint files in {directory}")
    if canvas is None:
        raise ValueError("canvas size is required")
    skeletons = []
    for path in files:
        try:
            skeletons.append(read_openpose_file(path, canvas))
        except Exception as exc:  # noqa: BLE001 - every failure is reported with the file name
            raise FormatError(f"{path.name}: {exc}") from exc
    return skeletons


def config_hash(config: ModelConfig) -> str:
    return hashlib.sha256(json.dumps(config.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def write_sequence(frames: Sequence[Frame], out_dir: Union[str, Path], nets: Networks,
                   timings: Optional[dict] = None, gif: bool = False) -> List[Path]:
    """Persist ``out_%06d.png`` files plus ``report.json``; optionally an animated GIF."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, frame in enumerate(frames):
        p = out_dir / f"out_{k:06d}.png"
        write_frame(frame, p)
        paths.append(p)
    if gif and frames:
        from PIL import Image
        images = [Image.fromarray(f.pixels) for f in frames]
        images[0].save(out_dir / "out.gif", save_all=True, append_images=images[1:], duration=40, loop=0)
    report = {"frames": len(frames), "config_hash": config_hash(nets.config), "model": nets.config.to_dict(),
              "timings": timings or {}}
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return paths


def timed_video(input_frame: Frame, sequence: Sequence[PoseSkeleton], nets: Networks):
    t0 = time.perf_counter()
    frames = synthesize_video(input_frame, sequence, nets)
    elapsed = time.perf_counter() - t0
    return frames, {"total_seconds": elapsed, "seconds_per_frame": elapsed / len(frames)}
