"""MSE / PSNR / SSIM on 8-bit frames and dataset-level aggregation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import correlate2d

from .core import Frame, to_uint8
from .errors import EmptyEvaluation, WindowError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _pixels(a) -> np.ndarray:
    return np.asarray(to_uint8(a) if isinstance(a, Frame) else a, dtype=np.float64)


def luma(a) -> np.ndarray:
    """ITU-R BT.601 luma of an HxWx3 frame; 2D input passes through."""
    px = _pixels(a)
    return px if px.ndim == 2 else px @ LUMA_WEIGHTS


def mse(a, b) -> float:
    a, b = _pixels(a), _pixels(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / err)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a, b, peak: float = 255.0) -> np.ndarray:
    """Valid-region SSIM map over grayscale versions of ``a`` and ``b``."""
    x, y = luma(a), luma(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise WindowError(f"frame {x.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    w = gaussian_window()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2

    def filt(z):
        return correlate2d(z, w, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    xx, yy, xy = filt(x * x), filt(y * y), filt(x * y)
    mu_xy = mu_x * mu_y
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_xy
    num = (2 * mu_xy + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def ssim(a, b) -> float:
    return float(np.mean(ssim_map(a, b)))


def frame_sigma(f) -> float:
    """Population standard deviation of the frame's grayscale values."""
    return float(np.std(luma(f)))


@dataclass
class MetricRow:
    frame_id: str
    mse: float
    psnr: float
    ssim: float
    sigma: float


@dataclass
class MetricReport:
    rows: List[MetricRow]
    aggregates: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame_id", "mse", "psnr", "ssim", "sigma"])
            for r in self.rows:
                writer.writerow([r.frame_id, repr(r.mse), "inf" if math.isinf(r.psnr) else repr(r.psnr),
                                 repr(r.ssim), repr(r.sigma)])

    def summary(self) -> dict:
        return {"aggregates": self.aggregates, "counts": self.counts}

    def to_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, allow_nan=False))


def _aggregate(rows: Sequence[MetricRow]) -> Tuple[dict, dict]:
    finite_psnr = [r.psnr for r in rows if math.isfinite(r.psnr)]
    aggregates = {
        "mse": float(np.mean([r.mse for r in rows])),
        "psnr": float(np.mean(finite_psnr)) if finite_psnr else None,
        "ssim": float(np.mean([r.ssim for r in rows])),
        "sigma": float(np.mean([r.sigma for r in rows])),
    }
    counts = {
        "frames": len(rows),
        "psnr_finite": len(finite_psnr),
        "psnr_inf_excluded": len(rows) - len(finite_psnr),
    }
    return aggregates, counts


def evaluate_dataset(pairs: Iterable, ids: Optional[Sequence[str]] = None) -> MetricReport:
    """Per-frame metrics of ``(generated, target)`` pairs and their means.

    Frames are compared in the 8-bit domain; normalized Frames are
    denormalized first. Infinite PSNRs (identical pairs) are excluded from
    the PSNR mean and counted under ``psnr_inf_excluded``. ``sigma`` is
    measured on the generated frame.
    """
    rows = []
    for k, (gen, tgt) in enumerate(pairs):
        g, t = to_uint8(gen) if isinstance(gen, Frame) else gen, to_uint8(tgt) if isinstance(tgt, Frame) else tgt
        fid = ids[k] if ids is not None else str(k)
        rows.append(MetricRow(fid, mse(g, t), psnr(g, t), ssim(g, t), frame_sigma(g)))
    if not rows:
        raise EmptyEvaluation("no frame pairs to evaluate")
    aggregates, counts = _aggregate(rows)
    return MetricReport(rows, aggregates, counts)
