"""Telemetry line plots (loss, L1 weight and output-variance curves)."""
from __future__ import annotations

from pathlib import Path
from typing import List, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigError  # noqa: E402
from .training import read_telemetry  # noqa: E402


def _group_paths(out: Path, n: int) -> List[Path]:
    if n == 1:
        return [out]
    return [out.with_name(f"{out.stem}_{k}{out.suffix or '.png'}") for k in range(n)]


def plot_telemetry(telemetry: Union[str, Path], out: Union[str, Path], groups: Sequence[str]) -> List[Path]:
    """One PNG per comma-separated column group, one panel per column.

    The ``lambda`` panel is annotated with its observed min and max.
    """
    data = read_telemetry(telemetry)
    valid = [c for c in data if c not in ("step", "epoch_progress")]
    parsed = []
    for group in groups:
        cols = [c.strip() for c in group.split(",") if c.strip()]
        unknown = [c for c in cols if c not in valid]
        if not cols or unknown:
            raise ConfigError("--series", f"unknown column(s) {unknown or group!r}; valid columns: {', '.join(valid)}")
        parsed.append(cols)
    x = data["epoch_progress"]
    paths = _group_paths(Path(out), len(parsed))
    for cols, path in zip(parsed, paths):
        fig, axes = plt.subplots(len(cols), 1, figsize=(7, 2.4 * len(cols)), sharex=True, squeeze=False)
        for ax, col in zip(axes[:, 0], cols):
            y = data[col]
            ax.plot(x, y, lw=1.0)
            ax.set_ylabel(col)
            ax.grid(alpha=0.3)
            if col == "lambda" and len(y):
                ax.set_title(f"min {y.min():.1f} / max {y.max():.1f}", fontsize=9)
        axes[-1, 0].set_xlabel("epoch")
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=100)
        plt.close(fig)
    return paths
