"""Run reports and the figures that accompany CLI outputs.

Every CLI invocation, successful or not, leaves a machine-readable JSON
report next to its outputs. Commands that produce numeric tables also
render a matplotlib figure to file alongside the delimited output.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REPORT_NAME = "run_report.json"


@dataclass
class RunReport:
    command: str
    config: dict = field(default_factory=dict)
    seed: int | None = None
    status: str = "ok"
    error: str | None = None
    items: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add_item(self, item_id: str, status: str, detail: str = "") -> None:
        self.items.append({"id": item_id, "status": status, "detail": detail})

    def finish(self, status: str | None = None, error: str | None = None) -> None:
        self.wall_time_s = time.perf_counter() - self._t0
        if status is not None:
            self.status = status
        if error is not None:
            self.error = error

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "status": self.status,
            "error": self.error,
            "items": self.items,
            "aggregate": self.aggregate,
            "wall_time_s": round(self.wall_time_s, 6),
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / REPORT_NAME
        path.write_text(self.to_json())
        return path


def _style():
    plt.rcParams.update(
        {
            "figure.dpi": 110,
            "axes.grid": True,
            "grid.alpha": 0.3,
            "font.size": 9,
        }
    )


def save_raster_figure(path, panels: dict[str, np.ndarray]) -> Path:
    """One row of image panels with colorbars (phase maps, depth, residuals)."""
    _style()
    n = len(panels)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.0), squeeze=False)
    for ax, (title, img) in zip(axes[0], panels.items()):
        shown = np.ma.masked_invalid(np.asarray(img, dtype=np.float64))
        im = ax.imshow(shown, cmap="viridis")
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
        ax.grid(False)
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def save_metric_bars(path, names: list[str], series: dict[str, list[float]]) -> Path:
    """Grouped bars, one subplot per metric, one bar per evaluated image."""
    _style()
    n = len(series)
    fig, axes = plt.subplots(n, 1, figsize=(max(4.0, 0.5 * len(names) + 2), 2.2 * n))
    if n == 1:
        axes = [axes]
    x = np.arange(len(names))
    for ax, (metric, values) in zip(axes, series.items()):
        ax.bar(x, values, width=0.6)
        ax.set_ylabel(metric)
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
