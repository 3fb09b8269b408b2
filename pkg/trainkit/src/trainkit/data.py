"""Dataset access: manifest parsing, image loading, [-1, 1] normalization.

The only contract with the rendering side is the documented manifest JSON
plus 8-bit grayscale PNG fringes and float EXR depths laid out relative to
the manifest's directory.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .exr import read_exr


class DegenerateDepthWarning(UserWarning):
    """A constant raster was normalized to zeros."""


def minmax_normalize(arr: np.ndarray) -> np.ndarray:
    """Affine map to [-1, 1]; constant rasters map to zeros with a warning."""
    lo = float(arr.min())
    hi = float(arr.max())
    if hi == lo:
        warnings.warn(
            "constant raster: normalization degenerates to zeros",
            DegenerateDepthWarning,
            stacklevel=2,
        )
        return np.zeros_like(arr, dtype=np.float32)
    unit = (arr - lo) / (hi - lo)
    return ((unit - 0.5) / 0.5).astype(np.float32)


def read_fringe(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float32) / 255.0


@dataclass
class PairSet:
    """Normalized fringe/depth tensors for one split."""

    fringe: np.ndarray  # (n, 1, h, w) in [-1, 1]
    depth: np.ndarray  # (n, 1, h, w) in [-1, 1]
    model_ids: list[str]

    def __len__(self) -> int:
        return len(self.fringe)


def load_pairs(manifest_path, split: str) -> PairSet:
    """Load and normalize every (fringe, depth) pair of one split."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    doc = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    fringes = []
    depths = []
    models = []
    for entry in doc["entries"]:
        if entry["split"] != split:
            continue
        fr = read_fringe(root / entry["fringe_path"])
        dp = read_exr(root / entry["depth_path"]).astype(np.float32)
        fringes.append(minmax_normalize(fr))
        depths.append(minmax_normalize(dp))
        models.append(entry["model_id"])
    if not fringes:
        raise ValueError(f"no entries with split {split!r} in {manifest_path}")
    return PairSet(
        fringe=np.stack(fringes)[:, None],
        depth=np.stack(depths)[:, None],
        model_ids=models,
    )
