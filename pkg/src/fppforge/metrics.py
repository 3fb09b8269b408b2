"""Loss and evaluation math for fringe-to-depth image pairs.

Conventions shared by every operation here:
  * images are 2D float rasters of identical resolution,
  * SSIM statistics use a uniform box window (default 8x8) slid with
    stride 1 over a replicate-padded image, population moments,
  * the default dynamic range is 2.0, matching data normalized to [-1, 1].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

LAPLACIAN_KERNEL = np.array(
    [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]
)


class DegenerateRasterWarning(UserWarning):
    """Emitted when a constant raster defeats min-max normalization."""


@dataclass(frozen=True)
class MetricConfig:
    ssim_window: int = 8
    data_range: float = 2.0
    c1: float | None = None  # default (0.01 * data_range)^2
    c2: float | None = None  # default (0.03 * data_range)^2
    lambda1: float = 100.0
    lambda2: float = 10.0
    laplacian_kernel: np.ndarray = field(
        default_factory=lambda: LAPLACIAN_KERNEL.copy()
    )

    def __post_init__(self):
        if self.ssim_window < 2:
            raise ValueError("ssim_window must be at least 2")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")
        if self.c1 is None:
            object.__setattr__(self, "c1", (0.01 * self.data_range) ** 2)
        if self.c2 is None:
            object.__setattr__(self, "c2", (0.03 * self.data_range) ** 2)
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("stabilizers c1, c2 must be positive")


def minmax_normalize(raster) -> np.ndarray:
    """Affinely map a raster to [-1, 1] with min -> -1 and max -> +1.

    A constant raster has no range; it maps to all zeros and raises a
    DegenerateRasterWarning so callers can flag the sample.
    """
    arr = np.asarray(raster, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("raster must be finite for normalization")
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        warnings.warn(
            "constant raster: min-max normalization is degenerate, returning zeros",
            DegenerateRasterWarning,
            stacklevel=2,
        )
        return np.zeros_like(arr)
    unit = (arr - lo) / (hi - lo)
    return (unit - 0.5) / 0.5


def _box_mean(img: np.ndarray, win: int) -> np.ndarray:
    """Mean over win-by-win windows, stride 1, replicate borders.

    Output pixel (i, j) averages rows i-(win-1)//2 .. i+win//2 of the
    edge-padded image (same for columns).
    """
    lo = (win - 1) // 2
    hi = win - 1 - lo
    p = np.pad(img, ((lo, hi), (lo, hi)), mode="edge")
    c = np.zeros((p.shape[0] + 1, p.shape[1] + 1))
    c[1:, 1:] = p.cumsum(axis=0).cumsum(axis=1)
    h, w = img.shape
    s = (
        c[win : win + h, win : win + w]
        - c[0:h, win : win + w]
        - c[win : win + h, 0:w]
        + c[0:h, 0:w]
    )
    return s / (win * win)


def _check_pair(u, v) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"image sizes differ: {u.shape} vs {v.shape}")
    return u, v


def ssim(u, v, cfg: MetricConfig | None = None) -> float:
    """Mean structural similarity over sliding windows.

    Per window: (2*mu_u*mu_v + c1)(2*cov + c2) /
                ((mu_u^2 + mu_v^2 + c1)(var_u + var_v + c2))
    with population (biased) moments. The formula is applied as is; it can
    go negative for anti-correlated content.
    """
    cfg = cfg or MetricConfig()
    u, v = _check_pair(u, v)
    win = cfg.ssim_window
    mu_u = _box_mean(u, win)
    mu_v = _box_mean(v, win)
    var_u = _box_mean(u * u, win) - mu_u * mu_u
    var_v = _box_mean(v * v, win) - mu_v * mu_v
    cov = _box_mean(u * v, win) - mu_u * mu_v
    num = (2.0 * mu_u * mu_v + cfg.c1) * (2.0 * cov + cfg.c2)
    den = (mu_u * mu_u + mu_v * mu_v + cfg.c1) * (var_u + var_v + cfg.c2)
    return float(np.mean(num / den))


def loss_t1(g, d, cfg: MetricConfig | None = None) -> float:
    """Structural term: 1 - SSIM(g, d)."""
    return 1.0 - ssim(g, d, cfg)


def laplacian(raster) -> np.ndarray:
    """3x3 Laplacian response with replicate borders."""
    arr = np.asarray(raster, dtype=np.float64)
    if arr.ndim != 2 or min(arr.shape) < 3:
        raise ValueError("laplacian needs a raster of at least 3x3")
    return ndimage.convolve(arr, LAPLACIAN_KERNEL, mode="nearest")


def loss_t2(g, d) -> float:
    """Edge term: mean absolute difference of Laplacian responses."""
    g, d = _check_pair(g, d)
    return float(np.mean(np.abs(laplacian(g) - laplacian(d))))


def unet_loss(g, d, cfg: MetricConfig | None = None) -> float:
    """Weighted structural + edge loss: lambda1*(1 - SSIM) + lambda2*edge."""
    cfg = cfg or MetricConfig()
    return cfg.lambda1 * loss_t1(g, d, cfg) + cfg.lambda2 * loss_t2(g, d)


def lsgan_d_loss(d_fake_scores, d_real_scores) -> float:
    """Least-squares discriminator loss:
    0.5*mean(fake^2) + 0.5*mean((1 - real)^2)."""
    fake = np.asarray(d_fake_scores, dtype=np.float64)
    real = np.asarray(d_real_scores, dtype=np.float64)
    if not (np.all(np.isfinite(fake)) and np.all(np.isfinite(real))):
        raise ValueError("discriminator scores must be finite")
    return float(0.5 * np.mean(fake**2) + 0.5 * np.mean((1.0 - real) ** 2))


def pix2pix_loss(
    d_fake_scores, d_real_scores, g, d, cfg: MetricConfig | None = None
) -> float:
    """Adversarial objective: lsgan term plus the weighted image losses."""
    return lsgan_d_loss(d_fake_scores, d_real_scores) + unet_loss(g, d, cfg)


def mae(g, d) -> float:
    """Mean absolute error between two registered rasters."""
    g, d = _check_pair(g, d)
    return float(np.mean(np.abs(g - d)))


def msde(pairs) -> float:
    """Mean over images of the standard deviation of signed error.

    The per-image spread is the population std of (g - d); a constant bias
    therefore contributes nothing.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("msde needs at least one image pair")
    sds = []
    for g, d in pairs:
        g, d = _check_pair(g, d)
        sds.append(np.std(g - d))
    return float(np.mean(sds))
