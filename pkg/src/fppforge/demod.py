"""Classical fringe demodulation: phase extraction, unwrapping, triangulation.

This is the reconstruction oracle that closes the loop on rendered data:
phase-shifted stacks (or a single carrier image via the Fourier method)
yield wrapped phase, a second lower frequency resolves the fringe order,
and the absolute phase triangulates back to metric depth, which can then
be compared against the renderer's own depth output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fringe import FringeSpec, PhaseCoeffs, phase_coeffs
from .scene import PinholeDevice

DEFAULT_MODULATION_THRESHOLD = 0.02
# rays closer than this to a constant-phase plane are numerically unstable
MIN_INTERSECTION_ANGLE_DEG = 0.5


def wrap_phase(phi):
    """Wrap radians into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=np.float64), 2.0 * np.pi)


def _step_trig(n: int) -> tuple[np.ndarray, np.ndarray]:
    """sin/cos of the shift angles 2*pi*k/n with exact quarter-turn values.

    Exact 0/+-1 entries make the sums structurally immune to a constant
    intensity offset (for N=4 the sums reduce to plain image differences),
    which is what the gain/offset invariance of phase shifting rests on.
    """
    k = np.arange(n)
    s = np.sin(2.0 * np.pi * k / n)
    c = np.cos(2.0 * np.pi * k / n)
    quarter, rem = np.divmod(4 * k, n)
    exact = rem == 0
    s[exact] = np.array([0.0, 1.0, 0.0, -1.0])[quarter[exact] % 4]
    c[exact] = np.array([1.0, 0.0, -1.0, 0.0])[quarter[exact] % 4]
    return s, c


@dataclass(frozen=True)
class PhaseMap:
    """Per-pixel phase raster with its fringe contrast and validity mask.

    values: radians; wrapped maps stay in (-pi, pi].
    modulation: recovered fringe amplitude, the confidence signal.
    valid_mask: False where modulation fell below the extraction threshold.
    """

    values: np.ndarray
    state: str
    modulation: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        if self.state not in ("wrapped", "unwrapped"):
            raise ValueError(f"unknown phase state {self.state!r}")


def ps_wrapped_phase(images, threshold: float = DEFAULT_MODULATION_THRESHOLD) -> PhaseMap:
    """N-step phase-shifting demodulation.

    Assumes the k-th image was projected with an extra phase of 2*pi*k/N:
    I_k = b + a*cos(phi + 2*pi*k/N). Then

        phi        = atan2(-sum_k I_k sin(2 pi k/N), sum_k I_k cos(2 pi k/N))
        modulation = (2/N) * sqrt(S^2 + C^2)  (recovers a)

    The result is exact for any N >= 3 on noiseless sinusoidal data and is
    invariant to global gain and offset of the stack.
    """
    stack = [np.asarray(im, dtype=np.float64) for im in images]
    n = len(stack)
    if n < 3:
        raise ValueError(f"phase shifting needs at least 3 images, got {n}")
    shape = stack[0].shape
    if any(im.shape != shape for im in stack):
        raise ValueError("all images in a stack must share one resolution")
    sines, cosines = _step_trig(n)
    s = sum(im * w for im, w in zip(stack, sines) if w != 0.0)
    c = sum(im * w for im, w in zip(stack, cosines) if w != 0.0)
    if not isinstance(s, np.ndarray):
        s = np.zeros(shape)
    if not isinstance(c, np.ndarray):
        c = np.zeros(shape)
    phi = wrap_phase(np.arctan2(-s, c))
    modulation = (2.0 / n) * np.hypot(s, c)
    return PhaseMap(phi, "wrapped", modulation, modulation >= threshold)


def ftp_wrapped_phase(
    image,
    carrier_freq: float,
    half_bandwidth: float,
    threshold: float = DEFAULT_MODULATION_THRESHOLD,
) -> PhaseMap:
    """Single-image Fourier-transform demodulation.

    Row-wise FFT; a raised-cosine band-pass of half-width `half_bandwidth`
    (cycles per image width) isolates the carrier lobe at `carrier_freq`;
    the inverse transform gives the analytic signal whose angle, minus the
    carrier ramp, is the wrapped phase. Frequencies must satisfy
    carrier_freq > half_bandwidth > 0 or the lobe overlaps DC.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("ftp expects a single 2D image")
    if half_bandwidth <= 0:
        raise ValueError("half_bandwidth must be positive")
    if carrier_freq <= half_bandwidth:
        raise ValueError(
            "carrier lobe overlaps DC: need carrier_freq > half_bandwidth "
            f"(got {carrier_freq} <= {half_bandwidth})"
        )
    h, w = img.shape
    spectrum = np.fft.fft(img, axis=1)
    freqs = np.arange(w, dtype=np.float64)  # cycles per image width
    window = np.zeros(w)
    inside = np.abs(freqs - carrier_freq) <= half_bandwidth
    window[inside] = 0.5 * (
        1.0 + np.cos(np.pi * (freqs[inside] - carrier_freq) / half_bandwidth)
    )
    analytic = np.fft.ifft(spectrum * window[None, :], axis=1)
    ramp = 2.0 * np.pi * carrier_freq * np.arange(w) / w
    phi = wrap_phase(np.angle(analytic) - ramp[None, :])
    modulation = 2.0 * np.abs(analytic)
    return PhaseMap(phi, "wrapped", modulation, modulation >= threshold)


def temporal_unwrap(
    phase_high: PhaseMap, phase_low: PhaseMap, freq_ratio: float
) -> PhaseMap:
    """Resolve the high-frequency fringe order from a lower frequency.

    phase_low must already be continuous (at most one fringe across the
    field); freq_ratio is the high/low frequency ratio. The output equals
    the wrapped input plus an integer number of 2*pi per pixel:

        Phi = phi_high + 2*pi*round((ratio*Phi_low - phi_high) / (2*pi))
    """
    if freq_ratio <= 1:
        raise ValueError(f"freq_ratio must exceed 1, got {freq_ratio}")
    if phase_high.values.shape != phase_low.values.shape:
        raise ValueError("phase maps must be registered (same resolution)")
    target = freq_ratio * phase_low.values
    fringe_order = np.round((target - phase_high.values) / (2.0 * np.pi))
    values = phase_high.values + 2.0 * np.pi * fringe_order
    return PhaseMap(
        values,
        "unwrapped",
        phase_high.modulation,
        phase_high.valid_mask & phase_low.valid_mask,
    )


def _camera_rays(camera: PinholeDevice) -> tuple[np.ndarray, np.ndarray]:
    """World-frame ray directions per pixel, scaled so camera-Z equals 1.

    With that scaling the ray parameter t is camera-space depth directly.
    Returns (origin (3,), directions (h, w, 3)).
    """
    w, h = camera.resolution
    fx, fy = camera.focal
    cx, cy = camera.center
    xi = (np.arange(w) - cx) / fx
    eta = (np.arange(h) - cy) / fy
    d_cam = np.stack(
        [
            np.broadcast_to(xi[None, :], (h, w)),
            np.broadcast_to(eta[:, None], (h, w)),
            np.ones((h, w)),
        ],
        axis=-1,
    )
    d_world = d_cam @ camera.pose.rotation.T
    return camera.pose.translation, d_world


def wall_depth_raster(camera: PinholeDevice, wall_y: float) -> np.ndarray:
    """Per-pixel camera-space depth of the background wall plane."""
    origin, dirs = _camera_rays(camera)
    with np.errstate(divide="ignore"):
        t = (wall_y - origin[1]) / dirs[..., 1]
    return np.where(np.isfinite(t) & (t > 0), t, 0.0)


def phase_to_depth(
    phase: PhaseMap,
    camera: PinholeDevice,
    projector: PinholeDevice,
    fringe: FringeSpec,
) -> np.ndarray:
    """Triangulate absolute phase into camera-space depth (meters).

    Each unwrapped phase value defines a constant-phase plane through the
    projector origin; intersecting the pixel's camera ray with that plane
    gives the surface point. Invalid pixels and rays nearly parallel to
    their plane (intersection angle below MIN_INTERSECTION_ANGLE_DEG)
    come back as NaN.
    """
    if phase.state != "unwrapped":
        raise ValueError("phase_to_depth requires an unwrapped phase map")
    coeffs = _render_coeffs(fringe)
    origin, dirs = _camera_rays(camera)
    h, w = phase.values.shape
    if dirs.shape[:2] != (h, w):
        raise ValueError("phase resolution does not match the camera")

    # constant-phase plane normals, projector frame -> world frame
    n_proj = np.empty((h, w, 3))
    n_proj[..., 0] = coeffs.g1
    n_proj[..., 1] = coeffs.g2
    n_proj[..., 2] = coeffs.g0 - phase.values
    n_world = n_proj @ projector.pose.rotation.T

    num = n_world @ (projector.pose.translation - origin)
    den = np.einsum("hwc,hwc->hw", n_world, dirs)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / den
        grazing = np.abs(den) / (
            np.linalg.norm(n_world, axis=-1) * np.linalg.norm(dirs, axis=-1)
        ) < np.sin(np.radians(MIN_INTERSECTION_ANGLE_DEG))
    valid = phase.valid_mask & ~grazing & np.isfinite(t) & (t > 0)
    return np.where(valid, t, np.nan)


def geometric_phase(
    depth: np.ndarray,
    camera: PinholeDevice,
    projector: PinholeDevice,
    fringe: FringeSpec,
) -> np.ndarray:
    """Exact absolute fringe phase of the surface a depth map describes.

    The forward model of phase_to_depth: backproject each pixel to its
    world point, express it in the projector frame, and evaluate the
    pattern's affine phase there. Useful as an independent reference for
    demodulation tests.
    """
    coeffs = _render_coeffs(fringe)
    origin, dirs = _camera_rays(camera)
    points = origin + np.asarray(depth, dtype=np.float64)[..., None] * dirs
    q = (points - projector.pose.translation) @ projector.pose.rotation
    return coeffs.phase_of_dirs(q[..., 0] / q[..., 2], q[..., 1] / q[..., 2])


def _render_coeffs(fringe: FringeSpec) -> PhaseCoeffs:
    from .render import UV_ROTATION_DEG, UV_SCALE

    return phase_coeffs(fringe, UV_SCALE, UV_ROTATION_DEG)
