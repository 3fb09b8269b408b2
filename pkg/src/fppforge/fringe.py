"""Sinusoidal fringe patterns and the projector's projective texture mapping.

A pattern is a w-by-h float raster in [0, 1]. The projected intensity at a
3D point follows from two maps:

  1. projector_uv: perspective division of the projector-frame point onto
     the pattern's unit texture square (with a 0.5 centering offset), and
  2. sample_pattern: bilinear lookup into the raster, dark outside [0,1]^2.

The composition makes the total fringe phase an affine function of the
projector-frame direction ratios (X/Z, Y/Z); PhaseCoeffs captures that
affine map exactly, which is what phase-to-depth triangulation inverts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FringeSpec:
    """Parameters of one sinusoidal pattern.

    period: pixels per fringe cycle in pattern space (> 2 for sampling).
    rotation_deg: in-plane rotation of the fringe direction.
    amplitude/offset: cosine amplitude a and DC offset b, with b-a >= 0 and
        b+a <= 1 so synthesis never clips.
    phase_shift: additive phase in radians.
    pattern_resolution: (w, h) of the synthesized raster.
    """

    period: float
    rotation_deg: float = 0.0
    amplitude: float = 0.5
    offset: float = 0.5
    phase_shift: float = 0.0
    pattern_resolution: tuple[int, int] = (2048, 2048)

    def __post_init__(self):
        if not self.period > 2.0:
            raise ValueError(f"fringe period must exceed 2 px, got {self.period}")
        if self.offset - self.amplitude < -1e-12:
            raise ValueError("offset - amplitude must be >= 0 (no negative clip)")
        if self.offset + self.amplitude > 1.0 + 1e-12:
            raise ValueError("offset + amplitude must be <= 1 (no bright clip)")
        w, h = self.pattern_resolution
        if w < 2 or h < 2:
            raise ValueError("pattern resolution must be at least 2x2")


def synth_pattern(spec: FringeSpec) -> np.ndarray:
    """Render the pattern raster I(x, y) = b + a*cos(2*pi*x'/period + shift),
    where x' is the pixel x coordinate rotated by rotation_deg."""
    w, h = spec.pattern_resolution
    x = np.arange(w, dtype=np.float64)[None, :]
    y = np.arange(h, dtype=np.float64)[:, None]
    rot = np.radians(spec.rotation_deg)
    xr = x * np.cos(rot) + y * np.sin(rot)
    img = spec.offset + spec.amplitude * np.cos(
        2.0 * np.pi * xr / spec.period + spec.phase_shift
    )
    return np.clip(img, 0.0, 1.0)


def projector_uv(point, scale: float = 1.0, rotation_deg: float = 0.0):
    """Map projector-frame points to pattern texture coordinates.

    (u, v) = rot(rotation_deg) @ (X/Z, Y/Z) * scale + (0.5, 0.5); the result
    depends only on the direction of the point, not its distance. `point`
    may be a single 3-vector or an (..., 3) array.
    """
    p = np.asarray(point, dtype=np.float64)
    z = p[..., 2]
    if np.any(z <= 0):
        raise ValueError("point must lie in front of the projector (Z > 0)")
    a = p[..., 0] / z
    b = p[..., 1] / z
    r = np.radians(rotation_deg)
    c, s = np.cos(r), np.sin(r)
    u = (a * c - b * s) * scale + 0.5
    v = (a * s + b * c) * scale + 0.5
    return np.stack([u, v], axis=-1) if p.ndim > 1 else (float(u), float(v))


def sample_pattern(pattern: np.ndarray, uv) -> np.ndarray | float:
    """Bilinear lookup; uv grid is corner-aligned (u=0 hits texel column 0,
    u=1 texel column w-1). Coordinates outside [0, 1]^2 return 0."""
    uv_arr = np.asarray(uv, dtype=np.float64)
    scalar = uv_arr.ndim == 1
    uv_arr = np.atleast_2d(uv_arr)
    h, w = pattern.shape
    u = uv_arr[..., 0]
    v = uv_arr[..., 1]
    inside = (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (v <= 1.0)
    x = np.clip(u * (w - 1), 0.0, w - 1)
    y = np.clip(v * (h - 1), 0.0, h - 1)
    x0 = np.minimum(x.astype(np.int64), w - 2)
    y0 = np.minimum(y.astype(np.int64), h - 2)
    fx = x - x0
    fy = y - y0
    p00 = pattern[y0, x0]
    p01 = pattern[y0, x0 + 1]
    p10 = pattern[y0 + 1, x0]
    p11 = pattern[y0 + 1, x0 + 1]
    val = (
        p00 * (1 - fx) * (1 - fy)
        + p01 * fx * (1 - fy)
        + p10 * (1 - fx) * fy
        + p11 * fx * fy
    )
    val = np.where(inside, val, 0.0)
    return float(val[0]) if scalar else val


@dataclass(frozen=True)
class PhaseCoeffs:
    """Exact affine model of total fringe phase over projector directions.

    phase(X, Y, Z) = g0 + g1 * X/Z + g2 * Y/Z for points in the projector
    frame. Constant-phase sets are planes through the projector origin:
    g1*X + g2*Y + (g0 - phase)*Z = 0.
    """

    g0: float
    g1: float
    g2: float

    def phase_of_dirs(self, a, b):
        return self.g0 + self.g1 * np.asarray(a) + self.g2 * np.asarray(b)

    def plane_normal(self, phase: float) -> np.ndarray:
        """Projector-frame normal of the constant-phase plane."""
        return np.array([self.g1, self.g2, self.g0 - phase])


def phase_coeffs(
    spec: FringeSpec, uv_scale: float = 1.0, uv_rotation_deg: float = 0.0
) -> PhaseCoeffs:
    """Phase coefficients of synth_pattern sampled through projector_uv."""
    w, h = spec.pattern_resolution
    rho = np.radians(spec.rotation_deg)
    tr = np.radians(uv_rotation_deg)
    k = 2.0 * np.pi / spec.period
    cx = np.cos(rho) * (w - 1)
    cy = np.sin(rho) * (h - 1)
    g0 = k * 0.5 * (cx + cy) + spec.phase_shift
    g1 = k * uv_scale * (cx * np.cos(tr) + cy * np.sin(tr))
    g2 = k * uv_scale * (-cx * np.sin(tr) + cy * np.cos(tr))
    return PhaseCoeffs(float(g0), float(g1), float(g2))


def centered_phase_shift(
    period: float,
    rotation_deg: float = 0.0,
    pattern_resolution: tuple[int, int] = (2048, 2048),
) -> float:
    """Phase shift that zeroes the total phase at the texture center.

    Multi-frequency stacks built with this anchor have absolute phases in
    exact frequency ratio, which temporal unwrapping relies on.
    """
    w, h = pattern_resolution
    rho = np.radians(rotation_deg)
    k = 2.0 * np.pi / period
    return float(-k * 0.5 * (np.cos(rho) * (w - 1) + np.sin(rho) * (h - 1)))


def carrier_scale_to_period(
    carrier_scale: float,
    frequency: float = 1.0,
    pattern_resolution: tuple[int, int] = (2048, 2048),
) -> float:
    """Pattern period realizing `carrier_scale * frequency` fringe cycles per
    unit of X/Z when sampled through projector_uv at scale 1.

    On a wall at distance D along the projector axis this comes out to an
    on-plane fringe period of D / (carrier_scale * frequency) meters.
    """
    w, _ = pattern_resolution
    cycles = carrier_scale * frequency
    if cycles <= 0:
        raise ValueError("carrier cycles must be positive")
    return (w - 1) / cycles
