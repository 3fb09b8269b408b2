"""Deterministic direct-illumination rendering of fringe and depth images.

A render casts one primary ray per camera pixel against the posed mesh and
the background wall. Mesh hits are shaded as Lambertian surfaces lit by the
projector's fringe pattern (with a shadow-ray visibility test) plus a scalar
ambient term; wall hits receive the ambient term only, standing in for an
unstructured environment behind the measurement volume. Depth records the
camera-space Z of the nearest hit, which the wall keeps finite everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .fringe import (
    FringeSpec,
    centered_phase_shift,
    synth_pattern,
)
from .scene import (
    CAMERA_FOV_DEG,
    OBJECT_POSITION,
    PROJECTOR_POSITION,
    WALL_Y,
    Mesh,
    PinholeDevice,
    RigidPose,
    build_rig,
    transform_mesh,
)

# Projector power (watts) that maps to unit pattern intensity.
POWER_FULL_SCALE = 55.0
WALL_ALBEDO = 0.8
# Projective texture mapping used by every render; phase-to-depth
# triangulation assumes the same values.
UV_SCALE = 1.0
UV_ROTATION_DEG = 0.0

FALLOFF_MODES = ("constant", "inverse_square")


def env_ambient_weight(env_rotation_deg: float) -> float:
    """Smooth weighting of the ambient term by environment rotation.

    Stands in for rotating a panoramic background: a fixed cosine lobe in
    [0.5, 1] with its maximum at 0 degrees.
    """
    return 0.75 + 0.25 * float(np.cos(np.radians(env_rotation_deg)))


@dataclass(frozen=True)
class SceneParams:
    """One render configuration: pattern, devices, illumination, pose."""

    fringe: FringeSpec
    camera: PinholeDevice
    projector: PinholeDevice
    cam_proj_angle_deg: float
    projector_power: float = 37.5
    ambient: float = 0.5
    env_rotation_deg: float = 0.0
    wall_y: float = WALL_Y
    object_pose: RigidPose = field(default_factory=RigidPose.identity)
    noise_sigma: float = 0.005
    falloff: str = "constant"

    def __post_init__(self):
        if self.falloff not in FALLOFF_MODES:
            raise ValueError(f"falloff must be one of {FALLOFF_MODES}")
        if not (0.0 <= self.ambient <= 1.0):
            raise ValueError("ambient must lie in [0, 1]")
        if self.projector_power <= 0:
            raise ValueError("projector_power must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def power_norm(self) -> float:
        return self.projector_power / POWER_FULL_SCALE

    @property
    def ambient_term(self) -> float:
        return self.ambient * env_ambient_weight(self.env_rotation_deg)


@dataclass(frozen=True)
class ImagePair:
    """The dataset atom: one fringe raster with its registered depth."""

    fringe_image: np.ndarray
    depth_image: np.ndarray
    params: SceneParams
    model_id: str = ""
    pose_index: int = -1
    group_id: int = -1
    frequency: float = 1.0
    step: int = 0


def make_scene(
    resolution: tuple[int, int] = (512, 512),
    carrier_scale: float = 5.5,
    frequency: float = 1.0,
    fringe_rotation_deg: float = 0.0,
    amplitude: float = 0.5,
    offset: float = 0.5,
    pattern_resolution: tuple[int, int] = (2048, 2048),
    cam_proj_angle_deg: float = 15.0,
    projector_power: float = 37.5,
    ambient: float = 0.5,
    env_rotation_deg: float = 0.0,
    wall_y: float = WALL_Y,
    object_pose: RigidPose | None = None,
    noise_sigma: float = 0.005,
    falloff: str = "constant",
    fov_deg: float = CAMERA_FOV_DEG,
    anchor_phase: bool = True,
) -> SceneParams:
    """Standard rig configuration.

    carrier_scale is the dimensionless pattern scale: the projected fringe
    completes carrier_scale * frequency cycles per unit of X/Z in the
    projector frame. anchor_phase zeroes the total phase at the texture
    center so multi-frequency stacks share an exact phase origin.
    """
    from .fringe import carrier_scale_to_period

    period = carrier_scale_to_period(carrier_scale, frequency, pattern_resolution)
    shift = (
        centered_phase_shift(period, fringe_rotation_deg, pattern_resolution)
        if anchor_phase
        else 0.0
    )
    spec = FringeSpec(
        period=period,
        rotation_deg=fringe_rotation_deg,
        amplitude=amplitude,
        offset=offset,
        phase_shift=shift,
        pattern_resolution=pattern_resolution,
    )
    camera, projector = build_rig(
        cam_proj_angle_deg,
        resolution=resolution,
        fov_deg=fov_deg,
        pattern_resolution=pattern_resolution,
    )
    return SceneParams(
        fringe=spec,
        camera=camera,
        projector=projector,
        cam_proj_angle_deg=cam_proj_angle_deg,
        projector_power=projector_power,
        ambient=ambient,
        env_rotation_deg=env_rotation_deg,
        wall_y=wall_y,
        object_pose=object_pose if object_pose is not None else RigidPose.identity(),
        noise_sigma=noise_sigma,
        falloff=falloff,
    )


class _PreparedScene:
    """Posed geometry plus BVH, reusable across the images of one stack."""

    def __init__(self, mesh: Mesh, params: SceneParams):
        posed = transform_mesh(mesh, params.object_pose)
        self.tri = np.ascontiguousarray(posed.triangle_corners())
        self.tri_albedo = np.ascontiguousarray(posed.albedo[posed.triangles])
        self.bvh = _kernels.build_bvh(self.tri)
        self.params = params

    def run(self, pattern: np.ndarray, shade: bool):
        p = self.params
        cam = p.camera
        proj = p.projector
        falloff_ref = float(
            np.linalg.norm(np.asarray(PROJECTOR_POSITION) - np.asarray(OBJECT_POSITION))
        )
        w, h = cam.resolution
        return _kernels.render_kernel(
            w,
            h,
            np.ascontiguousarray(cam.pose.rotation),
            np.ascontiguousarray(cam.pose.translation),
            cam.focal[0],
            cam.focal[1],
            cam.center[0],
            cam.center[1],
            self.tri,
            self.tri_albedo,
            *self.bvh,
            p.wall_y,
            WALL_ALBEDO,
            np.ascontiguousarray(proj.pose.rotation),
            np.ascontiguousarray(proj.pose.translation),
            UV_SCALE,
            float(np.cos(np.radians(UV_ROTATION_DEG))),
            float(np.sin(np.radians(UV_ROTATION_DEG))),
            pattern,
            p.power_norm,
            p.ambient_term,
            p.falloff == "inverse_square",
            falloff_ref,
            shade,
        )


def _finish_fringe(raw: np.ndarray, sigma: float, rng: np.random.Generator | None):
    if sigma > 0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires a seed")
        raw = raw + rng.normal(0.0, sigma, size=raw.shape)
    return np.clip(raw, 0.0, 1.0)


def render_fringe(mesh: Mesh, params: SceneParams, seed: int = 0) -> np.ndarray:
    """Render the fringe image for one configuration; [0, 1] float raster."""
    prep = _PreparedScene(mesh, params)
    raw, _ = prep.run(synth_pattern(params.fringe), shade=True)
    rng = np.random.default_rng(seed) if params.noise_sigma > 0 else None
    return _finish_fringe(raw, params.noise_sigma, rng)


def render_depth(mesh: Mesh, params: SceneParams) -> np.ndarray:
    """Render camera-space depth in meters; finite everywhere (wall backstop)."""
    prep = _PreparedScene(mesh, params)
    _, depth = prep.run(np.zeros((2, 2)), shade=False)
    return depth


def render_pair(
    mesh: Mesh,
    params: SceneParams,
    seed: int = 0,
    model_id: str = "",
    pose_index: int = -1,
    group_id: int = -1,
) -> ImagePair:
    """Render fringe and depth with identical geometry in one pass."""
    prep = _PreparedScene(mesh, params)
    raw, depth = prep.run(synth_pattern(params.fringe), shade=True)
    rng = np.random.default_rng(seed) if params.noise_sigma > 0 else None
    return ImagePair(
        fringe_image=_finish_fringe(raw, params.noise_sigma, rng),
        depth_image=depth,
        params=params,
        model_id=model_id,
        pose_index=pose_index,
        group_id=group_id,
    )


def render_phase_sequence(
    mesh: Mesh,
    params: SceneParams,
    n_steps: int,
    frequencies=(1.0,),
    seed: int = 0,
) -> list[ImagePair]:
    """Phase-shifted stacks for demodulation.

    For each frequency multiplier f the base pattern's spatial frequency is
    scaled by f and n_steps images are rendered with phase steps 2*pi*k/n,
    all with identical geometry; each frequency renders one depth image that
    its stack shares. Every stack's pattern is re-anchored so that total
    phase is zero at the texture center, keeping absolute phases of the
    stacks in exact frequency ratio (the temporal-unwrapping contract).
    """
    if n_steps < 3:
        raise ValueError(f"phase shifting needs at least 3 steps, got {n_steps}")
    prep = _PreparedScene(mesh, params)
    base = params.fringe
    out: list[ImagePair] = []
    for fi, freq in enumerate(frequencies):
        period = base.period / float(freq)
        anchor = centered_phase_shift(
            period, base.rotation_deg, base.pattern_resolution
        )
        depth = None
        for k in range(n_steps):
            spec = replace(
                base,
                period=period,
                phase_shift=anchor + 2.0 * np.pi * k / n_steps,
            )
            p_k = replace(params, fringe=spec)
            prep.params = p_k
            raw, dep = prep.run(synth_pattern(spec), shade=True)
            if depth is None:
                depth = dep
            rng = (
                np.random.default_rng(np.random.SeedSequence([seed, fi, k]))
                if params.noise_sigma > 0
                else None
            )
            out.append(
                ImagePair(
                    fringe_image=_finish_fringe(raw, params.noise_sigma, rng),
                    depth_image=depth,
                    params=p_k,
                    frequency=float(freq),
                    step=k,
                )
            )
    return out
