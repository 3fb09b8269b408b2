"""Scene geometry: meshes, rigid poses, pinhole devices, and the pose schedule.

All lengths are meters. The world frame is the measurement-rig frame:
the object sits near the origin, the projector and camera sit on the
negative-y side looking toward +y, the background wall is just behind
the object, and +z is up.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

# Rig layout constants (meters / degrees).
OBJECT_POSITION = (0.0, 0.0, -0.02)
PROJECTOR_POSITION = (0.0, -1.5, 0.0)
WALL_Y = 0.05
MAX_MODEL_DIM = 0.14
CAMERA_FOV_DEG = 7.0
DEVICE_RADIUS = 1.5

_WORLD_UP = np.array([0.0, 0.0, 1.0])


class MeshError(ValueError):
    """Raised for unreadable or empty mesh files."""


@dataclass(frozen=True)
class Mesh:
    """Triangle soup with optional per-vertex diffuse albedo.

    vertices: (n, 3) float64 positions in meters.
    triangles: (m, 3) int64 vertex indices.
    albedo: (n,) float64 in [0, 1]; defaults to a uniform 0.8.
    n_degenerate_dropped: zero-area faces removed at load time.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    albedo: np.ndarray = None  # type: ignore[assignment]
    n_degenerate_dropped: int = 0

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError(f"triangles must be (m, 3), got {t.shape}")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        a = self.albedo
        if a is None:
            a = np.full(len(v), 0.8)
        a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
        if a.shape != (len(v),):
            raise MeshError(f"albedo must be ({len(v)},), got {a.shape}")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "albedo", a)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.vertices) == 0:
            raise MeshError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangle_corners(self) -> np.ndarray:
        """(m, 3, 3) corner positions, the layout the renderer consumes."""
        return self.vertices[self.triangles]


@dataclass(frozen=True)
class RigidPose:
    """Rigid motion p -> R @ p + t mapping a device/object frame into world."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(np.asarray(self.rotation, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.translation, dtype=np.float64))
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if t.shape != (3,):
            raise ValueError(f"translation must be length 3, got {t.shape}")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or not np.isclose(
            np.linalg.det(r), 1.0, atol=1e-9
        ):
            raise ValueError("rotation must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidPose":
        return RigidPose(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidPose":
        return RigidPose(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "RigidPose") -> "RigidPose":
        """self after other: (self o other)(p) = self(other(p))."""
        return RigidPose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


def change_frame(pose: RigidPose, point) -> np.ndarray:
    """Apply a rigid pose to one point or an (n, 3) batch of points."""
    p = np.asarray(point, dtype=np.float64)
    return p @ pose.rotation.T + pose.translation


@dataclass(frozen=True)
class PinholeDevice:
    """Pinhole camera/projector: intrinsics plus a device-to-world pose.

    Pixel convention: pixel (i, j) is centered at image coordinate (i, j);
    +X is image right, +Y image down, +Z the optical axis.
    """

    focal: tuple[float, float]
    center: tuple[float, float]
    resolution: tuple[int, int]
    pose: RigidPose = field(default_factory=RigidPose.identity)

    def __post_init__(self):
        fx, fy = self.focal
        cx, cy = self.center
        w, h = self.resolution
        if fx <= 0 or fy <= 0:
            raise ValueError("focal components must be positive")
        if not (0 <= cx <= w - 1 and 0 <= cy <= h - 1):
            raise ValueError("principal point must lie within image bounds")

    @staticmethod
    def from_fov(
        fov_deg: float,
        resolution: tuple[int, int],
        pose: RigidPose | None = None,
    ) -> "PinholeDevice":
        """Square-pixel device whose horizontal field of view is fov_deg.

        The outermost pixel centers land exactly at +-fov/2.
        """
        w, h = resolution
        half = np.tan(np.radians(fov_deg) / 2.0)
        f = (w - 1) / (2.0 * half)
        return PinholeDevice(
            focal=(f, f),
            center=((w - 1) / 2.0, (h - 1) / 2.0),
            resolution=(int(w), int(h)),
            pose=pose if pose is not None else RigidPose.identity(),
        )


def project_point(device: PinholeDevice, point) -> tuple[float, float]:
    """Project a device-frame point to pixel coordinates.

    Raises ValueError for points at or behind the principal plane.
    """
    x, y, z = np.asarray(point, dtype=np.float64)
    if z <= 0:
        raise ValueError(f"point must have Z > 0 in the device frame, got Z={z}")
    fx, fy = device.focal
    cx, cy = device.center
    return (fx * x / z + cx, fy * y / z + cy)


def unproject_pixel(device: PinholeDevice, pixel, depth: float) -> np.ndarray:
    """Device-frame point at camera depth `depth` along the pixel's ray."""
    px, py = pixel
    fx, fy = device.focal
    cx, cy = device.center
    return np.array([(px - cx) * depth / fx, (py - cy) * depth / fy, depth])


def look_at_pose(position, target, up=_WORLD_UP) -> RigidPose:
    """Device pose at `position` with the optical axis through `target`.

    Image right stays horizontal (perpendicular to `up`); image down maps
    to -up, so the rendered image is upright.
    """
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    z = target - position
    nz = np.linalg.norm(z)
    if nz == 0:
        raise ValueError("device position coincides with its target")
    z = z / nz
    x = np.cross(z, up)
    nx = np.linalg.norm(x)
    if nx < 1e-12:
        raise ValueError("viewing direction is parallel to the up vector")
    x = x / nx
    y = np.cross(z, x)
    return RigidPose(np.column_stack([x, y, z]), position)


def build_rig(
    cam_proj_angle_deg: float,
    resolution: tuple[int, int] = (512, 512),
    fov_deg: float = CAMERA_FOV_DEG,
    pattern_resolution: tuple[int, int] = (2048, 2048),
) -> tuple[PinholeDevice, PinholeDevice]:
    """Camera and projector for the standard rig.

    The projector sits at PROJECTOR_POSITION; the camera sits on the same
    horizontal circle of radius DEVICE_RADIUS, swung away from the projector
    by cam_proj_angle_deg about the vertical axis. Both aim at the object
    position.
    """
    target = np.asarray(OBJECT_POSITION)
    ang = np.radians(cam_proj_angle_deg)
    cam_pos = np.array(
        [DEVICE_RADIUS * np.sin(ang), -DEVICE_RADIUS * np.cos(ang), 0.0]
    )
    camera = PinholeDevice.from_fov(
        fov_deg, resolution, pose=look_at_pose(cam_pos, target)
    )
    projector = PinholeDevice.from_fov(
        fov_deg,
        pattern_resolution,
        pose=look_at_pose(np.asarray(PROJECTOR_POSITION), target),
    )
    return camera, projector


@dataclass(frozen=True)
class PoseSchedule:
    """Ordered (yaw_deg, roll_deg) object rotations, yaw-major."""

    entries: tuple[tuple[float, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> tuple[float, float]:
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)


def generate_pose_schedule(
    n_yaw: int = 12,
    yaw_step: float = 30.0,
    n_roll: int = 12,
    roll_step: float = 5.0,
) -> PoseSchedule:
    """Yaw-major grid of object rotations; defaults give the 144-pose sweep."""
    if n_yaw < 1 or n_roll < 1:
        raise ValueError("pose counts must be >= 1")
    if not (np.isfinite(yaw_step) and np.isfinite(roll_step)):
        raise ValueError("pose steps must be finite")
    entries = tuple(
        (i * yaw_step, j * roll_step) for i in range(n_yaw) for j in range(n_roll)
    )
    return PoseSchedule(entries)


def _axis_angle_matrix(axis: np.ndarray, angle_deg: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    a = np.radians(angle_deg)
    c, s = np.cos(a), np.sin(a)
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) * c + s * k + (1.0 - c) * np.outer(axis, axis)


def schedule_entry_pose(
    entry: tuple[float, float],
    camera: PinholeDevice,
    pivot=OBJECT_POSITION,
) -> RigidPose:
    """Object pose for one schedule entry.

    The object spins in place about the camera's y axis (yaw) and then its
    z axis (roll), both taken through the object pivot, which matches how
    the augmentation sweep is defined in the camera frame.
    """
    yaw_deg, roll_deg = entry
    pivot = np.asarray(pivot, dtype=np.float64)
    r_cam = camera.pose.rotation
    r = _axis_angle_matrix(r_cam[:, 2], roll_deg) @ _axis_angle_matrix(
        r_cam[:, 1], yaw_deg
    )
    return RigidPose(r, pivot - r @ pivot)


def transform_mesh(mesh: Mesh, pose: RigidPose) -> Mesh:
    """Mesh with `pose` applied to every vertex."""
    return replace(mesh, vertices=change_frame(pose, mesh.vertices))


def normalize_and_place(
    mesh: Mesh,
    max_dim: float = MAX_MODEL_DIM,
    position=OBJECT_POSITION,
) -> Mesh:
    """Scale the mesh so its largest bounding-box extent equals max_dim and
    center the bounding box at `position`."""
    if len(mesh.vertices) == 0 or len(mesh.triangles) == 0:
        raise MeshError("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if extent <= 0:
        raise MeshError("mesh has zero extent; all vertices coincide")
    scale = max_dim / extent
    center = (lo + hi) / 2.0
    verts = (mesh.vertices - center) * scale + np.asarray(position, dtype=np.float64)
    return replace(mesh, vertices=verts)


# ---------------------------------------------------------------------------
# Mesh file ingestion (STL binary/ASCII, OBJ)
# ---------------------------------------------------------------------------


def _drop_degenerate(
    vertices: np.ndarray, triangles: np.ndarray
) -> tuple[np.ndarray, int]:
    """Remove zero-area and repeated-index faces; returns (faces, n_dropped)."""
    if len(triangles) == 0:
        return triangles, 0
    tri = vertices[triangles]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    area2 = np.linalg.norm(cross, axis=1)
    span = float(np.abs(vertices).max()) if len(vertices) else 1.0
    tol = max(span, 1.0) ** 2 * 1e-14
    distinct = (
        (triangles[:, 0] != triangles[:, 1])
        & (triangles[:, 1] != triangles[:, 2])
        & (triangles[:, 0] != triangles[:, 2])
    )
    keep = (area2 > tol) & distinct
    return triangles[keep], int(len(triangles) - keep.sum())


def _load_stl_binary(data: bytes) -> np.ndarray:
    n = struct.unpack_from("<I", data, 80)[0]
    if len(data) != 84 + 50 * n:
        raise MeshError("malformed binary STL: size does not match facet count")
    rec = np.frombuffer(data, dtype=np.uint8, count=50 * n, offset=84)
    rec = rec.reshape(n, 50)
    floats = rec[:, :48].copy().view("<f4").reshape(n, 12).astype(np.float64)
    return floats[:, 3:12].reshape(n, 3, 3)  # skip the facet normal


def _load_stl_ascii(text: str) -> np.ndarray:
    coords = []
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 4 and parts[0].lower() == "vertex":
            try:
                coords.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as e:
                raise MeshError(f"malformed ASCII STL vertex line: {line!r}") from e
    if len(coords) % 3 != 0:
        raise MeshError("malformed ASCII STL: vertex count not a multiple of 3")
    return np.asarray(coords, dtype=np.float64).reshape(-1, 3, 3)


def _is_ascii_stl(data: bytes) -> bool:
    if not data.lstrip().lower().startswith(b"solid"):
        return False
    # Some binary exporters write "solid" into the 80-byte header; trust the
    # size check over the magic word.
    if len(data) >= 84:
        n = struct.unpack_from("<I", data, 80)[0]
        if len(data) == 84 + 50 * n:
            return False
    return b"facet" in data[:2048] or b"endsolid" in data


def _load_obj(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    verts: list[list[float]] = []
    colors: list[list[float]] = []
    faces: list[list[int]] = []
    for line in text.splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            vals = [float(p) for p in parts[1:]]
            if len(vals) < 3:
                raise MeshError(f"malformed OBJ vertex line: {line!r}")
            verts.append(vals[:3])
            # "v x y z r g b" vertex-color extension
            colors.append(vals[3:6] if len(vals) >= 6 else [])
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                head = tok.split("/")[0]
                if not head:
                    raise MeshError(f"malformed OBJ face token: {tok!r}")
                i = int(head)
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise MeshError(f"OBJ face with fewer than 3 vertices: {line!r}")
            # fan-triangulate polygons (quads and up)
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    vertices = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    triangles = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    albedo = None
    if colors and all(len(c) == 3 for c in colors):
        rgb = np.asarray(colors, dtype=np.float64)
        # Rec. 709 luminance as scalar diffuse albedo
        albedo = np.clip(rgb @ np.array([0.2126, 0.7152, 0.0722]), 0.0, 1.0)
    return vertices, triangles, albedo


def _soup_to_mesh(corners: np.ndarray) -> Mesh:
    vertices = corners.reshape(-1, 3)
    triangles = np.arange(len(vertices), dtype=np.int64).reshape(-1, 3)
    triangles, dropped = _drop_degenerate(vertices, triangles)
    if len(triangles) == 0:
        raise MeshError("no valid triangles after dropping degenerate faces")
    return Mesh(vertices, triangles, n_degenerate_dropped=dropped)


def load_mesh(path) -> Mesh:
    """Load an STL (binary or ASCII) or OBJ file as a triangulated Mesh.

    Degenerate faces are dropped and counted on the returned mesh.
    """
    path = Path(path)
    if not path.is_file():
        raise MeshError(f"mesh file not found: {path}")
    data = path.read_bytes()
    suffix = path.suffix.lower()
    if suffix == ".obj":
        vertices, triangles, albedo = _load_obj(data.decode("utf-8", "replace"))
        if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError(f"OBJ face index out of range in {path}")
        triangles, dropped = _drop_degenerate(vertices, triangles)
        if len(triangles) == 0:
            raise MeshError(f"no valid triangles in {path}")
        return Mesh(vertices, triangles, albedo, n_degenerate_dropped=dropped)
    if suffix == ".stl":
        if _is_ascii_stl(data):
            corners = _load_stl_ascii(data.decode("ascii", "replace"))
        else:
            if len(data) < 84:
                raise MeshError(f"malformed STL header in {path}")
            corners = _load_stl_binary(data)
        if len(corners) == 0:
            raise MeshError(f"no facets in {path}")
        return _soup_to_mesh(corners)
    raise MeshError(f"unsupported mesh format {suffix!r} for {path}")
