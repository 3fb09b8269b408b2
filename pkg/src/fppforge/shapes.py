"""Procedural meshes and mesh writers for tests, demos, and toy datasets."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .scene import Mesh, PinholeDevice

_BOX_FACES = (
    # cyclic corner quads, split into two triangles each
    (0, 1, 3, 2),  # -x
    (4, 6, 7, 5),  # +x
    (0, 4, 5, 1),  # -y
    (2, 3, 7, 6),  # +y
    (0, 2, 6, 4),  # -z
    (1, 5, 7, 3),  # +z
)


def make_box(size=1.0, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Axis-aligned box; 12 triangles."""
    s = np.broadcast_to(np.asarray(size, dtype=np.float64), (3,)) / 2.0
    c = np.asarray(center, dtype=np.float64)
    # corner index bits: 2 = x, 1 = y, 0 = z
    corners = np.array(
        [
            [x, y, z]
            for x in (-s[0], s[0])
            for y in (-s[1], s[1])
            for z in (-s[2], s[2])
        ]
    ) + c
    verts: list[np.ndarray] = []
    tris: list[list[int]] = []
    for quad in _BOX_FACES:
        base = len(verts)
        verts.extend(corners[i] for i in quad)
        tris.append([base, base + 1, base + 2])
        tris.append([base, base + 2, base + 3])
    return Mesh(np.asarray(verts), np.asarray(tris, dtype=np.int64))


def make_uv_sphere(
    radius=1.0, center=(0.0, 0.0, 0.0), n_lat: int = 96, n_lon: int = 192
) -> Mesh:
    """Latitude-longitude sphere tessellation."""
    lat = np.linspace(0.0, np.pi, n_lat + 1)
    lon = np.linspace(0.0, 2.0 * np.pi, n_lon, endpoint=False)
    verts = [np.array([0.0, 0.0, radius]), np.array([0.0, 0.0, -radius])]
    ring_index = {}
    for i in range(1, n_lat):
        for j in range(n_lon):
            ring_index[(i, j)] = len(verts)
            verts.append(
                radius
                * np.array(
                    [
                        np.sin(lat[i]) * np.cos(lon[j]),
                        np.sin(lat[i]) * np.sin(lon[j]),
                        np.cos(lat[i]),
                    ]
                )
            )
    tris = []
    for j in range(n_lon):
        jn = (j + 1) % n_lon
        tris.append([0, ring_index[(1, j)], ring_index[(1, jn)]])
        tris.append([1, ring_index[(n_lat - 1, jn)], ring_index[(n_lat - 1, j)]])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            jn = (j + 1) % n_lon
            a = ring_index[(i, j)]
            b = ring_index[(i, jn)]
            c = ring_index[(i + 1, j)]
            d = ring_index[(i + 1, jn)]
            tris.append([a, b, c])
            tris.append([b, d, c])
    verts = np.asarray(verts) + np.asarray(center, dtype=np.float64)
    return Mesh(verts, np.asarray(tris, dtype=np.int64))


def make_bumpy_sphere(seed: int, radius=1.0, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Sphere with a few seeded sinusoidal radial bumps; a cheap stand-in
    for varied scan targets in toy datasets."""
    base = make_uv_sphere(1.0, (0.0, 0.0, 0.0), n_lat=48, n_lon=96)
    rng = np.random.default_rng(seed)
    v = base.vertices
    r = np.ones(len(v))
    for _ in range(4):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        freq = rng.uniform(2.0, 5.0)
        amp = rng.uniform(0.03, 0.12)
        r += amp * np.sin(freq * (v @ axis))
    verts = v * (radius * r[:, None]) + np.asarray(center, dtype=np.float64)
    return Mesh(verts, base.triangles)


def make_plane_facing(
    camera: PinholeDevice, distance: float, half_extent: float
) -> Mesh:
    """Square quad perpendicular to the camera's optical axis at `distance`.

    Useful as the flat reference target: every camera ray that hits it has
    camera-space depth exactly `distance`.
    """
    r = camera.pose.rotation
    c = camera.pose.translation + distance * r[:, 2]
    x, y = r[:, 0] * half_extent, r[:, 1] * half_extent
    verts = np.array([c - x - y, c + x - y, c + x + y, c - x + y])
    tris = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    return Mesh(verts, tris)


def save_stl_binary(mesh: Mesh, path) -> None:
    tri = mesh.triangle_corners().astype("<f4")
    n = len(tri)
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    normals = np.cross(e1, e2)
    lens = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.divide(normals, lens, out=np.zeros_like(normals), where=lens > 0)
    rec = np.zeros(n, dtype=[("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    rec["n"] = normals
    rec["v"] = tri
    Path(path).write_bytes(b"\0" * 80 + struct.pack("<I", n) + rec.tobytes())


def save_stl_ascii(mesh: Mesh, path) -> None:
    tri = mesh.triangle_corners()
    lines = ["solid mesh"]
    for t in tri:
        n = np.cross(t[1] - t[0], t[2] - t[0])
        ln = np.linalg.norm(n)
        n = n / ln if ln > 0 else n
        lines.append(f"  facet normal {n[0]:.9e} {n[1]:.9e} {n[2]:.9e}")
        lines.append("    outer loop")
        for v in t:
            lines.append(f"      vertex {v[0]:.9e} {v[1]:.9e} {v[2]:.9e}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append("endsolid mesh")
    Path(path).write_text("\n".join(lines) + "\n")


def save_obj(mesh: Mesh, path, with_colors: bool = False) -> None:
    lines = []
    for i, v in enumerate(mesh.vertices):
        if with_colors:
            a = mesh.albedo[i]
            lines.append(
                f"v {v[0]:.9e} {v[1]:.9e} {v[2]:.9e} {a:.6f} {a:.6f} {a:.6f}"
            )
        else:
            lines.append(f"v {v[0]:.9e} {v[1]:.9e} {v[2]:.9e}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    Path(path).write_text("\n".join(lines) + "\n")
