"""Numba kernels for BVH ray casting and fringe/depth shading.

Everything here is deterministic: one thread per render, fixed traversal
order, IEEE float64 arithmetic. Callers hold the arrays immutable for the
duration of a render.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_LEAF_SIZE = 4
_SHADOW_EPS = 1e-5  # fraction of the surface-to-projector segment
_TRI_EPS = 1e-12
# barycentric slack so shared edges stay watertight under roundoff
_BARY_EPS = 1e-9


def build_bvh(tri: np.ndarray):
    """Median-split BVH over (m, 3, 3) triangle corners.

    Returns (node_min, node_max, node_left, node_right, node_count, order):
    node_count > 0 marks a leaf holding order[left : left + count]; internal
    nodes store child indices in (left, right).
    """
    m = len(tri)
    if m == 0:
        z3 = np.zeros((0, 3), dtype=np.float64)
        zi = np.zeros(0, dtype=np.int64)
        return z3, z3, zi, zi, zi, zi

    lo = tri.min(axis=1)
    hi = tri.max(axis=1)
    centroid = tri.mean(axis=1)

    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    node_left: list[int] = []
    node_right: list[int] = []
    node_count: list[int] = []
    order: list[int] = []

    def new_node() -> int:
        node_min.append(np.zeros(3))
        node_max.append(np.zeros(3))
        node_left.append(0)
        node_right.append(0)
        node_count.append(0)
        return len(node_count) - 1

    root = new_node()
    stack = [(root, np.arange(m, dtype=np.int64))]
    while stack:
        idx, items = stack.pop()
        node_min[idx] = lo[items].min(axis=0)
        node_max[idx] = hi[items].max(axis=0)
        if len(items) <= _LEAF_SIZE:
            node_left[idx] = len(order)
            node_count[idx] = len(items)
            order.extend(items.tolist())
            continue
        c = centroid[items]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        sorted_items = items[np.argsort(c[:, axis], kind="stable")]
        half = len(sorted_items) // 2
        li, ri = new_node(), new_node()
        node_left[idx] = li
        node_right[idx] = ri
        stack.append((ri, sorted_items[half:]))
        stack.append((li, sorted_items[:half]))

    return (
        np.ascontiguousarray(node_min, dtype=np.float64),
        np.ascontiguousarray(node_max, dtype=np.float64),
        np.asarray(node_left, dtype=np.int64),
        np.asarray(node_right, dtype=np.int64),
        np.asarray(node_count, dtype=np.int64),
        np.asarray(order, dtype=np.int64),
    )


@njit(cache=True, nogil=True, error_model="numpy")
def _ray_box(ox, oy, oz, ix, iy, iz, bmin, bmax, tmax):
    t0 = (bmin[0] - ox) * ix
    t1 = (bmax[0] - ox) * ix
    if t0 > t1:
        t0, t1 = t1, t0
    t2 = (bmin[1] - oy) * iy
    t3 = (bmax[1] - oy) * iy
    if t2 > t3:
        t2, t3 = t3, t2
    if t2 > t0:
        t0 = t2
    if t3 < t1:
        t1 = t3
    t4 = (bmin[2] - oz) * iz
    t5 = (bmax[2] - oz) * iz
    if t4 > t5:
        t4, t5 = t5, t4
    if t4 > t0:
        t0 = t4
    if t5 < t1:
        t1 = t5
    return t1 >= t0 and t0 <= tmax and t1 >= 0.0


@njit(cache=True, nogil=True, error_model="numpy")
def _ray_triangle(ox, oy, oz, dx, dy, dz, v0, v1, v2):
    """Moller-Trumbore, two-sided. Returns (t, u, v) with t < 0 on miss."""
    e1x = v1[0] - v0[0]
    e1y = v1[1] - v0[1]
    e1z = v1[2] - v0[2]
    e2x = v2[0] - v0[0]
    e2y = v2[1] - v0[1]
    e2z = v2[2] - v0[2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -_TRI_EPS < det < _TRI_EPS:
        return -1.0, 0.0, 0.0
    inv = 1.0 / det
    tx = ox - v0[0]
    ty = oy - v0[1]
    tz = oz - v0[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -_BARY_EPS or u > 1.0 + _BARY_EPS:
        return -1.0, 0.0, 0.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -_BARY_EPS or u + v > 1.0 + _BARY_EPS:
        return -1.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return t, u, v


@njit(cache=True, nogil=True, error_model="numpy")
def _trace(
    ox,
    oy,
    oz,
    dx,
    dy,
    dz,
    tri,
    node_min,
    node_max,
    node_left,
    node_right,
    node_count,
    order,
    t_min,
    t_max,
    any_hit,
):
    """Closest (or any) BVH hit in (t_min, t_max); returns (t, tri_idx, u, v)."""
    best_t = t_max
    best_i = -1
    best_u = 0.0
    best_v = 0.0
    if len(node_count) == 0:
        return -1.0, -1, 0.0, 0.0
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    stack = np.empty(128, dtype=np.int64)
    top = 0
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        n = stack[top]
        if not _ray_box(ox, oy, oz, ix, iy, iz, node_min[n], node_max[n], best_t):
            continue
        if node_count[n] > 0:
            for k in range(node_left[n], node_left[n] + node_count[n]):
                i = order[k]
                t, u, v = _ray_triangle(
                    ox, oy, oz, dx, dy, dz, tri[i, 0], tri[i, 1], tri[i, 2]
                )
                if t_min < t < best_t:
                    best_t = t
                    best_i = i
                    best_u = u
                    best_v = v
                    if any_hit:
                        return best_t, best_i, best_u, best_v
        else:
            stack[top] = node_left[n]
            top += 1
            stack[top] = node_right[n]
            top += 1
    if best_i < 0:
        return -1.0, -1, 0.0, 0.0
    return best_t, best_i, best_u, best_v


@njit(cache=True, nogil=True, error_model="numpy")
def _sample_pattern(pattern, u, v):
    """Bilinear lookup matching fringe.sample_pattern (corner-aligned, dark
    outside the unit square)."""
    hp, wp = pattern.shape
    if u < 0.0 or u > 1.0 or v < 0.0 or v > 1.0:
        return 0.0
    x = u * (wp - 1)
    y = v * (hp - 1)
    x0 = int(x)
    y0 = int(y)
    if x0 > wp - 2:
        x0 = wp - 2
    if y0 > hp - 2:
        y0 = hp - 2
    fx = x - x0
    fy = y - y0
    return (
        pattern[y0, x0] * (1.0 - fx) * (1.0 - fy)
        + pattern[y0, x0 + 1] * fx * (1.0 - fy)
        + pattern[y0 + 1, x0] * (1.0 - fx) * fy
        + pattern[y0 + 1, x0 + 1] * fx * fy
    )


@njit(cache=True, nogil=True, error_model="numpy")
def render_kernel(
    width,
    height,
    cam_r,
    cam_t,
    fx,
    fy,
    cx,
    cy,
    tri,
    tri_albedo,
    node_min,
    node_max,
    node_left,
    node_right,
    node_count,
    order,
    wall_y,
    wall_albedo,
    proj_r,
    proj_t,
    uv_scale,
    uv_cos,
    uv_sin,
    pattern,
    power_norm,
    ambient_term,
    inv_square,
    falloff_ref,
    shade,
):
    """One deterministic pass: returns (fringe, depth) float64 rasters.

    Camera rays use the unnormalized direction (xi, eta, 1) in the camera
    frame so the hit parameter t equals camera-space depth directly. The
    wall is an analytic plane at y = wall_y shaded by the ambient term only;
    mesh hits get the Lambertian projector term plus ambient.
    """
    fringe = np.zeros((height, width), dtype=np.float64)
    depth = np.zeros((height, width), dtype=np.float64)
    for py in range(height):
        for px in range(width):
            xi = (px - cx) / fx
            eta = (py - cy) / fy
            dx = cam_r[0, 0] * xi + cam_r[0, 1] * eta + cam_r[0, 2]
            dy = cam_r[1, 0] * xi + cam_r[1, 1] * eta + cam_r[1, 2]
            dz = cam_r[2, 0] * xi + cam_r[2, 1] * eta + cam_r[2, 2]
            ox, oy, oz = cam_t[0], cam_t[1], cam_t[2]

            t_wall = np.inf
            if dy > 1e-300:
                tw = (wall_y - oy) / dy
                if tw > 0.0:
                    t_wall = tw
            t_hit, tri_i, bu, bv = _trace(
                ox,
                oy,
                oz,
                dx,
                dy,
                dz,
                tri,
                node_min,
                node_max,
                node_left,
                node_right,
                node_count,
                order,
                1e-9,
                t_wall,
                False,
            )
            on_mesh = tri_i >= 0
            t = t_hit if on_mesh else t_wall
            depth[py, px] = t
            if not shade:
                continue

            if not on_mesh:
                fringe[py, px] = ambient_term * wall_albedo
                continue

            hx = ox + t * dx
            hy = oy + t * dy
            hz = oz + t * dz
            v0 = tri[tri_i, 0]
            v1 = tri[tri_i, 1]
            v2 = tri[tri_i, 2]
            nx = (v1[1] - v0[1]) * (v2[2] - v0[2]) - (v1[2] - v0[2]) * (v2[1] - v0[1])
            ny = (v1[2] - v0[2]) * (v2[0] - v0[0]) - (v1[0] - v0[0]) * (v2[2] - v0[2])
            nz = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0])
            nn = (nx * nx + ny * ny + nz * nz) ** 0.5
            nx /= nn
            ny /= nn
            nz /= nn
            if nx * dx + ny * dy + nz * dz > 0.0:
                nx, ny, nz = -nx, -ny, -nz

            # delta form reproduces constant per-vertex albedo exactly
            a0 = tri_albedo[tri_i, 0]
            albedo = (
                a0
                + bu * (tri_albedo[tri_i, 1] - a0)
                + bv * (tri_albedo[tri_i, 2] - a0)
            )
            val = ambient_term * albedo

            lx = proj_t[0] - hx
            ly = proj_t[1] - hy
            lz = proj_t[2] - hz
            dist = (lx * lx + ly * ly + lz * lz) ** 0.5
            ndotl = (nx * lx + ny * ly + nz * lz) / dist
            if ndotl > 0.0:
                st, _si, _su, _sv = _trace(
                    hx,
                    hy,
                    hz,
                    lx,
                    ly,
                    lz,
                    tri,
                    node_min,
                    node_max,
                    node_left,
                    node_right,
                    node_count,
                    order,
                    _SHADOW_EPS,
                    1.0 - _SHADOW_EPS,
                    True,
                )
                if st < 0.0:  # unoccluded
                    # projector-frame direction ratios for the texture lookup
                    qx = (
                        proj_r[0, 0] * lx + proj_r[1, 0] * ly + proj_r[2, 0] * lz
                    ) * -1.0
                    qy = (
                        proj_r[0, 1] * lx + proj_r[1, 1] * ly + proj_r[2, 1] * lz
                    ) * -1.0
                    qz = (
                        proj_r[0, 2] * lx + proj_r[1, 2] * ly + proj_r[2, 2] * lz
                    ) * -1.0
                    if qz > 0.0:
                        a = qx / qz
                        b = qy / qz
                        u = (a * uv_cos - b * uv_sin) * uv_scale + 0.5
                        v = (a * uv_sin + b * uv_cos) * uv_scale + 0.5
                        pat = _sample_pattern(pattern, u, v)
                        fall = 1.0
                        if inv_square:
                            fall = (falloff_ref / dist) ** 2
                        val += albedo * ndotl * power_norm * pat * fall
            fringe[py, px] = val
    return fringe, depth
