import struct

import numpy as np
import pytest

from fppforge.scene import (
    Mesh,
    MeshError,
    PinholeDevice,
    RigidPose,
    build_rig,
    change_frame,
    generate_pose_schedule,
    load_mesh,
    look_at_pose,
    normalize_and_place,
    project_point,
    schedule_entry_pose,
    transform_mesh,
    unproject_pixel,
)
from fppforge.shapes import make_box, make_uv_sphere, save_obj, save_stl_ascii, save_stl_binary


# --- independent oracle: a minimal standalone STL facet counter -------------


def count_stl_facets(path) -> int:
    """Tiny self-contained STL facet counter used as a parsing oracle."""
    data = open(path, "rb").read()
    if data.lstrip().lower().startswith(b"solid") and b"endsolid" in data:
        n = struct.unpack_from("<I", data, 80)[0] if len(data) >= 84 else -1
        if len(data) != 84 + 50 * n:  # genuinely ASCII
            return sum(
                1
                for line in data.decode("ascii", "replace").splitlines()
                if line.strip().lower().startswith("facet normal")
            )
    return struct.unpack_from("<I", data, 80)[0]


ASCII_CUBE = None  # built lazily below


def _ascii_cube_text() -> str:
    # hand-rolled 12-facet unit cube, one facet block per triangle
    c = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    quads = [
        (0, 1, 3, 2),
        (4, 6, 7, 5),
        (0, 4, 5, 1),
        (2, 3, 7, 6),
        (0, 2, 6, 4),
        (1, 5, 7, 3),
    ]
    lines = ["solid cube"]
    for a, b, d, e in quads:
        for tri in ((a, b, d), (a, d, e)):
            lines.append("  facet normal 0 0 0")
            lines.append("    outer loop")
            for i in tri:
                lines.append(f"      vertex {c[i][0]} {c[i][1]} {c[i][2]}")
            lines.append("    endloop")
            lines.append("  endfacet")
    lines.append("endsolid cube")
    return "\n".join(lines)


class TestLoadMesh:
    def test_ascii_stl_cube_has_12_triangles(self, tmp_path):
        p = tmp_path / "cube.stl"
        p.write_text(_ascii_cube_text())
        mesh = load_mesh(p)
        assert mesh.n_triangles == 12
        assert count_stl_facets(p) == 12

    def test_obj_quad_fan_triangulates(self, tmp_path):
        p = tmp_path / "quad.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        mesh = load_mesh(p)
        assert mesh.n_triangles == 2

    def test_binary_stl_matches_independent_counter(self, tmp_path):
        # synthetic binary STL written with struct only (not our writer)
        rng = np.random.default_rng(7)
        n = 57
        body = b"binary header".ljust(80, b"\0") + struct.pack("<I", n)
        for _ in range(n):
            tri = rng.normal(size=(3, 3))
            body += struct.pack("<3f", 0, 0, 0)
            for v in tri:
                body += struct.pack("<3f", *v)
            body += struct.pack("<H", 0)
        p = tmp_path / "soup.stl"
        p.write_bytes(body)
        mesh = load_mesh(p)
        assert mesh.n_triangles == count_stl_facets(p) == n

    def test_binary_stl_starting_with_solid(self, tmp_path):
        # exporters sometimes write 'solid' into the binary header
        body = b"solid not really ascii".ljust(80, b"\0") + struct.pack("<I", 1)
        body += struct.pack("<12f", 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0)
        body += struct.pack("<H", 0)
        p = tmp_path / "tricky.stl"
        p.write_bytes(body)
        assert load_mesh(p).n_triangles == 1

    def test_degenerate_faces_dropped_and_counted(self, tmp_path):
        p = tmp_path / "degen.obj"
        p.write_text(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\n"
            "f 1 2 3\nf 1 2 2\nf 1 2 4\n"  # valid, repeated index, collinear
        )
        mesh = load_mesh(p)
        assert mesh.n_triangles == 1
        assert mesh.n_degenerate_dropped == 2

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(MeshError, match="not found"):
            load_mesh(tmp_path / "nope.stl")

    def test_writers_round_trip(self, tmp_path):
        mesh = make_box(1.0)
        for name, saver in [
            ("b.stl", save_stl_binary),
            ("a.stl", save_stl_ascii),
            ("m.obj", save_obj),
        ]:
            saver(mesh, tmp_path / name)
            loaded = load_mesh(tmp_path / name)
            assert loaded.n_triangles == 12

    def test_obj_vertex_colors_become_albedo(self, tmp_path):
        p = tmp_path / "col.obj"
        p.write_text(
            "v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nf 1 2 3\n"
        )
        mesh = load_mesh(p)
        lum = np.array([0.2126, 0.7152, 0.0722])
        assert np.allclose(mesh.albedo, lum)


class TestNormalizeAndPlace:
    def test_unit_cube_to_standard_placement(self):
        mesh = normalize_and_place(make_box(1.0))
        lo, hi = mesh.bounds()
        assert np.allclose(hi - lo, 0.14, atol=1e-12)
        assert np.allclose((lo + hi) / 2, [0, 0, -0.02], atol=1e-12)

    def test_idempotent_on_conforming_mesh(self):
        mesh = normalize_and_place(make_box(1.0))
        again = normalize_and_place(mesh)
        assert np.allclose(again.vertices, mesh.vertices, atol=1e-9)

    def test_sphere_extent_by_brute_force_pairwise_distance(self):
        mesh = normalize_and_place(make_uv_sphere(3.0, n_lat=16, n_lon=32))
        v = mesh.vertices
        # brute-force max pairwise distance as the independent extent check
        d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
        assert abs(np.sqrt(d2.max()) - 0.14) < 1e-9

    def test_zero_extent_rejected(self):
        mesh = Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]]))
        with pytest.raises(MeshError, match="extent"):
            normalize_and_place(mesh)


class TestPoseSchedule:
    def test_default_has_144_entries(self):
        assert len(generate_pose_schedule()) == 144

    def test_entry_zero_is_identity_rotation(self):
        assert generate_pose_schedule()[0] == (0.0, 0.0)

    def test_entry_13_by_hand_enumeration(self):
        # independent enumeration of the yaw-major 12x12 grid
        flat = [(y * 30.0, r * 5.0) for y in range(12) for r in range(12)]
        schedule = generate_pose_schedule()
        assert schedule[13] == flat[13] == (30.0, 5.0)

    def test_yaw_and_roll_value_sets(self):
        entries = np.array(generate_pose_schedule().entries)
        assert set(entries[:, 0]) == {30.0 * i for i in range(12)}
        assert set(entries[:, 1]) == {5.0 * i for i in range(12)}

    def test_invalid_counts_rejected(self):
        with pytest.raises(ValueError):
            generate_pose_schedule(n_yaw=0)

    def test_poses_are_rigid_for_whole_schedule(self):
        camera, _ = build_rig(15.0)
        mesh = normalize_and_place(make_box((0.04, 0.09, 0.14)))
        v = mesh.vertices
        idx = np.random.default_rng(0).choice(len(v), size=(60, 2))
        ref = np.linalg.norm(v[idx[:, 0]] - v[idx[:, 1]], axis=1)
        for entry in generate_pose_schedule():
            pose = schedule_entry_pose(entry, camera)
            moved = transform_mesh(mesh, pose)
            assert len(moved.vertices) == len(v)
            dist = np.linalg.norm(
                moved.vertices[idx[:, 0]] - moved.vertices[idx[:, 1]], axis=1
            )
            assert np.allclose(dist, ref, atol=1e-9)


class TestPinhole:
    def test_on_axis_point_projects_to_center(self):
        dev = PinholeDevice((1000.0, 1000.0), (512.0, 512.0), (1024, 1024))
        for z in (0.1, 1.0, 30.0):
            assert project_point(dev, (0, 0, z)) == (512.0, 512.0)

    def test_projective_scale_invariance(self):
        dev = PinholeDevice((800.0, 700.0), (320.0, 240.0), (640, 480))
        a = project_point(dev, (0.2, -0.1, 2.0))
        b = project_point(dev, (0.4, -0.2, 4.0))
        assert a == b

    def test_hand_computed_pixel(self):
        # fx = fy = 1000, c = (512, 512), X/Z = 0.1, Y/Z = 0.05
        dev = PinholeDevice((1000.0, 1000.0), (512.0, 512.0), (1024, 1024))
        assert project_point(dev, (0.1, 0.05, 1.0)) == (612.0, 562.0)

    def test_point_behind_camera_rejected(self):
        dev = PinholeDevice((1000.0, 1000.0), (512.0, 512.0), (1024, 1024))
        with pytest.raises(ValueError):
            project_point(dev, (0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            project_point(dev, (0.1, 0.1, -1.0))

    def test_project_unproject_identity(self, rng):
        dev = PinholeDevice.from_fov(7.0, (512, 512))
        for _ in range(50):
            px = rng.uniform(0, 511, size=2)
            depth = rng.uniform(0.5, 3.0)
            point = unproject_pixel(dev, px, depth)
            back = project_point(dev, point)
            assert np.allclose(back, px, atol=1e-6)

    def test_invalid_intrinsics_rejected(self):
        with pytest.raises(ValueError):
            PinholeDevice((0.0, 100.0), (10.0, 10.0), (64, 64))
        with pytest.raises(ValueError):
            PinholeDevice((100.0, 100.0), (100.0, 10.0), (64, 64))


class TestRigidPose:
    def test_identity_leaves_points(self, rng):
        p = rng.normal(size=3)
        assert np.allclose(change_frame(RigidPose.identity(), p), p)

    def test_round_trip(self, rng):
        pose = look_at_pose(rng.normal(size=3), rng.normal(size=3))
        pose = RigidPose(pose.rotation, rng.normal(size=3))
        p = rng.normal(size=3)
        back = change_frame(pose.inverse(), change_frame(pose, p))
        assert np.allclose(back, p, atol=1e-12)

    def test_quarter_turn_about_z(self):
        r = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        pose = RigidPose(r, np.zeros(3))
        assert np.allclose(change_frame(pose, [1, 0, 0]), [0, 1, 0], atol=1e-15)

    def test_composition_associativity(self, rng):
        def random_pose():
            p = look_at_pose(rng.normal(size=3), rng.normal(size=3))
            return RigidPose(p.rotation, rng.normal(size=3))

        a, b = random_pose(), random_pose()
        p = rng.normal(size=(20, 3))
        composed = change_frame(a.compose(b), p)
        chained = change_frame(a, change_frame(b, p))
        assert np.allclose(composed, chained, atol=1e-12)

    def test_non_orthonormal_rejected(self):
        with pytest.raises(ValueError):
            RigidPose(np.eye(3) * 2.0, np.zeros(3))


class TestRig:
    def test_devices_aim_at_object(self):
        camera, projector = build_rig(15.0)
        target = np.array([0.0, 0.0, -0.02])
        for dev in (camera, projector):
            axis = dev.pose.rotation[:, 2]
            to_target = target - dev.pose.translation
            to_target /= np.linalg.norm(to_target)
            assert np.allclose(axis, to_target, atol=1e-12)

    def test_camera_projector_separation_angle(self):
        camera, projector = build_rig(17.5)
        a = camera.pose.translation
        b = projector.pose.translation
        cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
        assert abs(np.degrees(np.arccos(cos)) - 17.5) < 1e-9
