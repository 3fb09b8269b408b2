import json

import numpy as np
import pytest

from fppforge.datasetgen import (
    DatasetManifest,
    ParamRanges,
    Recipe,
    RECIPES,
    assign_groups,
    build_dataset,
    get_recipe,
    sample_group_params,
    sample_param_values,
    split_train_test,
)
from fppforge.render import ImagePair, render_pair
from fppforge.scene import generate_pose_schedule
from fppforge.shapes import make_box, make_uv_sphere, save_stl_binary

TINY_SCENE = {
    "resolution": (24, 24),
    "pattern_resolution": (128, 128),
    "frequency": 4.0,
    "noise_sigma": 0.003,
}
MINI_SCHEDULE = generate_pose_schedule(2, 30.0, 2, 5.0)


@pytest.fixture()
def two_models(tmp_path):
    d = tmp_path / "models"
    d.mkdir()
    save_stl_binary(make_box(1.0), d / "boxy.stl")
    save_stl_binary(make_uv_sphere(1.0, n_lat=12, n_lon=24), d / "bally.stl")
    return sorted(d.glob("*.stl"))


class TestAssignGroups:
    def test_624_models_into_13_groups_of_48(self):
        ids = [f"m{i:04d}" for i in range(624)]
        groups = assign_groups(ids, 13, seed=5)
        sizes = np.bincount(list(groups.values()), minlength=13)
        assert sizes.tolist() == [48] * 13

    def test_single_group(self):
        groups = assign_groups(["a", "b", "c"], 1, seed=0)
        assert set(groups.values()) == {0}

    def test_deterministic_for_seed(self):
        ids = [f"m{i}" for i in range(37)]
        assert assign_groups(ids, 5, seed=9) == assign_groups(ids, 5, seed=9)
        assert assign_groups(ids, 5, seed=9) != assign_groups(ids, 5, seed=10)

    def test_near_even_sizes(self):
        groups = assign_groups([f"m{i}" for i in range(23)], 5, seed=1)
        sizes = np.bincount(list(groups.values()), minlength=5)
        assert sizes.max() - sizes.min() <= 1
        assert sizes.sum() == 23

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            assign_groups([], 3, seed=0)


class TestRecipes:
    def test_registry_matches_declared_structure(self):
        assert RECIPES["D1"].varying == ()
        assert RECIPES["D2"].varying == (
            "period",
            "fringe_rotation_deg",
            "cam_proj_angle_deg",
        )
        assert len(RECIPES["D3"].varying) == 6
        assert RECIPES["D4"].varying == RECIPES["D3"].varying
        assert RECIPES["D4"].extra_groups == 8
        for r in RECIPES.values():
            assert r.n_groups == 13

    def test_default_ranges_are_the_declared_table(self):
        r = ParamRanges()
        assert r.period == (4.4, 6.6)
        assert r.fringe_rotation_deg == (-5.0, 5.0)
        assert r.cam_proj_angle_deg == (10.0, 20.0)
        assert r.projector_power == (20.0, 55.0)
        assert r.ambient == (0.0, 1.0)
        assert r.env_rotation_deg == (0.0, 360.0)

    def test_unknown_recipe_rejected(self):
        with pytest.raises(ValueError, match="unknown recipe"):
            get_recipe("D9")

    def test_bad_range_rejected(self):
        with pytest.raises(ValueError):
            ParamRanges(period=(6.6, 4.4))


class TestSampleGroupParams:
    def test_d1_groups_share_one_template(self):
        ranges = ParamRanges()
        templates = [
            sample_group_params(RECIPES["D1"], ranges, g, seed=3, scene_defaults=TINY_SCENE)
            for g in range(13)
        ]
        first = templates[0]
        for t in templates[1:]:
            assert t.fringe == first.fringe
            assert t.cam_proj_angle_deg == first.cam_proj_angle_deg
            assert t.projector_power == first.projector_power
            assert t.ambient == first.ambient
            assert t.env_rotation_deg == first.env_rotation_deg

    def test_d3_values_stay_in_ranges(self):
        ranges = ParamRanges()
        for g in range(13):
            vals = sample_param_values(RECIPES["D3"], ranges, g, seed=7)
            for name, v in vals.items():
                lo, hi = getattr(ranges, name)
                assert lo <= v <= hi

    def test_d2_varies_first_three_only(self):
        ranges = ParamRanges()
        vals = [sample_param_values(RECIPES["D2"], ranges, g, seed=1) for g in range(6)]
        for name in ("period", "fringe_rotation_deg", "cam_proj_angle_deg"):
            assert len({v[name] for v in vals}) > 1
        for name in ("projector_power", "ambient", "env_rotation_deg"):
            assert {v[name] for v in vals} == {ParamRanges().midpoint(name)}


class TestSplit:
    def _manifest_for(self, n_models):
        from fppforge.datasetgen import ManifestEntry

        entries = [
            ManifestEntry(f"m{i:04d}", 0, p, 0.0, 0.0, "", "x.png", "x.exr")
            for i in range(n_models)
            for p in range(3)
        ]
        return DatasetManifest("D1", 0, [(0.0, 0.0)], {}, {}, entries)

    def test_624_models_split_530_train_94_test(self):
        out = split_train_test(self._manifest_for(624), seed=2)
        train = {e.model_id for e in out.entries if e.split == "train"}
        test = {e.model_id for e in out.entries if e.split == "test"}
        assert len(train) == 530 and len(test) == 94
        assert not train & test

    def test_every_pose_of_a_model_shares_its_split(self):
        out = split_train_test(self._manifest_for(10), seed=4)
        by_model = {}
        for e in out.entries:
            by_model.setdefault(e.model_id, set()).add(e.split)
        assert all(len(s) == 1 for s in by_model.values())

    def test_two_models_split_one_one(self):
        out = split_train_test(self._manifest_for(2), seed=0)
        assert {e.split for e in out.entries} == {"train", "test"}

    def test_single_model_rejected(self):
        with pytest.raises(ValueError):
            split_train_test(self._manifest_for(1), seed=0)


class TestBuildDataset:
    @pytest.mark.usefixtures("warm_kernels")
    def test_mini_build_files_match_manifest(self, two_models, tmp_path):
        out = tmp_path / "ds"
        manifest = build_dataset(
            two_models,
            "D3",
            out_dir=out,
            seed=11,
            schedule=MINI_SCHEDULE,
            scene_defaults=TINY_SCENE,
        )
        assert len(manifest.entries) == 8  # 2 models x 2x2 poses
        import hashlib

        for e in manifest.entries:
            fr = out / e.fringe_path
            dp = out / e.depth_path
            assert fr.is_file() and dp.is_file()
            assert hashlib.sha256(fr.read_bytes()).hexdigest() == e.fringe_sha256
            assert hashlib.sha256(dp.read_bytes()).hexdigest() == e.depth_sha256
        assert (out / "manifest.json").is_file()

    @pytest.mark.usefixtures("warm_kernels")
    def test_rebuild_same_seed_identical_manifest_bytes(self, two_models, tmp_path):
        a = build_dataset(
            two_models, "D3", out_dir=tmp_path / "a", seed=7,
            schedule=MINI_SCHEDULE, scene_defaults=TINY_SCENE,
        )
        b = build_dataset(
            two_models, "D3", out_dir=tmp_path / "b", seed=7,
            schedule=MINI_SCHEDULE, scene_defaults=TINY_SCENE,
        )
        assert a.to_json() == b.to_json()

    @pytest.mark.usefixtures("warm_kernels")
    def test_workers_do_not_change_output(self, two_models, tmp_path):
        outputs = []
        for workers in (1, 4):
            out = tmp_path / f"w{workers}"
            m = build_dataset(
                two_models, "D3", out_dir=out, seed=3, workers=workers,
                schedule=MINI_SCHEDULE, scene_defaults=TINY_SCENE,
            )
            outputs.append(m.to_json())
        assert outputs[0] == outputs[1]

    @pytest.mark.usefixtures("warm_kernels")
    def test_resume_after_interruption_matches_uninterrupted(self, two_models, tmp_path):
        calls = {"n": 0}

        def flaky(mesh, params, seed):
            calls["n"] += 1
            if calls["n"] == 6:
                raise OSError("disk full (simulated)")
            return render_pair(mesh, params, seed)

        out = tmp_path / "resume"
        with pytest.raises(OSError):
            build_dataset(
                two_models, "D3", out_dir=out, seed=5,
                schedule=MINI_SCHEDULE, scene_defaults=TINY_SCENE, render_fn=flaky,
            )
        partial = DatasetManifest.load(out)
        assert 0 < len(partial.entries) < 8
        resumed = build_dataset(
            two_models, "D3", out_dir=out, seed=5,
            schedule=MINI_SCHEDULE, scene_defaults=TINY_SCENE,
        )
        clean = build_dataset(
            two_models, "D3", out_dir=tmp_path / "clean", seed=5,
            schedule=MINI_SCHEDULE, scene_defaults=TINY_SCENE,
        )
        assert resumed.to_json() == clean.to_json()

    def test_dry_run_entry_counts_and_d1_snapshots(self):
        models = [f"m{i:03d}.stl" for i in range(6)]
        manifest = build_dataset(
            models, "D1", seed=1, schedule=MINI_SCHEDULE, dry_run=True
        )
        assert len(manifest.entries) == 24
        snaps = {json.dumps(e.params_snapshot, sort_keys=True) for e in manifest.entries}
        assert len(snaps) == 1  # D1: every entry shares the parameter snapshot

    def test_dry_run_failed_models_are_skipped(self, tmp_path, two_models):
        bogus = tmp_path / "missing.stl"
        manifest = build_dataset(
            list(two_models) + [bogus],
            "D3",
            out_dir=tmp_path / "skip",
            seed=2,
            schedule=MINI_SCHEDULE,
            scene_defaults=TINY_SCENE,
            render_fn=lambda mesh, params, seed: ImagePair(
                np.zeros((4, 4)), np.full((4, 4), 1.5), params
            ),
        )
        assert len(manifest.failures) == 1
        assert "missing" in manifest.failures[0]
        assert len(manifest.entries) == 8  # the two good models only

    def test_manifest_round_trip(self):
        models = [f"m{i}.stl" for i in range(4)]
        manifest = build_dataset(models, "D2", seed=9, schedule=MINI_SCHEDULE, dry_run=True)
        back = DatasetManifest.from_json(manifest.to_json())
        assert back.to_json() == manifest.to_json()
