"""Dataset builds: parameter sampling, grouping, splitting, rendering, manifest.

A build takes a list of mesh files, assigns them to parameter groups, samples
one rendering configuration per group from the declared ranges, renders every
model through the pose schedule, and records everything in a JSON manifest.
Builds are deterministic for a fixed seed, parallel over (model, pose) jobs,
and resumable: existing outputs whose hashes match the previous manifest are
not re-rendered.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import imgio
from .render import ImagePair, SceneParams, make_scene, render_pair
from .scene import (
    Mesh,
    PoseSchedule,
    generate_pose_schedule,
    load_mesh,
    normalize_and_place,
    schedule_entry_pose,
)

log = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"

# canonical sampling order of the group-level parameters
PARAM_NAMES = (
    "period",
    "fringe_rotation_deg",
    "cam_proj_angle_deg",
    "projector_power",
    "ambient",
    "env_rotation_deg",
)
_FIRST_THREE = PARAM_NAMES[:3]

TRAIN_FRACTION = 0.85


@dataclass(frozen=True)
class ParamRanges:
    """Sampling ranges of the six group-level parameters."""

    period: tuple[float, float] = (4.4, 6.6)
    fringe_rotation_deg: tuple[float, float] = (-5.0, 5.0)
    cam_proj_angle_deg: tuple[float, float] = (10.0, 20.0)
    projector_power: tuple[float, float] = (20.0, 55.0)
    ambient: tuple[float, float] = (0.0, 1.0)
    env_rotation_deg: tuple[float, float] = (0.0, 360.0)

    def __post_init__(self):
        for name in PARAM_NAMES:
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"range {name} has lo > hi: ({lo}, {hi})")

    def midpoint(self, name: str) -> float:
        lo, hi = getattr(self, name)
        return (lo + hi) / 2.0


@dataclass(frozen=True)
class Recipe:
    """Which parameters vary from group to group, and how many groups."""

    id: str
    varying: tuple[str, ...]
    n_groups: int = 13
    extra_groups: int = 0  # groups of extra (colored) models appended

    def __post_init__(self):
        unknown = set(self.varying) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameters in recipe: {sorted(unknown)}")
        if self.n_groups < 1:
            raise ValueError("recipe needs at least one group")


RECIPES = {
    "D1": Recipe("D1", varying=()),
    "D2": Recipe("D2", varying=_FIRST_THREE),
    "D3": Recipe("D3", varying=PARAM_NAMES),
    "D4": Recipe("D4", varying=PARAM_NAMES, extra_groups=8),
}


def get_recipe(recipe_id: str) -> Recipe:
    try:
        return RECIPES[recipe_id]
    except KeyError:
        raise ValueError(
            f"unknown recipe {recipe_id!r}; expected one of {sorted(RECIPES)}"
        ) from None


@dataclass(frozen=True)
class ManifestEntry:
    model_id: str
    group_id: int
    pose_index: int
    yaw_deg: float
    roll_deg: float
    split: str
    fringe_path: str
    depth_path: str
    fringe_sha256: str = ""
    depth_sha256: str = ""
    params_snapshot: dict = field(default_factory=dict)


@dataclass
class DatasetManifest:
    recipe_id: str
    seed: int
    schedule: list[tuple[float, float]]
    ranges: dict
    groups: dict
    entries: list[ManifestEntry]
    schema_version: int = MANIFEST_SCHEMA_VERSION
    failures: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "recipe": self.recipe_id,
            "seed": self.seed,
            "schedule": [list(e) for e in self.schedule],
            "ranges": self.ranges,
            "groups": self.groups,
            "failures": self.failures,
            "entries": [asdict(e) for e in self.entries],
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @staticmethod
    def from_json(text: str) -> "DatasetManifest":
        doc = json.loads(text)
        return DatasetManifest(
            recipe_id=doc["recipe"],
            seed=doc["seed"],
            schedule=[tuple(e) for e in doc["schedule"]],
            ranges=doc["ranges"],
            groups=doc["groups"],
            entries=[ManifestEntry(**e) for e in doc["entries"]],
            schema_version=doc["schema_version"],
            failures=doc.get("failures", []),
        )

    def save(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text(self.to_json())
        return path

    @staticmethod
    def load(out_dir_or_file) -> "DatasetManifest":
        p = Path(out_dir_or_file)
        if p.is_dir():
            p = p / MANIFEST_NAME
        return DatasetManifest.from_json(p.read_text())


def assign_groups(model_ids, n_groups: int = 13, seed: int = 0) -> dict[str, int]:
    """Deterministic shuffle of the models into groups of near-equal size
    (sizes differ by at most one)."""
    ids = list(model_ids)
    if not ids:
        raise ValueError("cannot group an empty model list")
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    perm = np.random.default_rng(seed).permutation(len(ids))
    base, rem = divmod(len(ids), n_groups)
    sizes = [base + 1 if g < rem else base for g in range(n_groups)]
    mapping: dict[str, int] = {}
    cursor = 0
    for g, size in enumerate(sizes):
        for k in range(cursor, cursor + size):
            mapping[ids[perm[k]]] = g
        cursor += size
    return mapping


def sample_param_values(
    recipe: Recipe, ranges: ParamRanges, group_id: int, seed: int
) -> dict[str, float]:
    """The six group parameters: varying ones drawn uniformly, keyed by
    (seed, group_id); the rest pinned at their range midpoints."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, group_id]))
    values = {}
    for name in PARAM_NAMES:
        lo, hi = getattr(ranges, name)
        if name in recipe.varying:
            values[name] = float(rng.uniform(lo, hi))
        else:
            values[name] = ranges.midpoint(name)
    return values


def sample_group_params(
    recipe: Recipe,
    ranges: ParamRanges,
    group_id: int,
    seed: int,
    scene_defaults: dict | None = None,
) -> SceneParams:
    """Scene configuration template for one group (object pose left identity).

    scene_defaults forwards fixed, non-sampled knobs to make_scene
    (resolution, frequency, noise_sigma, pattern_resolution, ...).
    """
    values = sample_param_values(recipe, ranges, group_id, seed)
    kwargs = dict(scene_defaults or {})
    kwargs.update(
        carrier_scale=values["period"],
        fringe_rotation_deg=values["fringe_rotation_deg"],
        cam_proj_angle_deg=values["cam_proj_angle_deg"],
        projector_power=values["projector_power"],
        ambient=values["ambient"],
        env_rotation_deg=values["env_rotation_deg"],
    )
    return make_scene(**kwargs)


def split_train_test(
    manifest: DatasetManifest, seed: int = 0, train_fraction: float = TRAIN_FRACTION
) -> DatasetManifest:
    """Label entries train/test at the model level.

    Models are shuffled deterministically; round(train_fraction * n_models)
    of them (round half up) become training models, and every pose of a
    model inherits its split, so the two sets share no object.
    """
    models = sorted({e.model_id for e in manifest.entries})
    labels = _split_models(models, seed, train_fraction)
    entries = [replace(e, split=labels[e.model_id]) for e in manifest.entries]
    return replace_entries(manifest, entries)


def _split_models(models, seed, train_fraction=TRAIN_FRACTION) -> dict[str, str]:
    models = sorted(models)
    if len(models) < 2:
        raise ValueError("need at least 2 models to split train/test")
    n_train = int(np.floor(train_fraction * len(models) + 0.5))
    n_train = min(max(n_train, 1), len(models) - 1)
    # distinct seed stream from group assignment
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5917]))
    perm = rng.permutation(len(models))
    return {
        models[p]: ("train" if k < n_train else "test") for k, p in enumerate(perm)
    }


def replace_entries(
    manifest: DatasetManifest, entries: list[ManifestEntry]
) -> DatasetManifest:
    return DatasetManifest(
        recipe_id=manifest.recipe_id,
        seed=manifest.seed,
        schedule=manifest.schedule,
        ranges=manifest.ranges,
        groups=manifest.groups,
        entries=entries,
        schema_version=manifest.schema_version,
        failures=manifest.failures,
    )


def _entry_paths(group_id: int, model_id: str, pose_index: int) -> tuple[str, str]:
    stem = f"group{group_id:02d}/{model_id}/pose{pose_index:03d}"
    return stem + ".png", stem + ".exr"


def _job_seed(seed: int, model_index: int, pose_index: int) -> int:
    return int(
        np.random.SeedSequence([seed, model_index, pose_index]).generate_state(1)[0]
    )


def _load_normalized(path: Path) -> Mesh:
    return normalize_and_place(load_mesh(path))


def build_dataset(
    models,
    recipe: Recipe | str,
    ranges: ParamRanges | None = None,
    out_dir=None,
    seed: int = 0,
    workers: int = 1,
    schedule: PoseSchedule | None = None,
    scene_defaults: dict | None = None,
    extra_models=None,
    render_fn=None,
    dry_run: bool = False,
) -> DatasetManifest:
    """Render the full dataset and write its manifest.

    models/extra_models: mesh file paths; extra_models feeds the appended
    extra groups of recipes that declare them (colored-model add-on).
    render_fn(mesh, params, seed) -> ImagePair can replace the real
    renderer (stub builds, tests). dry_run skips mesh loading, rendering
    and image output but still produces (and saves, when out_dir is given)
    the complete manifest.
    """
    if isinstance(recipe, str):
        recipe = get_recipe(recipe)
    ranges = ranges or ParamRanges()
    schedule = schedule or generate_pose_schedule()
    render = render_fn or render_pair
    out = Path(out_dir) if out_dir is not None else None
    if not dry_run and out is None:
        raise ValueError("out_dir is required unless dry_run")

    model_paths = {Path(p).stem: Path(p) for p in models}
    model_ids = sorted(model_paths)
    if not model_ids:
        raise ValueError("no models given")
    groups = assign_groups(model_ids, recipe.n_groups, seed)

    extra_paths = {Path(p).stem: Path(p) for p in (extra_models or [])}
    extra_ids = sorted(extra_paths)
    if recipe.extra_groups and extra_ids:
        extra_map = assign_groups(extra_ids, recipe.extra_groups, seed + 1)
        for mid, g in extra_map.items():
            groups[mid] = recipe.n_groups + g
        model_paths.update(extra_paths)

    n_total_groups = recipe.n_groups + (recipe.extra_groups if extra_ids else 0)
    group_values = {
        g: sample_param_values(recipe, ranges, g, seed) for g in range(n_total_groups)
    }
    scene_templates = {
        g: sample_group_params(recipe, ranges, g, seed, scene_defaults)
        for g in range(n_total_groups)
    }

    split_main = _split_models(model_ids, seed)
    splits = dict(split_main)
    if recipe.extra_groups and extra_ids:
        splits.update(_split_models(extra_ids, seed + 1))

    all_ids = sorted(model_paths)
    meshes: dict[str, Mesh] = {}
    failures: list[str] = []
    if not dry_run:
        for mid in all_ids:
            try:
                meshes[mid] = _load_normalized(model_paths[mid])
            except Exception as e:  # noqa: BLE001 - per-model isolation
                log.warning("skipping model %s: %s", mid, e)
                failures.append(f"{mid}: {e}")
        all_ids = [m for m in all_ids if m in meshes]

    jobs = []
    for mi, mid in enumerate(all_ids):
        g = groups[mid]
        for pi, (yaw, roll) in enumerate(schedule):
            jobs.append((mi, mid, g, pi, yaw, roll))

    manifest = DatasetManifest(
        recipe_id=recipe.id,
        seed=seed,
        schedule=list(schedule),
        ranges={name: list(getattr(ranges, name)) for name in PARAM_NAMES},
        groups={str(g): group_values[g] for g in range(n_total_groups)},
        entries=[],
        failures=failures,
    )

    previous: dict[tuple[str, int], ManifestEntry] = {}
    if not dry_run and (out / MANIFEST_NAME).is_file():
        try:
            prev = DatasetManifest.load(out)
            previous = {(e.model_id, e.pose_index): e for e in prev.entries}
        except Exception as e:  # noqa: BLE001 - a broken manifest just disables resume
            log.warning("ignoring unreadable previous manifest: %s", e)

    def run_job(job) -> ManifestEntry:
        mi, mid, g, pi, yaw, roll = job
        fr_rel, dp_rel = _entry_paths(g, mid, pi)
        entry = ManifestEntry(
            model_id=mid,
            group_id=g,
            pose_index=pi,
            yaw_deg=yaw,
            roll_deg=roll,
            split=splits[mid],
            fringe_path=fr_rel,
            depth_path=dp_rel,
            params_snapshot=dict(group_values[g]),
        )
        if dry_run:
            return entry
        fr_file = out / fr_rel
        dp_file = out / dp_rel
        prev_entry = previous.get((mid, pi))
        if prev_entry is not None and fr_file.is_file() and dp_file.is_file():
            fr_hash = hashlib.sha256(fr_file.read_bytes()).hexdigest()
            dp_hash = hashlib.sha256(dp_file.read_bytes()).hexdigest()
            if (
                fr_hash == prev_entry.fringe_sha256
                and dp_hash == prev_entry.depth_sha256
            ):
                return replace(entry, fringe_sha256=fr_hash, depth_sha256=dp_hash)
        template = scene_templates[g]
        pose = schedule_entry_pose((yaw, roll), template.camera)
        params = replace(template, object_pose=pose)
        pair: ImagePair = render(meshes[mid], params, _job_seed(seed, mi, pi))
        fr_bytes = imgio.png_bytes(pair.fringe_image)
        dp_bytes = imgio.exr_bytes(np.asarray(pair.depth_image, dtype=np.float32))
        fr_file.parent.mkdir(parents=True, exist_ok=True)
        fr_file.write_bytes(fr_bytes)
        dp_file.write_bytes(dp_bytes)
        return replace(
            entry,
            fringe_sha256=hashlib.sha256(fr_bytes).hexdigest(),
            depth_sha256=hashlib.sha256(dp_bytes).hexdigest(),
        )

    entries: list[ManifestEntry] = []
    try:
        if workers <= 1 or dry_run:
            for job in jobs:
                entries.append(run_job(job))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_job, job) for job in jobs]
                try:
                    for f in futures:
                        entries.append(f.result())
                except OSError:
                    for f in futures:
                        f.cancel()
                    entries = [
                        f.result()
                        for f in futures
                        if f.done() and not f.cancelled() and f.exception() is None
                    ]
                    raise
    except OSError:
        # keep whatever completed as a valid partial manifest
        entries.sort(key=lambda e: (e.model_id, e.pose_index))
        manifest = replace_entries(manifest, entries)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            manifest.save(out)
        raise

    entries.sort(key=lambda e: (e.model_id, e.pose_index))
    manifest = replace_entries(manifest, entries)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        manifest.save(out)
    return manifest
