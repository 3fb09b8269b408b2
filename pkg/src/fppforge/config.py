"""INI configuration for renders and dataset builds.

Sections and keys are validated against a schema; unknown or malformed
entries are rejected with the offending file line so typos surface
immediately instead of silently falling back to defaults.
"""

from __future__ import annotations

import configparser
import re
from pathlib import Path

from .datasetgen import ParamRanges, Recipe, get_recipe
from .render import FALLOFF_MODES, SceneParams, make_scene
from .scene import PoseSchedule, generate_pose_schedule


class ConfigError(ValueError):
    """Invalid configuration file contents."""


_RENDER_KEYS = {
    "width": int,
    "height": int,
    "fov_deg": float,
    "carrier_scale": float,
    "frequency": float,
    "fringe_rotation_deg": float,
    "amplitude": float,
    "offset": float,
    "pattern_size": int,
    "cam_proj_angle_deg": float,
    "projector_power": float,
    "ambient": float,
    "env_rotation_deg": float,
    "noise_sigma": float,
    "falloff": str,
    "wall_y": float,
}
_SCHEDULE_KEYS = {"n_yaw": int, "yaw_step": float, "n_roll": int, "roll_step": float}
_RANGE_KEYS = {
    "period": "pair",
    "fringe_rotation_deg": "pair",
    "cam_proj_angle_deg": "pair",
    "projector_power": "pair",
    "ambient": "pair",
    "env_rotation_deg": "pair",
}
_RECIPE_KEYS = {"id": str, "n_groups": int}
_MODEL_KEYS = {"dir": str, "extra_dir": str, "pattern": str}

_SCHEMA = {
    "render": _RENDER_KEYS,
    "schedule": _SCHEDULE_KEYS,
    "ranges": _RANGE_KEYS,
    "recipe": _RECIPE_KEYS,
    "models": _MODEL_KEYS,
}

DEFAULTS = {
    "render": {
        "width": 512,
        "height": 512,
        "fov_deg": 7.0,
        "carrier_scale": 5.5,
        "frequency": 16.0,
        "fringe_rotation_deg": 0.0,
        "amplitude": 0.5,
        "offset": 0.5,
        "pattern_size": 2048,
        "cam_proj_angle_deg": 15.0,
        "projector_power": 37.5,
        "ambient": 0.5,
        "env_rotation_deg": 0.0,
        "noise_sigma": 0.005,
        "falloff": "constant",
        "wall_y": 0.05,
    },
    "schedule": {"n_yaw": 12, "yaw_step": 30.0, "n_roll": 12, "roll_step": 5.0},
    "ranges": {},
    "recipe": {"id": "D3", "n_groups": 13},
    "models": {"dir": "", "extra_dir": "", "pattern": "*.stl *.obj"},
}


def _find_line(path: Path, section: str, key: str | None) -> int:
    """Best-effort line number of a section header or of a key within it."""
    in_section = False
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        header = re.match(r"\s*\[(?P<name>[^\]]+)\]", line)
        if header:
            if key is None and header.group("name") == section:
                return lineno
            in_section = header.group("name") == section
            continue
        if key is not None and in_section:
            if re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
                return lineno
    return 0


def load_config(path=None) -> dict:
    """Parse and validate an INI config; missing file/keys take defaults."""
    cfg = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from e

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"{path}:{_find_line(path, section, None)}: unknown section [{section}]"
            )
        schema = _SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(
                    f"{path}:{_find_line(path, section, key)}: "
                    f"unknown key {key!r} in [{section}]"
                )
            line = _find_line(path, section, key)
            typ = schema[key]
            try:
                if typ == "pair":
                    parts = [float(p) for p in re.split(r"[,\s]+", raw.strip()) if p]
                    if len(parts) != 2:
                        raise ValueError("expected two numbers")
                    cfg[section][key] = (parts[0], parts[1])
                else:
                    cfg[section][key] = typ(raw)
            except ValueError as e:
                raise ConfigError(
                    f"{path}:{line}: bad value for {key!r} in [{section}]: {e}"
                ) from e

    falloff = cfg["render"]["falloff"]
    if falloff not in FALLOFF_MODES:
        raise ConfigError(
            f"{path}:{_find_line(path, 'render', 'falloff')}: "
            f"falloff must be one of {FALLOFF_MODES}, got {falloff!r}"
        )
    return cfg


def scene_defaults(cfg: dict) -> dict:
    """Fixed make_scene knobs shared by every group of a dataset build."""
    r = cfg["render"]
    return {
        "resolution": (r["width"], r["height"]),
        "frequency": r["frequency"],
        "amplitude": r["amplitude"],
        "offset": r["offset"],
        "pattern_resolution": (r["pattern_size"], r["pattern_size"]),
        "noise_sigma": r["noise_sigma"],
        "falloff": r["falloff"],
        "fov_deg": r["fov_deg"],
        "wall_y": r["wall_y"],
    }


def scene_from_config(cfg: dict) -> SceneParams:
    """One-shot SceneParams straight from the [render] section."""
    r = cfg["render"]
    return make_scene(
        carrier_scale=r["carrier_scale"],
        fringe_rotation_deg=r["fringe_rotation_deg"],
        cam_proj_angle_deg=r["cam_proj_angle_deg"],
        projector_power=r["projector_power"],
        ambient=r["ambient"],
        env_rotation_deg=r["env_rotation_deg"],
        **scene_defaults(cfg),
    )


def ranges_from_config(cfg: dict) -> ParamRanges:
    return ParamRanges(**cfg["ranges"]) if cfg["ranges"] else ParamRanges()


def schedule_from_config(cfg: dict) -> PoseSchedule:
    s = cfg["schedule"]
    return generate_pose_schedule(
        s["n_yaw"], s["yaw_step"], s["n_roll"], s["roll_step"]
    )


def recipe_from_config(cfg: dict) -> Recipe:
    recipe = get_recipe(cfg["recipe"]["id"])
    n_groups = cfg["recipe"]["n_groups"]
    if n_groups != recipe.n_groups:
        recipe = Recipe(
            recipe.id, recipe.varying, n_groups, extra_groups=recipe.extra_groups
        )
    return recipe
