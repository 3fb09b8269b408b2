"""Command-line entry point: render, dataset build, demod, and eval.

Every subcommand writes a JSON run report into its output directory, and
the table-producing commands save a matplotlib figure next to the CSV.
Exit codes: 0 ok, 1 usage or invalid configuration, 2 completed with
per-item failures, 3 fatal I/O (missing inputs, unwritable outputs).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import imgio
from .datasetgen import build_dataset
from .demod import (
    PhaseMap,
    phase_to_depth,
    ps_wrapped_phase,
    temporal_unwrap,
    wall_depth_raster,
)
from .fringe import FringeSpec
from .metrics import MetricConfig, mae, minmax_normalize, ssim
from .render import make_scene, render_pair, render_phase_sequence
from .report import RunReport, save_metric_bars, save_raster_figure
from .scene import MeshError, PinholeDevice, RigidPose, load_mesh, normalize_and_place

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_IO = 3

CALIB_NAME = "calib.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _device_to_dict(dev: PinholeDevice) -> dict:
    return {
        "focal": list(dev.focal),
        "center": list(dev.center),
        "resolution": list(dev.resolution),
        "rotation": dev.pose.rotation.reshape(-1).tolist(),
        "translation": dev.pose.translation.tolist(),
    }


def _device_from_dict(d: dict) -> PinholeDevice:
    return PinholeDevice(
        focal=tuple(d["focal"]),
        center=tuple(d["center"]),
        resolution=tuple(int(v) for v in d["resolution"]),
        pose=RigidPose(
            np.asarray(d["rotation"]).reshape(3, 3), np.asarray(d["translation"])
        ),
    )


def _spec_to_dict(spec: FringeSpec) -> dict:
    return {
        "period": spec.period,
        "rotation_deg": spec.rotation_deg,
        "amplitude": spec.amplitude,
        "offset": spec.offset,
        "phase_shift": spec.phase_shift,
        "pattern_resolution": list(spec.pattern_resolution),
    }


def _spec_from_dict(d: dict) -> FringeSpec:
    return FringeSpec(
        period=d["period"],
        rotation_deg=d["rotation_deg"],
        amplitude=d["amplitude"],
        offset=d["offset"],
        phase_shift=d["phase_shift"],
        pattern_resolution=tuple(int(v) for v in d["pattern_resolution"]),
    )


def _stack_name(freq_index: int, step: int) -> str:
    return f"freq{freq_index:02d}_step{step:02d}.png"


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------


def cmd_render(args) -> int:
    report = RunReport(command="render", seed=args.seed)
    out = Path(args.out)
    try:
        cfg = cfgmod.load_config(args.config)
        report.config = cfg
        mesh = normalize_and_place(load_mesh(args.mesh))
        out.mkdir(parents=True, exist_ok=True)

        if args.steps:
            freqs = [float(f) for f in args.freqs.split(",") if f]
            if not freqs:
                raise cfgmod.ConfigError("--freqs must list at least one frequency")
            cfg["render"]["frequency"] = 1.0  # --freqs carries the multipliers
            params = cfgmod.scene_from_config(cfg)
            pairs = render_phase_sequence(
                mesh, params, n_steps=args.steps, frequencies=freqs, seed=args.seed
            )
            specs: dict[int, FringeSpec] = {}
            n_png = 0
            for pair in pairs:
                fi = freqs.index(pair.frequency)
                if pair.step == 0:
                    specs[fi] = pair.params.fringe
                name = _stack_name(fi, pair.step)
                imgio.write_gray(out / name, pair.fringe_image)
                report.add_item(name, "ok")
                n_png += 1
            imgio.write_exr(out / "depth.exr", pairs[0].depth_image.astype(np.float32))
            calib = {
                "camera": _device_to_dict(params.camera),
                "projector": _device_to_dict(params.projector),
                "frequencies": freqs,
                "n_steps": args.steps,
                "wall_y": params.wall_y,
                "fringe_specs": [_spec_to_dict(specs[i]) for i in range(len(freqs))],
            }
            (out / CALIB_NAME).write_text(json.dumps(calib, indent=1, sort_keys=True))
            report.aggregate = {"png_files": n_png, "exr_files": 1}
        else:
            params = cfgmod.scene_from_config(cfg)
            pair = render_pair(mesh, params, seed=args.seed)
            imgio.write_gray(out / "fringe.png", pair.fringe_image)
            imgio.write_exr(out / "depth.exr", pair.depth_image.astype(np.float32))
            report.add_item("fringe.png", "ok")
            report.add_item("depth.exr", "ok")
            report.aggregate = {"png_files": 1, "exr_files": 1}
        report.finish("ok")
        return EXIT_OK
    except (MeshError, FileNotFoundError, OSError) as e:
        report.finish("error", str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (cfgmod.ConfigError, ValueError) as e:
        report.finish("error", str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        _try_save(report, out)


# ---------------------------------------------------------------------------
# dataset build
# ---------------------------------------------------------------------------


def _collect_models(directory: str, patterns: str) -> list[Path]:
    if not directory:
        return []
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"model directory not found: {root}")
    found: list[Path] = []
    for pat in patterns.split():
        found.extend(sorted(root.glob(pat)))
    return found


def cmd_dataset(args) -> int:
    report = RunReport(command="dataset build", seed=args.seed)
    out = Path(args.out)
    try:
        cfg = cfgmod.load_config(args.config)
        report.config = cfg
        model_dir = args.models or cfg["models"]["dir"]
        if not model_dir:
            raise cfgmod.ConfigError(
                "no model source: pass --models or set [models] dir"
            )
        patterns = cfg["models"]["pattern"]
        models = _collect_models(model_dir, patterns)
        if not models:
            raise FileNotFoundError(f"no mesh files matching {patterns!r} in {model_dir}")
        recipe = cfgmod.recipe_from_config(cfg)
        extra = (
            _collect_models(cfg["models"]["extra_dir"], patterns)
            if recipe.extra_groups
            else []
        )
        manifest = build_dataset(
            models,
            recipe,
            ranges=cfgmod.ranges_from_config(cfg),
            out_dir=out,
            seed=args.seed,
            workers=args.workers,
            schedule=cfgmod.schedule_from_config(cfg),
            scene_defaults=cfgmod.scene_defaults(cfg),
            extra_models=extra,
            dry_run=args.dry_run,
        )
        for failure in manifest.failures:
            report.add_item(failure.split(":")[0], "failed", failure)
        splits = [e.split for e in manifest.entries]
        report.aggregate = {
            "entries": len(manifest.entries),
            "models": len({e.model_id for e in manifest.entries}),
            "groups": len(manifest.groups),
            "train_entries": splits.count("train"),
            "test_entries": splits.count("test"),
            "dry_run": bool(args.dry_run),
        }
        if manifest.failures:
            report.finish("partial")
            return EXIT_PARTIAL
        report.finish("ok")
        return EXIT_OK
    except (cfgmod.ConfigError, ValueError) as e:
        report.finish("error", str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, OSError) as e:
        report.finish("error", str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    finally:
        _try_save(report, out)


# ---------------------------------------------------------------------------
# demod
# ---------------------------------------------------------------------------


def cmd_demod(args) -> int:
    report = RunReport(command="demod")
    out = Path(args.out)
    input_dir = Path(args.input)
    try:
        calib_path = Path(args.calib) if args.calib else input_dir / CALIB_NAME
        if not calib_path.is_file():
            raise FileNotFoundError(f"calibration file not found: {calib_path}")
        calib = json.loads(calib_path.read_text())
        camera = _device_from_dict(calib["camera"])
        projector = _device_from_dict(calib["projector"])
        freqs = [float(f) for f in calib["frequencies"]]
        n_steps = int(calib["n_steps"])
        specs = [_spec_from_dict(d) for d in calib["fringe_specs"]]

        phases: list[PhaseMap] = []
        for fi in range(len(freqs)):
            stack = []
            for k in range(n_steps):
                img_path = input_dir / _stack_name(fi, k)
                if not img_path.is_file():
                    raise FileNotFoundError(f"missing stack image: {img_path}")
                stack.append(imgio.read_gray(img_path))
            phases.append(ps_wrapped_phase(stack))
            report.add_item(f"stack_freq{fi:02d}", "ok", f"{n_steps} images")

        order = np.argsort(freqs)
        current = phases[order[0]]
        for prev_i, cur_i in zip(order[:-1], order[1:]):
            current = temporal_unwrap(
                phases[cur_i], current, freqs[cur_i] / freqs[prev_i]
            )
        if current.state != "unwrapped":
            current = PhaseMap(
                current.values, "unwrapped", current.modulation, current.valid_mask
            )

        high = int(order[-1])
        depth = phase_to_depth(current, camera, projector, specs[high])
        valid = np.isfinite(depth)
        wall = wall_depth_raster(camera, float(calib["wall_y"]))
        depth_out = np.where(valid, depth, wall).astype(np.float32)
        out.mkdir(parents=True, exist_ok=True)
        imgio.write_exr(out / "depth.exr", depth_out)

        aggregate = {"valid_fraction": float(valid.mean())}
        panels = {
            "wrapped phase (high)": phases[high].values,
            "unwrapped phase": np.where(current.valid_mask, current.values, np.nan),
            "depth (m)": np.where(valid, depth, np.nan),
        }
        gt_path = input_dir / "depth.exr"
        if gt_path.is_file():
            gt = imgio.read_exr(gt_path).astype(np.float64)
            residual = np.where(valid, depth - gt, np.nan)
            rms = float(np.sqrt(np.nanmean(residual**2)))
            aggregate["rms_depth_error_m"] = rms
            panels["residual (m)"] = residual
        report.aggregate = aggregate
        save_raster_figure(out / "maps.png", panels)
        lines = [f"{k}: {v:.9g}" for k, v in sorted(aggregate.items())]
        (out / "residuals.txt").write_text("\n".join(lines) + "\n")
        report.finish("ok")
        return EXIT_OK
    except (cfgmod.ConfigError, ValueError, KeyError) as e:
        report.finish("error", str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, OSError) as e:
        report.finish("error", str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    finally:
        _try_save(report, out)


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _load_raster(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".exr":
        return imgio.read_exr(path).astype(np.float64)
    return imgio.read_gray(path)


def cmd_eval(args) -> int:
    report = RunReport(command="eval")
    out = Path(args.out)
    try:
        pred_dir = Path(args.pred)
        gt_dir = Path(args.gt)
        for d in (pred_dir, gt_dir):
            if not d.is_dir():
                raise FileNotFoundError(f"directory not found: {d}")
        exts = {".exr", ".png"}
        pred_files = {p.name: p for p in sorted(pred_dir.iterdir()) if p.suffix in exts}
        gt_files = {p.name: p for p in sorted(gt_dir.iterdir()) if p.suffix in exts}
        missing = sorted(set(gt_files) ^ set(pred_files))
        common = sorted(set(gt_files) & set(pred_files))
        if not common:
            raise FileNotFoundError("no common image names between pred and gt")

        cfg = MetricConfig()
        rows = []
        import warnings as _warnings

        for name in common:
            g = _load_raster(pred_files[name])
            d = _load_raster(gt_files[name])
            if g.shape != d.shape:
                report.add_item(name, "failed", "resolution mismatch")
                continue
            with _warnings.catch_warnings():
                _warnings.simplefilter("ignore")
                gn = minmax_normalize(g)
                dn = minmax_normalize(d)
            rows.append(
                {
                    "image": name,
                    "mae": mae(gn, dn),
                    "sde": float(np.std(gn - dn)),
                    "ssim": ssim(gn, dn, cfg),
                }
            )
            report.add_item(name, "ok")
        for name in missing:
            report.add_item(name, "missing", "present in only one directory")

        out.mkdir(parents=True, exist_ok=True)
        agg = {
            "mae": float(np.mean([r["mae"] for r in rows])) if rows else float("nan"),
            "msde": float(np.mean([r["sde"] for r in rows])) if rows else float("nan"),
            "ssim": float(np.mean([r["ssim"] for r in rows])) if rows else float("nan"),
            "images": len(rows),
            "missing": len(missing),
        }
        report.aggregate = agg

        with (out / "metrics.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image", "mae", "sde", "ssim"])
            for r in rows:
                writer.writerow(
                    [r["image"], f"{r['mae']:.9g}", f"{r['sde']:.9g}", f"{r['ssim']:.9g}"]
                )
            writer.writerow(
                ["aggregate", f"{agg['mae']:.9g}", f"{agg['msde']:.9g}", f"{agg['ssim']:.9g}"]
            )
        width = max([len(r["image"]) for r in rows] + [9])
        lines = [f"{'image':<{width}}  {'MAE':>12}  {'SDE':>12}  {'SSIM':>12}"]
        for r in rows:
            lines.append(
                f"{r['image']:<{width}}  {r['mae']:>12.6f}  {r['sde']:>12.6f}  {r['ssim']:>12.6f}"
            )
        lines.append(
            f"{'aggregate':<{width}}  {agg['mae']:>12.6f}  {agg['msde']:>12.6f}  {agg['ssim']:>12.6f}"
        )
        if missing:
            lines.append("")
            lines.append("missing pairs:")
            lines.extend(f"  {m}" for m in missing)
        (out / "metrics.txt").write_text("\n".join(lines) + "\n")
        if rows:
            save_metric_bars(
                out / "metrics.png",
                [r["image"] for r in rows],
                {
                    "MAE": [r["mae"] for r in rows],
                    "SDE": [r["sde"] for r in rows],
                    "SSIM": [r["ssim"] for r in rows],
                },
            )
        if missing:
            report.finish("partial")
            print(
                "missing pairs:\n" + "\n".join(f"  {m}" for m in missing),
                file=sys.stderr,
            )
            return EXIT_PARTIAL
        report.finish("ok")
        return EXIT_OK
    except FileNotFoundError as e:
        report.finish("error", str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        report.finish("error", str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        _try_save(report, out)


def _try_save(report: RunReport, out: Path) -> None:
    try:
        if report.wall_time_s == 0.0:
            report.finish(report.status, report.error)
        report.save(out)
    except OSError:
        print(report.to_json(), file=sys.stderr)


def build_parser() -> _Parser:
    parser = _Parser(prog="fpp-forge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render one fringe/depth pair or a phase stack")
    p_render.add_argument("--mesh", required=True, help="STL or OBJ file")
    p_render.add_argument("--config", default=None, help="INI config file")
    p_render.add_argument("--out", required=True, help="output directory")
    p_render.add_argument("--seed", type=int, default=0)
    p_render.add_argument("--steps", type=int, default=0, help="phase steps per stack")
    p_render.add_argument(
        "--freqs", default="1", help="comma-separated frequency multipliers"
    )
    p_render.set_defaults(func=cmd_render)

    p_ds = sub.add_parser("dataset", help="dataset operations")
    ds_sub = p_ds.add_subparsers(dest="action", required=True)
    p_build = ds_sub.add_parser("build", help="render a full dataset with manifest")
    p_build.add_argument("--config", default=None)
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--seed", type=int, default=0)
    p_build.add_argument("--workers", type=int, default=1)
    p_build.add_argument("--models", default=None, help="mesh directory (overrides config)")
    p_build.add_argument(
        "--dry-run", action="store_true", help="plan the manifest without rendering"
    )
    p_build.set_defaults(func=cmd_dataset)

    p_demod = sub.add_parser("demod", help="reconstruct depth from a rendered stack")
    p_demod.add_argument("--input", required=True, help="directory with PNG stacks")
    p_demod.add_argument("--calib", default=None, help="calibration JSON (default: input/calib.json)")
    p_demod.add_argument("--out", required=True)
    p_demod.set_defaults(func=cmd_demod)

    p_eval = sub.add_parser("eval", help="compare predictions against ground truth")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--gt", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
