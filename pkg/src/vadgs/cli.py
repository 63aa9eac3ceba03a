"""Command-line driver: one subcommand per pipeline stage plus the end-to-end run.

Numeric settings are passed as ``--section.key=value`` flags (see
``PipelineConfig``); manifests may carry their own overrides, which the
command line overrides in turn. Results go to standard output as JSON, logs
to standard error.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

from .config import PipelineConfig, load_config
from .densifier import InstanceStages, PassContext, SceneInputs, initial_primitives, run_pipeline
from .errors import DataError, FormatError, UsageError
from .io import (
    ReportStorage,
    load_ground_truth,
    load_manifest,
    load_scene_inputs,
    mean_depth_error,
    psnr,
    read_gaussians_ply,
    read_ppm,
    summarize_reports,
    to_float_image,
    write_gaussians_ply,
    write_index,
    write_pfm,
    write_pgm,
    write_ppm,
    write_simulated_scene,
)
from .simulator import generate, load_spec
from .splatting import GaussianSet, splat_render, total_loss
from .voxels import InstanceStatus, rasterize_visible, voxelize_cloud

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class CliParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as exceptions instead of exiting with 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def parse_overrides(extra: Sequence[str]) -> Dict[str, Any]:
    """``--patchmatch.iterations=4`` style flags; values are JSON when they parse as JSON"""
    overrides: Dict[str, Any] = {}
    for flag in extra:
        if not flag.startswith("--") or "=" not in flag:
            raise UsageError(f"unrecognized argument '{flag}' (config flags look like --section.key=value)")
        key, raw = flag[2:].split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def build_parser() -> CliParser:
    parser = CliParser(prog="vadgs", description="Visibility-aware densification of Gaussian splatting scenes",
                       allow_abbrev=False)
    parser.add_argument("--seed", type=int, default=None, help="seed for every random stage")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")
    parser.add_argument("--log-level", default=None, help="logging level (default: VADGS_LOG_LEVEL or INFO)")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    simulate = commands.add_parser("simulate", help="generate a synthetic scene from a JSON spec")
    simulate.add_argument("spec")
    simulate.add_argument("outdir")

    voxelize = commands.add_parser("voxelize", help="voxelize the point cloud with visibility sets")
    voxelize.add_argument("manifest")
    voxelize.add_argument("output", help="voxel grid JSON")

    rasterize = commands.add_parser("rasterize", help="z-buffer the voxel grid into views")
    rasterize.add_argument("manifest")
    rasterize.add_argument("outdir")
    rasterize.add_argument("--view", type=int, action="append", dest="views")
    rasterize.add_argument("--mode", choices=["all_voxels", "view_filtered"], default="all_voxels")

    for name, text in (("flag", "detect incomplete instances"),
                       ("select-views", "choose supporting views for an instance"),
                       ("mvs", "patch-match reconstruction of an instance")):
        sub = commands.add_parser(name, help=text)
        sub.add_argument("manifest")
        sub.add_argument("--gaussians", help="primitive PLY (default: manifest priors or point initialization)")
        if name == "flag":
            sub.add_argument("--instance", type=int, action="append", dest="instances")
        else:
            sub.add_argument("--instance", type=int, required=True)
        if name == "mvs":
            sub.add_argument("outdir")

    densify = commands.add_parser("densify", help="end-to-end detect and densify run")
    densify.add_argument("manifest")
    densify.add_argument("outdir")

    report = commands.add_parser("report", help="query the report written by densify")
    report.add_argument("path", help="densify output directory or its report.json")
    report.add_argument("--instance", type=int)
    report.add_argument("--status", choices=[status.value for status in InstanceStatus])
    report.add_argument("--failed", action="store_true", help="only instances that failed in some stage")

    render = commands.add_parser("render", help="render a primitive set into views")
    render.add_argument("manifest")
    render.add_argument("gaussians")
    render.add_argument("outdir")
    render.add_argument("--view", type=int, action="append", dest="views")

    evaluate = commands.add_parser("evaluate", help="PSNR and loss breakdown against the scene")
    evaluate.add_argument("manifest", nargs="?")
    evaluate.add_argument("--gaussians")
    evaluate.add_argument("--instance", type=int)
    evaluate.add_argument("--pair", nargs=2, metavar=("RENDER", "REFERENCE"), help="compare two PPM images")
    return parser


def _print_json(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=str)
        handle.write("\n")


def _configure(args, overrides: Dict[str, Any]) -> PipelineConfig:
    overrides = dict(overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    config = load_config(overrides)
    if config.threads is None:
        config = config.with_overrides({"threads": os.cpu_count() or 1})
    return config


def _load_scene(args, cli_overrides: Dict[str, Any]) -> Tuple[Any, SceneInputs, PipelineConfig]:
    manifest = load_manifest(args.manifest)
    config = _configure(args, {**manifest.overrides, **cli_overrides})
    return manifest, load_scene_inputs(manifest), config


def _primitives(args, inputs: SceneInputs, config: PipelineConfig) -> GaussianSet:
    if getattr(args, "gaussians", None):
        return read_gaussians_ply(args.gaussians)
    return initial_primitives(inputs, config)


def _views(inputs: SceneInputs, wanted: Optional[List[int]]):
    if not wanted:
        return inputs.views
    known = {view.view_id for view in inputs.views}
    missing = sorted(set(wanted) - known)
    if missing:
        raise UsageError(f"unknown view ids {missing}")
    return [view for view in inputs.views if view.view_id in set(wanted)]


def _stages(args, inputs: SceneInputs, config: PipelineConfig) -> InstanceStages:
    context = PassContext(inputs=inputs, config=config, snapshot=_primitives(args, inputs, config),
                          points=inputs.points, render_threads=config.threads)
    return InstanceStages(context)


def _run(stages: InstanceStages, instance_id: int, names: Sequence[str]) -> Dict[str, Any]:
    if instance_id not in stages.context.inputs.masks:
        raise UsageError(f"instance {instance_id} is not declared in the manifest")
    state: Dict[str, Any] = {"instance_id": instance_id}
    for name in names:
        state.update(getattr(stages, name)(state))
    return state


def cmd_simulate(args, overrides: Dict[str, Any]) -> int:
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    config = _configure(args, overrides)
    scene = generate(spec, threads=config.threads)
    path = write_simulated_scene(scene, args.outdir)
    _print_json({"manifest": str(path), "views": len(scene.views), "points": len(scene.truth.points),
                 "instances": sorted(scene.truth.masks)})
    return EXIT_OK


def cmd_voxelize(args, overrides: Dict[str, Any]) -> int:
    _, inputs, config = _load_scene(args, overrides)
    grid = voxelize_cloud(inputs.points, config.voxel.resolution, config.voxel.padding)
    voxels = [
        {"index": int(index), "centroid": [float(c) for c in record.centroid], "points": record.point_count,
         "visibility": sorted(int(v) for v in record.visibility)}
        for index, record in sorted(grid.cells.items())
    ]
    _write_json(Path(args.output), {"origin": [float(o) for o in grid.origin], "resolution": grid.resolution,
                                    "dims": list(grid.dims), "voxels": voxels})
    _print_json({"voxels": len(grid), "dims": list(grid.dims), "output": args.output})
    return EXIT_OK


def cmd_rasterize(args, overrides: Dict[str, Any]) -> int:
    _, inputs, config = _load_scene(args, overrides)
    grid = voxelize_cloud(inputs.points, config.voxel.resolution, config.voxel.padding)
    outdir = Path(args.outdir)
    coverage = {}
    for view in _views(inputs, args.views):
        depth_index = rasterize_visible(grid, view, args.mode)
        write_pfm(outdir / f"voxel_depth_{view.view_id:04d}.pfm", depth_index.depth)
        write_index(outdir / f"voxel_index_{view.view_id:04d}.idx", depth_index.index)
        coverage[view.view_id] = float(depth_index.valid.mean())
    _print_json({"mode": args.mode, "coverage": coverage})
    return EXIT_OK


def cmd_flag(args, overrides: Dict[str, Any]) -> int:
    _, inputs, config = _load_scene(args, overrides)
    stages = _stages(args, inputs, config)
    results = {}
    for instance_id in args.instances or sorted(inputs.masks):
        try:
            state = _run(stages, instance_id, ("prepare", "flag"))
            results[instance_id] = {"status": state["pre_status"].value, "references": state["references"],
                                    "voxels": len(state["voxel_ids"]), "dynamic": state["dynamic"]}
        except DataError as exc:
            logger.warning("Instance %d could not be flagged: %s", instance_id, exc)
            results[instance_id] = {"status": "unobserved", "error": f"{type(exc).__name__}: {exc}"}
    _print_json({"instances": results})
    return EXIT_OK


def cmd_select_views(args, overrides: Dict[str, Any]) -> int:
    _, inputs, config = _load_scene(args, overrides)
    state = _run(_stages(args, inputs, config), args.instance, ("prepare", "select"))
    _print_json(state["selection"].model_dump(mode="json"))
    return EXIT_OK


def cmd_mvs(args, overrides: Dict[str, Any]) -> int:
    _, inputs, config = _load_scene(args, overrides)
    state = _run(_stages(args, inputs, config), args.instance, ("prepare", "select", "reconstruct"))
    hyp_map, consistency = state["hyp_map"], state["consistency"]
    ref = state["references"][0]
    outdir = Path(args.outdir)
    survivors = consistency.survivors
    write_pfm(outdir / f"mvs_depth_{ref:04d}.pfm", np.where(survivors, hyp_map.depth(), np.inf))
    write_pfm(outdir / f"mvs_normal_{ref:04d}.pfm", np.where(survivors[..., None], hyp_map.normals, 0.0))
    write_pfm(outdir / f"mvs_cost_{ref:04d}.pfm", hyp_map.costs)
    write_pgm(outdir / f"mvs_survivors_{ref:04d}.pgm", survivors)
    summary = {"reference": ref, "supporting": list(state["selection"].chosen),
               "converged": int(hyp_map.converged.sum()), "surviving": consistency.survivor_count}
    _write_json(outdir / "mvs_summary.json", summary)
    _print_json(summary)
    return EXIT_OK


def cmd_densify(args, overrides: Dict[str, Any]) -> int:
    _, inputs, config = _load_scene(args, overrides)
    gaussians, reports = run_pipeline(inputs, config)
    outdir = Path(args.outdir)
    write_gaussians_ply(outdir / "gaussians.ply", gaussians)
    summary = summarize_reports(reports)
    summary["primitives"] = len(gaussians)
    storage = ReportStorage(str(outdir / "report.json"))
    storage.save_reports(reports, summary, {"seed": config.seed, "config": config.flat_items()})
    failed = storage.get_failed_reports()
    for report in failed:
        logger.warning("Instance %d pass %d failed in %s: %s", report.instance_id, report.pass_index,
                       report.stage, report.error)
    _print_json(summary)
    return EXIT_OK


def cmd_report(args, overrides: Dict[str, Any]) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "report.json"
    if not path.is_file():
        raise FormatError(f"no densification report at {path}")
    storage = ReportStorage(str(path))
    if args.failed:
        reports = storage.get_failed_reports()
    elif args.status:
        reports = storage.get_reports_by_status(args.status)
    else:
        reports = storage.get_all_reports()
    if args.instance is not None:
        reports = [report for report in reports if report.instance_id == args.instance]
    _print_json({"summary": storage.get_summary(), "reports": [report.model_dump(mode="json") for report in reports]})
    return EXIT_OK


def cmd_render(args, overrides: Dict[str, Any]) -> int:
    _, inputs, config = _load_scene(args, overrides)
    gaussians = read_gaussians_ply(args.gaussians)
    outdir = Path(args.outdir)
    for view in _views(inputs, args.views):
        render = splat_render(gaussians, view, inputs.tracks, config.render, config.threads)
        write_ppm(outdir / f"color_{view.view_id:04d}.ppm", render.color)
        write_pfm(outdir / f"soft_depth_{view.view_id:04d}.pfm", render.soft_depth)
        write_pfm(outdir / f"hard_depth_{view.view_id:04d}.pfm", render.hard_depth)
        write_pfm(outdir / f"normal_{view.view_id:04d}.pfm", render.normal)
        write_pfm(outdir / f"alpha_{view.view_id:04d}.pfm", render.accumulated_alpha)
    _print_json({"primitives": len(gaussians), "views": [view.view_id for view in _views(inputs, args.views)]})
    return EXIT_OK


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def cmd_evaluate(args, overrides: Dict[str, Any]) -> int:
    if args.pair:
        rendered, reference = (to_float_image(read_ppm(path)) for path in args.pair)
        _print_json({"psnr": psnr(rendered, reference)})
        return EXIT_OK
    if not args.manifest:
        raise UsageError("evaluate needs a manifest or --pair RENDER REFERENCE")

    manifest, inputs, config = _load_scene(args, overrides)
    gaussians = _primitives(args, inputs, config)
    holdout = config.densify.holdout_every
    per_view: Dict[int, Dict[str, Any]] = {}
    for view in inputs.views:
        render = splat_render(gaussians, view, inputs.tracks, config.render, config.threads)
        entry: Dict[str, Any] = {"held_out": inputs.is_held_out(view, holdout), "psnr": psnr(render.color, view.image)}
        truth = load_ground_truth(manifest, view.view_id)
        if truth is not None:
            depth, normals = truth
            _, breakdown = total_loss(render, view.image, depth, normals, config.loss)
            entry["loss"] = breakdown.model_dump()
            mask = inputs.masks.get(args.instance, {}).get(view.view_id) if args.instance is not None else None
            if mask is not None and mask.any():
                try:
                    entry["instance_depth_error"] = mean_depth_error(render.soft_depth, depth, mask)
                except DataError:
                    entry["instance_depth_error"] = None
        per_view[view.view_id] = entry

    summary = {
        "psnr_train": _mean([e["psnr"] for e in per_view.values() if not e["held_out"]]),
        "psnr_held_out": _mean([e["psnr"] for e in per_view.values() if e["held_out"]]),
        "loss": _mean([e["loss"]["total"] for e in per_view.values() if "loss" in e]),
    }
    if args.instance is not None:
        summary["instance"] = args.instance
        summary["instance_depth_error"] = _mean([e["instance_depth_error"] for e in per_view.values()
                                                 if e.get("instance_depth_error") is not None])
    _print_json({"summary": summary, "views": per_view})
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "voxelize": cmd_voxelize,
    "rasterize": cmd_rasterize,
    "flag": cmd_flag,
    "select-views": cmd_select_views,
    "mvs": cmd_mvs,
    "densify": cmd_densify,
    "report": cmd_report,
    "render": cmd_render,
    "evaluate": cmd_evaluate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        level = (args.log_level or os.environ.get("VADGS_LOG_LEVEL") or "INFO").upper()
        if not isinstance(logging.getLevelName(level), int):
            raise UsageError(f"unknown log level '{level}'")
        logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return COMMANDS[args.command](args, parse_overrides(extra))
    except UsageError as exc:
        print(f"vadgs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValidationError) as exc:
        print(f"vadgs: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
