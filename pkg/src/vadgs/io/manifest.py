"""Scene manifests: one JSON file pointing at every input of a run.

Paths are relative to the manifest's directory. Per-view files are named by
patterns formatted with ``view_id`` (and ``instance_id`` for masks).
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..densifier import SceneInputs
from ..errors import FormatError, ManifestError
from ..geometry import CameraIntrinsics, CameraView, ObjectTrack, RigidTransform
from ..simulator import SimulatedScene
from .formats import (
    read_gaussians_ply, read_index, read_pfm, read_pgm, read_points_ply, read_ppm, to_float_image,
    write_gaussians_ply, write_index, write_pfm, write_pgm, write_points_ply, write_ppm,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class CameraRecord(BaseModel):
    """One entry of the cameras JSON"""
    model_config = ConfigDict(extra="forbid")

    view_id: int
    camera_id: int = 0
    timestamp: float = 0.0
    frame_index: int = 0
    intrinsics: CameraIntrinsics
    world_from_camera: RigidTransform = RigidTransform()

    @classmethod
    def from_view(cls, view: CameraView) -> "CameraRecord":
        return cls(**view.model_dump(exclude={"image"}))


class SceneManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cameras: str = "cameras.json"
    images: str = "images/{view_id:04d}.ppm"
    points: str = "points.ply"
    provenance: str = "points_provenance.json"
    masks: Optional[str] = "masks/{instance_id:03d}_{view_id:04d}.pgm"
    instances: List[int] = []
    tracks: Optional[str] = None
    priors: Optional[str] = None
    gt_depth: Optional[str] = None
    gt_normals: Optional[str] = None
    gt_instances: Optional[str] = None
    overrides: Dict[str, Any] = {}
    base_dir: Path = Field(Path("."), exclude=True)

    def resolve(self, relative: str, **keys: int) -> Path:
        return self.base_dir / relative.format(**keys)


def _write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def _read_json(path: Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise ManifestError("missing file", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON ({exc.msg} at line {exc.lineno})", str(path)) from exc


def load_manifest(path) -> SceneManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    payload = _read_json(path)
    try:
        manifest = SceneManifest.model_validate(payload)
    except ValidationError as exc:
        raise ManifestError(f"invalid manifest ({exc.errors()[0]['msg']})", str(path)) from exc
    return manifest.model_copy(update={"base_dir": path.parent})


def load_cameras(manifest: SceneManifest, with_images: bool = True) -> List[CameraView]:
    path = manifest.resolve(manifest.cameras)
    try:
        records = [CameraRecord.model_validate(entry) for entry in _read_json(path)]
    except (ValidationError, TypeError) as exc:
        raise ManifestError(f"invalid camera entry ({exc})", str(path)) from exc
    ids = [record.view_id for record in records]
    if len(set(ids)) != len(ids):
        raise ManifestError("duplicate view ids", str(path))

    views = []
    for record in sorted(records, key=lambda r: r.view_id):
        image, image_path = None, path
        if with_images:
            image_path = manifest.resolve(manifest.images, view_id=record.view_id)
            if not image_path.exists():
                raise ManifestError("missing image", str(image_path))
            image = to_float_image(read_ppm(image_path))
        try:
            views.append(CameraView(image=image, **record.model_dump()))
        except ValidationError as exc:
            raise ManifestError(f"view {record.view_id}: {exc.errors()[0]['msg']}", str(image_path)) from exc
    return views


def _load_masks(manifest: SceneManifest, view_ids: List[int]) -> Dict[int, Dict[int, np.ndarray]]:
    masks: Dict[int, Dict[int, np.ndarray]] = {}
    if not manifest.masks:
        return masks
    for instance_id in manifest.instances:
        masks[instance_id] = {}
        for view_id in view_ids:
            path = manifest.resolve(manifest.masks, instance_id=instance_id, view_id=view_id)
            if path.exists():
                masks[instance_id][view_id] = read_pgm(path) > 0
    return masks


def load_scene_inputs(manifest: SceneManifest) -> SceneInputs:
    """Read and cross-check every file a manifest references"""
    views = load_cameras(manifest)
    view_ids = [view.view_id for view in views]
    known = set(view_ids)

    points_path = manifest.resolve(manifest.points)
    provenance_path = manifest.resolve(manifest.provenance)
    if not points_path.exists():
        raise ManifestError("missing point cloud", str(points_path))
    provenance = _read_json(provenance_path)
    source_views = provenance.get("source_views") if isinstance(provenance, dict) else None
    if not isinstance(source_views, list):
        raise ManifestError("provenance needs a 'source_views' list", str(provenance_path))
    try:
        points = read_points_ply(points_path, source_views)
    except FormatError as exc:
        raise ManifestError(str(exc), str(points_path)) from exc
    unknown = set().union(*points.source_views) - known if len(points) else set()
    if unknown:
        raise ManifestError(f"points reference unknown views {sorted(unknown)}", str(provenance_path))

    masks = _load_masks(manifest, view_ids)
    for instance_id, per_view in masks.items():
        for view_id, mask in per_view.items():
            if mask.shape != views[view_ids.index(view_id)].intrinsics.shape:
                raise ManifestError(f"mask of instance {instance_id} has shape {mask.shape}",
                                    str(manifest.resolve(manifest.masks, instance_id=instance_id, view_id=view_id)))

    tracks: Dict[int, ObjectTrack] = {}
    if manifest.tracks:
        tracks_path = manifest.resolve(manifest.tracks)
        try:
            for entry in _read_json(tracks_path):
                track = ObjectTrack.model_validate(entry)
                tracks[track.instance_id] = track
        except ValidationError as exc:
            raise ManifestError(f"invalid track ({exc.errors()[0]['msg']})", str(tracks_path)) from exc
        stray = set(tracks) - set(manifest.instances)
        if stray:
            raise ManifestError(f"tracks for undeclared instances {sorted(stray)}", str(tracks_path))

    priors = None
    if manifest.priors:
        priors_path = manifest.resolve(manifest.priors)
        if not priors_path.exists():
            raise ManifestError("missing prior primitives", str(priors_path))
        priors = read_gaussians_ply(priors_path)

    logger.info("Loaded %d views, %d points, %d instances (%d dynamic) from %s",
                len(views), len(points), len(manifest.instances), len(tracks), manifest.base_dir)
    return SceneInputs(views=views, points=points, masks=masks, tracks=tracks, priors=priors)


def load_ground_truth(manifest: SceneManifest, view_id: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """(depth, camera-frame normals) of one view, or None when the manifest has none"""
    if not manifest.gt_depth or not manifest.gt_normals:
        return None
    depth_path = manifest.resolve(manifest.gt_depth, view_id=view_id)
    normal_path = manifest.resolve(manifest.gt_normals, view_id=view_id)
    for path in (depth_path, normal_path):
        if not path.exists():
            raise ManifestError("missing ground truth", str(path))
    return read_pfm(depth_path).astype(np.float64), read_pfm(normal_path).astype(np.float64)


def load_gt_instances(manifest: SceneManifest, view_id: int) -> Optional[np.ndarray]:
    if not manifest.gt_instances:
        return None
    return read_index(manifest.resolve(manifest.gt_instances, view_id=view_id))


def write_simulated_scene(scene: SimulatedScene, outdir) -> Path:
    """Write a simulated scene as a manifest directory; returns the manifest path"""
    outdir = Path(outdir)
    truth = scene.truth
    instances = sorted(set(truth.masks) | set(truth.tracks))
    manifest = SceneManifest(
        instances=instances,
        tracks="tracks.json" if truth.tracks else None,
        priors="priors.ply" if scene.priors is not None else None,
        gt_depth="gt/depth_{view_id:04d}.pfm",
        gt_normals="gt/normal_{view_id:04d}.pfm",
        gt_instances="gt/instance_{view_id:04d}.idx",
        base_dir=outdir,
    )

    _write_json(outdir / manifest.cameras, [CameraRecord.from_view(view).model_dump(mode="json") for view in scene.views])
    for view in scene.views:
        write_ppm(manifest.resolve(manifest.images, view_id=view.view_id), view.image)
        write_pfm(manifest.resolve(manifest.gt_depth, view_id=view.view_id), truth.depth[view.view_id])
        write_pfm(manifest.resolve(manifest.gt_normals, view_id=view.view_id), truth.normals[view.view_id])
        write_index(manifest.resolve(manifest.gt_instances, view_id=view.view_id), truth.instances[view.view_id])
        for instance_id in instances:
            mask = truth.masks[instance_id].get(view.view_id)
            if mask is not None:
                write_pgm(manifest.resolve(manifest.masks, instance_id=instance_id, view_id=view.view_id), mask)

    points = truth.points
    write_points_ply(manifest.resolve(manifest.points), points)
    _write_json(manifest.resolve(manifest.provenance),
                {"source_views": [sorted(int(v) for v in views) for views in points.source_views]})
    if truth.tracks:
        _write_json(manifest.resolve(manifest.tracks),
                    [truth.tracks[i].model_dump(mode="json") for i in sorted(truth.tracks)])
    if scene.priors is not None:
        write_gaussians_ply(manifest.resolve(manifest.priors), scene.priors)
    _write_json(outdir / "scene_spec.json", scene.spec.model_dump(mode="json"))

    path = outdir / MANIFEST_NAME
    _write_json(path, manifest.model_dump(mode="json"))
    logger.info("Wrote scene '%s' with %d views to %s", scene.spec.name, len(scene.views), outdir)
    return path
