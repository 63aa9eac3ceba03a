"""Deterministic synthetic scenes with exact ground truth.

Images are ray cast per pixel against the analytic primitives (nearest hit,
value-noise texture, flat shading). LiDAR points are exact surface hits of
the configured ray pattern; SfM-like points are surface samples seen by at
least two views. Every random draw comes from a Philox generator keyed on
the scene seed, so a spec always produces the same scene.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.ndimage import uniform_filter

from ..config import DensifyConfig
from ..densifier import align_z_to, initialize_from_points
from ..errors import InvalidSpec
from ..geometry import CameraView, ObjectTrack, RigidTransform, world_rays
from ..mvs import object_frame_points
from ..splatting import STATIC_INSTANCE, GaussianSet
from ..voxels import PointCloud, SourceKind
from .models import BoxPrimitive, GroundTruth, PlanePrimitive, SceneSpec, SimulatedScene
from .raycast import Hits, box_face_uv, cast, flat_shade, posed
from .texture import surface_color

logger = logging.getLogger(__name__)

_TEXTURE_WINDOW = 11
_MIN_TEXTURE_VARIANCE = 1e-12
_SFM_DEPTH_TOLERANCE = 0.02
_PRIOR_OPACITY = 0.9


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def load_spec(path) -> SceneSpec:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidSpec(str(path), f"cannot read scene spec: {exc}") from exc
    try:
        return SceneSpec.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise InvalidSpec(".".join(str(p) for p in first["loc"]) or "spec", first["msg"]) from exc


def validate_spec(spec: SceneSpec) -> None:
    if not spec.rig:
        raise InvalidSpec("rig", "at least one camera is required")
    if len({cam.camera_id for cam in spec.rig}) != len(spec.rig):
        raise InvalidSpec("rig", "camera ids must be unique")
    by_instance: Dict[int, List[int]] = {}
    for index, prim in enumerate(spec.primitives):
        if min(prim.size) <= 0:
            raise InvalidSpec(f"primitives.{index}.size", "extents must be positive")
        by_instance.setdefault(prim.instance_id, []).append(index)
    for instance_id, members in by_instance.items():
        if any(spec.primitives[i].dynamic for i in members) and len(members) > 1:
            raise InvalidSpec(f"primitives.{members[1]}.instance_id",
                              f"dynamic instance {instance_id} must consist of a single primitive")


def rig_pose(spec: SceneSpec, frame: int) -> RigidTransform:
    """world_from_rig at a frame"""
    trajectory = spec.trajectory
    t = frame * trajectory.period
    moved = trajectory.start.translation_vector + np.asarray(trajectory.velocity) * t
    return RigidTransform(rotation=trajectory.start.rotation, translation=tuple(float(x) for x in moved))


def build_views(spec: SceneSpec) -> List[CameraView]:
    views = []
    for frame in range(spec.trajectory.frames):
        world_from_rig = rig_pose(spec, frame)
        for index, camera in enumerate(spec.rig):
            views.append(CameraView(
                view_id=spec.view_id(frame, index),
                camera_id=camera.camera_id,
                timestamp=float(frame * spec.trajectory.period),
                frame_index=frame,
                intrinsics=camera.intrinsics,
                world_from_camera=world_from_rig.compose(camera.rig_from_camera),
            ))
    return views


def object_tracks(spec: SceneSpec) -> Dict[int, ObjectTrack]:
    timestamps = tuple(float(t) for t in spec.timestamps)
    return {
        prim.instance_id: ObjectTrack(instance_id=prim.instance_id, timestamps=timestamps,
                                      poses=tuple(posed(prim, t) for t in timestamps))
        for prim in spec.primitives if prim.dynamic
    }


def _cast_view(spec: SceneSpec, view: CameraView) -> Hits:
    origin, directions = world_rays(view)
    return cast(spec.primitives, view.timestamp, origin, directions)


def _truth_from_hits(spec: SceneSpec, view: CameraView, hits: Hits):
    missed = ~np.isfinite(hits.t)
    image = np.where(missed[..., None], np.asarray(spec.sky_color), hits.colors)
    normals = view.camera_from_world.rotate(hits.normals.reshape(-1, 3)).reshape(hits.normals.shape)
    normals[missed] = 0.0
    return image, hits.t, normals, hits.instances


def render_truth(spec: SceneSpec, view: CameraView) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(image, depth, camera-frame normals, instance ids) of one view"""
    return _truth_from_hits(spec, view, _cast_view(spec, view))


def gt_depth(spec: SceneSpec, view: CameraView) -> np.ndarray:
    return _cast_view(spec, view).t


def check_texture(view: CameraView, image: np.ndarray, instances: np.ndarray) -> None:
    """Every 11x11 window fully on geometry must have nonzero intensity variance"""
    gray = image.mean(axis=-1)
    covered = uniform_filter((instances >= 0).astype(np.float64), _TEXTURE_WINDOW, mode="constant") > 1 - 1e-9
    mean = uniform_filter(gray, _TEXTURE_WINDOW)
    variance = uniform_filter(gray * gray, _TEXTURE_WINDOW) - mean * mean
    flat = covered & (variance <= _MIN_TEXTURE_VARIANCE)
    if flat.any():
        v, u = np.argwhere(flat)[0]
        raise InvalidSpec("primitives.contrast", f"textureless window at ({u}, {v}) in view {view.view_id}")


def _lidar_directions(spec: SceneSpec, frame: int) -> np.ndarray:
    lidar = spec.lidar
    n = lidar.rays_per_frame
    az_lo, az_hi = np.radians(lidar.azimuth)
    el_lo, el_hi = np.radians(lidar.elevation)
    if lidar.pattern == "grid":
        span = max(az_hi - az_lo, 1e-6) / max(el_hi - el_lo, 1e-6)
        n_az = max(1, int(round(np.sqrt(n * span))))
        n_el = max(1, n // n_az)
        el, az = np.meshgrid(np.linspace(el_lo, el_hi, n_el), np.linspace(az_lo, az_hi, n_az), indexing="ij")
        az, el = az.ravel(), el.ravel()
    else:
        rng = _rng(spec.seed, frame, 1)
        az, el = rng.uniform(az_lo, az_hi, n), rng.uniform(el_lo, el_hi, n)
    return np.stack([np.cos(el) * np.sin(az), -np.sin(el), np.cos(el) * np.cos(az)], axis=1)


def lidar_points(spec: SceneSpec, views: Sequence[CameraView]) -> Tuple[PointCloud, np.ndarray]:
    """Exact surface hits per frame, each tagged with the frame camera looking closest to it"""
    by_frame: Dict[int, List[CameraView]] = {}
    for view in views:
        by_frame.setdefault(view.frame_index, []).append(view)
    positions, view_ids, primitives = [], [], []
    for frame in range(spec.trajectory.frames):
        if spec.lidar.rays_per_frame == 0:
            break
        world_from_lidar = rig_pose(spec, frame).compose(spec.lidar.rig_from_lidar)
        directions = world_from_lidar.rotate(_lidar_directions(spec, frame))
        origin = world_from_lidar.translation_vector
        hits = cast(spec.primitives, frame * spec.trajectory.period, origin, directions)
        keep = np.isfinite(hits.t) & (hits.t <= spec.lidar.max_range)
        if not keep.any():
            continue
        frame_views = sorted(by_frame[frame], key=lambda v: v.view_id)
        forward = np.array([v.world_from_camera.rotate([0.0, 0.0, 1.0]) for v in frame_views])
        nearest = np.argmax(directions[keep] @ forward.T, axis=1)
        positions.append(origin + hits.t[keep, None] * directions[keep])
        view_ids.append(np.array([frame_views[i].view_id for i in nearest], dtype=np.int64))
        primitives.append(hits.primitives[keep])
    if not positions:
        return PointCloud.empty(), np.zeros(0, dtype=np.int64)
    ids = np.concatenate(view_ids)
    cloud = PointCloud(np.concatenate(positions), np.full(len(ids), int(SourceKind.LIDAR), dtype=np.uint8),
                       tuple(frozenset({int(i)}) for i in ids))
    return cloud, np.concatenate(primitives)


def sfm_points(spec: SceneSpec, views: Sequence[CameraView], depths: Dict[int, np.ndarray],
               primitive_maps: Dict[int, np.ndarray]) -> Tuple[PointCloud, np.ndarray]:
    """Random surface samples kept when the ground-truth depth test finds them in two or more views"""
    if spec.sfm_points_per_view == 0:
        return PointCloud.empty(), np.zeros(0, dtype=np.int64)
    samples, primitives = [], []
    for view in views:
        vs, us = np.nonzero(np.isfinite(depths[view.view_id]))
        if len(us) == 0:
            continue
        rng = _rng(spec.seed, view.view_id, 2)
        picked = np.sort(rng.choice(len(us), size=min(spec.sfm_points_per_view, len(us)), replace=False))
        origin, directions = world_rays(view)
        depth = depths[view.view_id][vs[picked], us[picked]]
        samples.append(origin + depth[:, None] * directions[vs[picked], us[picked]])
        primitives.append(primitive_maps[view.view_id][vs[picked], us[picked]])
    if not samples:
        return PointCloud.empty(), np.zeros(0, dtype=np.int64)
    positions = np.concatenate(samples)
    observers = np.zeros((len(positions), len(views)), dtype=bool)
    for column, view in enumerate(views):
        camera = view.camera_from_world.apply(positions)
        z = camera[:, 2]
        intr = view.intrinsics
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.rint(intr.fx * camera[:, 0] / z + intr.cx)
            v = np.rint(intr.fy * camera[:, 1] / z + intr.cy)
        seen = (z > 0) & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
        ui, vi = np.where(seen, u, 0).astype(np.int64), np.where(seen, v, 0).astype(np.int64)
        seen &= np.abs(depths[view.view_id][vi, ui] - z) <= _SFM_DEPTH_TOLERANCE * z
        observers[:, column] = seen
    keep = observers.sum(axis=1) >= 2
    ids = np.array([v.view_id for v in views])
    cloud = PointCloud(positions[keep], np.full(int(keep.sum()), int(SourceKind.SFM), dtype=np.uint8),
                       tuple(frozenset(int(i) for i in ids[row]) for row in observers[keep]))
    return cloud, np.concatenate(primitives)[keep]


def surface_samples(prim, spacing: float):
    """Local-frame points on a primitive's surface on a ``spacing`` lattice: points, normals, u, v"""
    def ticks(extent: float) -> np.ndarray:
        count = max(1, int(np.floor(extent / spacing)))
        return (np.arange(count) + 0.5) * (extent / count) - extent / 2.0

    if isinstance(prim, PlanePrimitive):
        y, x = np.meshgrid(ticks(prim.size[1]), ticks(prim.size[0]), indexing="ij")
        points = np.stack([x.ravel(), y.ravel(), np.zeros(x.size)], axis=1)
        normals = np.tile([0.0, 0.0, 1.0], (len(points), 1))
        return points, normals, points[:, 0], points[:, 1]

    half = np.asarray(prim.size) / 2.0
    all_points, all_normals, all_u, all_v = [], [], [], []
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        second, first = np.meshgrid(ticks(prim.size[others[1]]), ticks(prim.size[others[0]]), indexing="ij")
        for sign in (-1.0, 1.0):
            points = np.zeros((first.size, 3))
            points[:, axis] = sign * half[axis]
            points[:, others[0]] = first.ravel()
            points[:, others[1]] = second.ravel()
            normals = np.zeros_like(points)
            normals[:, axis] = sign
            u, v = box_face_uv(points, np.full(len(points), axis), np.full(len(points), sign))
            all_points.append(points)
            all_normals.append(normals)
            all_u.append(u)
            all_v.append(v)
    return np.concatenate(all_points), np.concatenate(all_normals), np.concatenate(all_u), np.concatenate(all_v)


def _surface_gaussians(prim, spacing: float) -> GaussianSet:
    points, normals, u, v = surface_samples(prim, spacing)
    pose = prim.pose
    world_normals = pose.rotate(normals)
    colors = surface_color(u, v, prim.texture_seed, prim.texture_scale, prim.base_color, prim.contrast)
    colors = np.clip(colors * flat_shade(world_normals)[:, None], 0.0, 1.0)
    if prim.dynamic:
        means, frame_normals, instance = points, normals, prim.instance_id
    else:
        means, frame_normals, instance = pose.apply(points), world_normals, STATIC_INSTANCE
    xyzw = align_z_to(frame_normals).as_quat()
    return GaussianSet(
        means=np.asarray(means, dtype=np.float64).reshape(-1, 3),
        scales=np.tile([spacing, spacing, spacing / 10.0], (len(points), 1)),
        rotations=xyzw[:, [3, 0, 1, 2]],
        opacities=np.full(len(points), _PRIOR_OPACITY),
        colors=colors,
        instances=np.full(len(points), instance, dtype=np.int64),
    )


def gt_gaussians(spec: SceneSpec, spacing: Optional[float] = None) -> GaussianSet:
    """Dense surface sampling of every primitive; dynamic ones in their object frame"""
    spacing = spacing or spec.surface_spacing
    result = GaussianSet.empty()
    for prim in spec.primitives:
        result = result.concatenate(_surface_gaussians(prim, spacing))
    return result


def prior_gaussians(spec: SceneSpec, truth: GroundTruth, views: Sequence[CameraView]) -> GaussianSet:
    """Prior primitive set: surface sampling, sparse point Gaussians or nothing, per primitive"""
    points = truth.points
    by_id = {v.view_id: v for v in views}
    timestamps = {v.view_id: v.timestamp for v in views}
    result = GaussianSet.empty()
    for index, prim in enumerate(spec.primitives):
        if prim.prior == "surface":
            result = result.concatenate(_surface_gaussians(prim, spec.surface_spacing))
        elif prim.prior == "points":
            rows = np.flatnonzero(truth.point_primitives == index)
            own = PointCloud(points.positions[rows], points.kinds[rows], tuple(points.source_views[r] for r in rows))
            tag = STATIC_INSTANCE
            if prim.dynamic:
                own = object_frame_points(own, truth.tracks[prim.instance_id], timestamps)
                tag = prim.instance_id
            result = result.concatenate(initialize_from_points(own, by_id, DensifyConfig(), instance=tag))
    return result


def generate(spec: SceneSpec, threads: Optional[int] = None) -> SimulatedScene:
    validate_spec(spec)
    views = build_views(spec)

    def render(view: CameraView):
        hits = _cast_view(spec, view)
        rendered = _truth_from_hits(spec, view, hits)
        check_texture(view, rendered[0], rendered[3])
        return rendered, hits.primitives

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rendered = list(pool.map(render, views))
    else:
        rendered = [render(view) for view in views]

    truth = GroundTruth(tracks=object_tracks(spec))
    primitive_maps: Dict[int, np.ndarray] = {}
    with_images = []
    for view, ((image, depth, normals, instances), primitives) in zip(views, rendered):
        with_images.append(view.model_copy(update={"image": image}))
        truth.depth[view.view_id] = depth
        truth.normals[view.view_id] = normals
        truth.instances[view.view_id] = instances
        primitive_maps[view.view_id] = primitives
        for instance_id in np.unique(instances[instances >= 0]):
            truth.masks.setdefault(int(instance_id), {})[view.view_id] = instances == instance_id

    truth.lidar, lidar_rows = lidar_points(spec, views)
    truth.sfm, sfm_rows = sfm_points(spec, views, truth.depth, primitive_maps)
    truth.point_primitives = np.concatenate([lidar_rows, sfm_rows]).astype(np.int64)

    scene = SimulatedScene(spec=spec, views=with_images, truth=truth)
    scene.priors = prior_gaussians(spec, truth, with_images)
    logger.info("Generated scene '%s': %d views, %d lidar + %d sfm points, %d prior primitives",
                spec.name, len(views), len(truth.lidar), len(truth.sfm), len(scene.priors))
    return scene
