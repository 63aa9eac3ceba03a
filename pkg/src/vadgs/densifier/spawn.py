"""Turning reconstructed patches into points and Gaussian primitives."""
import logging
from typing import Mapping, Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from ..config import DensifyConfig
from ..geometry import CameraView, camera_rays, project_points
from ..mvs import HypothesisMap
from ..splatting import STATIC_INSTANCE, GaussianSet
from ..voxels import PointCloud
from .models import SurfacePoints

logger = logging.getLogger(__name__)

_GRAY = 0.5


def _image_colors(view: CameraView, vs: np.ndarray, us: np.ndarray) -> np.ndarray:
    if view.image is None:
        return np.full((len(us), 3), _GRAY)
    image = np.asarray(view.image, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., None]
    colors = image[vs, us]
    if colors.shape[1] == 1:
        colors = np.repeat(colors, 3, axis=1)
    return np.clip(colors[:, :3], 0.0, 1.0)


def patches_to_points(hyp_map: HypothesisMap, survivors: np.ndarray, view: CameraView, stride: int = 1) -> SurfacePoints:
    """One world-frame point per surviving pixel on the stride lattice"""
    height, width = hyp_map.intrinsics.shape
    lattice = np.zeros((height, width), dtype=bool)
    lattice[::stride, ::stride] = True
    vs, us = np.nonzero(np.asarray(survivors, dtype=bool) & lattice)

    rays = camera_rays(hyp_map.intrinsics)[vs, us]
    depth = hyp_map.depth()[vs, us]
    keep = np.isfinite(depth)
    vs, us, rays, depth = vs[keep], us[keep], rays[keep], depth[keep]

    normals = hyp_map.normals[vs, us]
    facing = np.einsum("nc,nc->n", normals, rays) > 0
    normals[facing] *= -1
    pose = view.world_from_camera
    return SurfacePoints(
        positions=pose.apply(depth[:, None] * rays).reshape(-1, 3),
        normals=pose.rotate(normals).reshape(-1, 3),
        colors=_image_colors(view, vs, us),
    )


def neighbor_spacing(positions: np.ndarray, neighbor_k: int) -> np.ndarray:
    """Mean distance from every point to its ``neighbor_k`` nearest other points (nan when alone)"""
    n = len(positions)
    if n < 2:
        return np.full(n, np.nan)
    k = min(neighbor_k, n - 1)
    distances, _ = cKDTree(positions).query(positions, k=k + 1)
    return distances[:, 1:].mean(axis=1)


def align_z_to(normals: np.ndarray) -> Rotation:
    """Minimal rotations taking +z onto each normal"""
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    z = np.array([0.0, 0.0, 1.0])
    axes = np.cross(z, normals)
    sines = np.linalg.norm(axes, axis=1)
    angles = np.arctan2(sines, normals @ z)
    axes = np.divide(axes, sines[:, None], out=np.zeros_like(axes), where=sines[:, None] > 1e-12)
    flipped = (sines <= 1e-12) & (normals @ z < 0)
    axes[flipped] = (1.0, 0.0, 0.0)
    return Rotation.from_rotvec(axes * angles[:, None])


def spawn_gaussians(points: SurfacePoints, neighbor_k: int = 4, config: Optional[DensifyConfig] = None,
                    instance: int = STATIC_INSTANCE) -> GaussianSet:
    """Flat primitives with scale (rho, rho, rho/10) and the short axis along the point normal"""
    config = config or DensifyConfig()
    if len(points) == 0:
        return GaussianSet.empty()
    rho = neighbor_spacing(points.positions, neighbor_k)
    rho = np.clip(np.nan_to_num(rho, nan=config.scale_max), config.scale_min, config.scale_max)
    xyzw = align_z_to(points.normals).as_quat()
    rotations = xyzw[:, [3, 0, 1, 2]]
    rotations[rotations[:, 0] < 0] *= -1
    spawned = GaussianSet(
        means=np.array(points.positions, dtype=np.float64),
        scales=np.stack([rho, rho, rho / 10.0], axis=1),
        rotations=rotations,
        opacities=np.full(len(points), config.opacity),
        colors=np.clip(points.colors, 0.0, 1.0),
        instances=np.full(len(points), instance, dtype=np.int64),
    )
    logger.debug("Spawned %d primitives (median rho %.4f m)", len(spawned), float(np.median(rho)))
    return spawned


def thin_points(positions: np.ndarray, spacing: float) -> np.ndarray:
    """Row indices keeping the first point of every ``spacing``-sized cell"""
    cells = np.floor(positions / spacing).astype(np.int64)
    _, first = np.unique(cells, axis=0, return_index=True)
    return np.sort(first)


def initialize_from_points(cloud: PointCloud, views: Mapping[int, CameraView], config: Optional[DensifyConfig] = None,
                           spacing: Optional[float] = None, instance: int = STATIC_INSTANCE) -> GaussianSet:
    """Isotropic primitives on (optionally thinned) points, colored from their first source view"""
    config = config or DensifyConfig()
    if len(cloud) == 0:
        return GaussianSet.empty()
    rows = thin_points(cloud.positions, spacing) if spacing else np.arange(len(cloud))
    positions = cloud.positions[rows]

    rho = neighbor_spacing(positions, config.neighbor_k)
    rho = np.clip(np.nan_to_num(rho, nan=config.init_scale_max), config.init_scale_min, config.init_scale_max)

    colors = np.full((len(rows), 3), _GRAY)
    first_views = np.array([min(cloud.source_views[r]) for r in rows], dtype=np.int64)
    for view_id in np.unique(first_views):
        view = views.get(int(view_id))
        if view is None or view.image is None:
            continue
        members = np.flatnonzero(first_views == view_id)
        uv, _ = project_points(view.intrinsics, view.camera_from_world.apply(positions[members]))
        inside = np.isfinite(uv).all(axis=1)
        px = np.rint(np.where(inside, uv[:, 0], -1)).astype(np.int64)
        py = np.rint(np.where(inside, uv[:, 1], -1)).astype(np.int64)
        inside &= (px >= 0) & (px < view.intrinsics.width) & (py >= 0) & (py < view.intrinsics.height)
        colors[members[inside]] = _image_colors(view, py[inside], px[inside])

    initialized = GaussianSet(
        means=positions.copy(),
        scales=np.repeat(rho[:, None], 3, axis=1),
        rotations=np.tile([1.0, 0.0, 0.0, 0.0], (len(rows), 1)),
        opacities=np.full(len(rows), config.init_opacity),
        colors=colors,
        instances=np.full(len(rows), instance, dtype=np.int64),
    )
    logger.info("Initialized %d primitives from %d points", len(initialized), len(cloud))
    return initialized
