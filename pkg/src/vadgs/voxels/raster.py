"""Occlusion-aware depth/index rasterization of a voxel grid (z-buffering)."""
import logging
from typing import Literal, Set

import numpy as np

from ..errors import DimensionMismatch
from ..geometry import CameraView, ray_aabb, world_rays
from .models import MISSING_INDEX, DepthIndexMap, VoxelGrid

logger = logging.getLogger(__name__)

RasterMode = Literal["all_voxels", "view_filtered"]

_CORNERS = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=np.float64)
_CHUNK_PIXELS = 2_000_000
_NEAR = 1e-9


def rasterize_visible(grid: VoxelGrid, view: CameraView, mode: RasterMode = "all_voxels") -> DepthIndexMap:
    """First voxel hit along every pixel ray, with the camera depth of its centroid.

    The stored depth is the centroid's camera-frame z, not its Euclidean
    distance to the viewpoint, so it compares directly with rendered depths.

    Each voxel's candidate pixels come from the bounding box of its projected
    corners (the whole image when the cube straddles the camera plane); every
    candidate is confirmed with an exact ray/box test so the stored index is the
    first voxel the pixel ray enters. Ties on entry distance go to the smaller
    voxel index.
    """
    intr = view.intrinsics
    height, width = intr.height, intr.width
    result = DepthIndexMap.missing(height, width)
    if len(grid) == 0:
        return result

    arrays = grid.arrays()
    selected = np.ones(len(arrays["indices"]), dtype=bool)
    if mode == "view_filtered":
        selected = grid.visible_mask(view.view_id)
    elif mode != "all_voxels":
        raise ValueError(f"unknown rasterization mode '{mode}'")

    indices = arrays["indices"][selected]
    lower = arrays["lower"][selected]
    upper = arrays["upper"][selected]
    centroids = arrays["centroids"][selected]
    if len(indices) == 0:
        return result

    camera_from_world = view.camera_from_world
    corners = lower[:, None, :] + _CORNERS[None] * grid.resolution
    corners_cam = camera_from_world.apply(corners.reshape(-1, 3)).reshape(-1, 8, 3)
    z = corners_cam[..., 2]
    in_front = z > _NEAR
    any_front = in_front.any(axis=1)
    all_front = in_front.all(axis=1)

    safe_z = np.where(in_front, z, 1.0)
    u = intr.fx * corners_cam[..., 0] / safe_z + intr.cx
    v = intr.fy * corners_cam[..., 1] / safe_z + intr.cy
    x0 = np.where(all_front, np.ceil(u.min(axis=1)), 0).clip(0, width)
    x1 = np.where(all_front, np.floor(u.max(axis=1)), width - 1).clip(-1, width - 1)
    y0 = np.where(all_front, np.ceil(v.min(axis=1)), 0).clip(0, height)
    y1 = np.where(all_front, np.floor(v.max(axis=1)), height - 1).clip(-1, height - 1)
    box_w = (x1 - x0 + 1).astype(np.int64)
    box_h = (y1 - y0 + 1).astype(np.int64)
    keep = any_front & (box_w > 0) & (box_h > 0)

    voxels = np.flatnonzero(keep)
    counts = box_w[voxels] * box_h[voxels]
    origin, directions = world_rays(view)
    directions = directions.reshape(-1, 3)

    best_t = np.full(height * width, np.inf)
    best_slot = np.full(height * width, -1, dtype=np.int64)

    start = 0
    while start < len(voxels):
        stop = start + max(1, int(np.searchsorted(np.cumsum(counts[start:]), _CHUNK_PIXELS)))
        chunk = voxels[start:stop]
        chunk_counts = counts[start:stop]
        start = stop

        slot = np.repeat(chunk, chunk_counts)
        offsets = np.arange(chunk_counts.sum()) - np.repeat(np.cumsum(chunk_counts) - chunk_counts, chunk_counts)
        px = x0[slot].astype(np.int64) + offsets % box_w[slot]
        py = y0[slot].astype(np.int64) + offsets // box_w[slot]
        pixel = py * width + px

        hit, t_near = ray_aabb(origin, directions[pixel], lower[slot], upper[slot])
        pixel, t_near, slot = pixel[hit], t_near[hit], slot[hit]
        if len(pixel) == 0:
            continue

        order = np.lexsort((indices[slot], t_near, pixel))
        pixel, t_near, slot = pixel[order], t_near[order], slot[order]
        first = np.ones(len(pixel), dtype=bool)
        first[1:] = pixel[1:] != pixel[:-1]
        pixel, t_near, slot = pixel[first], t_near[first], slot[first]

        current = best_slot[pixel]
        current_index = np.where(current >= 0, indices[current.clip(0)], np.iinfo(np.int64).max)
        better = (t_near < best_t[pixel]) | ((t_near == best_t[pixel]) & (indices[slot] < current_index))
        best_t[pixel[better]] = t_near[better]
        best_slot[pixel[better]] = slot[better]

    covered = best_slot >= 0
    centroid_depth = camera_from_world.apply(centroids)[:, 2]
    depth = result.depth.reshape(-1)
    index = result.index.reshape(-1)
    depth[covered] = centroid_depth[best_slot[covered]]
    index[covered] = indices[best_slot[covered]]
    logger.debug("Rasterized %d voxels into view %d (%s): %d pixels covered",
                 len(indices), view.view_id, mode, int(covered.sum()))
    return result


def instance_voxels(mask: np.ndarray, depth_index: DepthIndexMap) -> Set[int]:
    """Voxels hit by the pixels of an instance mask"""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != depth_index.index.shape:
        raise DimensionMismatch(f"mask {mask.shape} vs depth/index map {depth_index.index.shape}")
    hits = depth_index.index[mask]
    return {int(i) for i in np.unique(hits[hits != MISSING_INDEX])}
