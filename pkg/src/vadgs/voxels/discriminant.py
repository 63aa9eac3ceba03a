"""Instance completeness test and candidate-view retrieval."""
import logging
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from ..errors import DimensionMismatch, NoObservingView
from ..geometry import CameraView
from .models import CoVisibility, DepthIndexMap, InstanceRecord, InstanceStatus, VoxelGrid

logger = logging.getLogger(__name__)


def bad_pixel_fraction(mask: np.ndarray, voxel_depth: np.ndarray, gaussian_depth: np.ndarray, tau_rel: float) -> Tuple[int, float]:
    """Number of instance pixels with voxel depth and the fraction of them that are bad"""
    if not (mask.shape == voxel_depth.shape == gaussian_depth.shape):
        raise DimensionMismatch(f"mask {mask.shape}, voxel depth {voxel_depth.shape}, gaussian depth {gaussian_depth.shape}")
    observed = mask.astype(bool) & np.isfinite(voxel_depth)
    total = int(observed.sum())
    if total == 0:
        return 0, 0.0
    rendered = gaussian_depth[observed]
    limit = voxel_depth[observed] * (1.0 + tau_rel)
    bad = ~np.isfinite(rendered) | (rendered > limit)
    return total, float(bad.mean())


def flag_incomplete(
    mask: np.ndarray,
    voxel_depth: DepthIndexMap,
    gaussian_depth: np.ndarray,
    tau_rel: float = 0.1,
    tau_frac: float = 0.3,
) -> InstanceStatus:
    """Classify an instance from its voxel depth versus the Gaussian-rendered depth.

    A pixel is bad when the rendered depth is missing or exceeds the voxel
    depth by more than ``tau_rel``; the instance is incomplete when at least
    ``tau_frac`` of its observed pixels are bad.
    """
    if not 0 < tau_frac <= 1:
        raise ValueError("tau_frac must lie in (0, 1]")
    total, fraction = bad_pixel_fraction(mask, voxel_depth.depth, gaussian_depth, tau_rel)
    if total == 0:
        return InstanceStatus.UNOBSERVED
    status = InstanceStatus.INCOMPLETE if fraction >= tau_frac else InstanceStatus.COMPLETE
    logger.debug("Instance pixels=%d bad=%.3f -> %s", total, fraction, status.value)
    return status


def candidate_views(voxel_ids: Iterable[int], grid: VoxelGrid, views: Sequence[CameraView]) -> Dict[int, CoVisibility]:
    """Per view, the instance voxels whose visibility holds that view and their distances to it"""
    ids = np.array(sorted(int(i) for i in voxel_ids), dtype=np.int64)
    if len(ids) == 0:
        raise NoObservingView("instance maps to no voxel")
    centroids = np.array([grid.cells[i].centroid for i in ids])
    candidates: Dict[int, CoVisibility] = {}
    for view in views:
        seen = np.array([view.view_id in grid.cells[i].visibility for i in ids], dtype=bool)
        if not seen.any():
            continue
        distances = np.linalg.norm(centroids[seen] - view.center, axis=1)
        candidates[view.view_id] = CoVisibility(view.view_id, ids[seen], distances)
    if not candidates:
        raise NoObservingView(f"no view observes any of {len(ids)} instance voxels")
    return candidates


def co_visibility(first: CoVisibility, second: CoVisibility) -> Tuple[int, np.ndarray, np.ndarray]:
    """Voxels seen by both views: (N, distances from first, distances from second)"""
    shared, first_at, second_at = np.intersect1d(first.voxel_ids, second.voxel_ids, return_indices=True)
    return len(shared), first.distances[first_at], second.distances[second_at]


def flag_instance(
    record: InstanceRecord,
    view_id: int,
    voxel_depth: DepthIndexMap,
    gaussian_depth: np.ndarray,
    tau_rel: float = 0.1,
    tau_frac: float = 0.3,
) -> InstanceRecord:
    """Record with its status re-evaluated in one view"""
    mask = record.mask(view_id, voxel_depth.depth.shape)
    status = flag_incomplete(mask, voxel_depth, gaussian_depth, tau_rel, tau_frac)
    return record.model_copy(update={"status": status})
