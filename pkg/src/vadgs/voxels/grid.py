import logging
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from ..errors import EmptyInput
from .models import PointCloud, ProvenancedPoint, VoxelGrid, VoxelRecord

logger = logging.getLogger(__name__)


def grid_bounds(positions: np.ndarray, resolution: float, padding: int = 1) -> Tuple[np.ndarray, Tuple[int, int, int]]:
    """Origin snapped to the resolution lattice and dims covering every position"""
    if len(positions) == 0:
        raise EmptyInput("cannot size a voxel grid from an empty point cloud")
    lo = np.floor(positions.min(axis=0) / resolution) - padding
    hi = np.floor(positions.max(axis=0) / resolution) + padding
    dims = tuple(int(d) for d in (hi - lo + 1))
    return lo * resolution, dims


def voxelize(
    points: Union[PointCloud, Sequence[ProvenancedPoint]],
    origin,
    dims: Tuple[int, int, int],
    resolution: float,
) -> VoxelGrid:
    """Assign points to half-open cells [k*r, (k+1)*r) and merge their provenance"""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    cloud = points if isinstance(points, PointCloud) else PointCloud.from_points(list(points))
    origin = np.asarray(origin, dtype=np.float64)
    dims = tuple(int(d) for d in dims)

    coords = np.floor((cloud.positions - origin) / resolution).astype(np.int64)
    inside = np.all((coords >= 0) & (coords < np.asarray(dims)), axis=1)
    if not inside.any():
        raise EmptyInput("no point falls inside the voxel grid")

    members = np.flatnonzero(inside)
    linear = np.ravel_multi_index(tuple(coords[members].T), dims)
    keys, inverse, counts = np.unique(linear, return_inverse=True, return_counts=True)
    sums = np.zeros((len(keys), 3))
    np.add.at(sums, inverse, cloud.positions[members])

    visibility: Dict[int, set] = {slot: set() for slot in range(len(keys))}
    for slot, point in zip(inverse, members):
        visibility[slot].update(cloud.source_views[point])

    cells = {
        int(key): VoxelRecord(
            centroid=sums[slot] / counts[slot],
            point_count=int(counts[slot]),
            visibility=frozenset(visibility[slot]),
        )
        for slot, key in enumerate(keys)
    }
    logger.debug("Voxelized %d of %d points into %d cells (r=%.3f)", len(members), len(cloud), len(cells), resolution)
    return VoxelGrid(origin=origin, resolution=float(resolution), dims=dims, cells=cells)


def voxelize_cloud(cloud: PointCloud, resolution: float, padding: int = 1) -> VoxelGrid:
    """Voxelize with bounds derived from the cloud itself"""
    origin, dims = grid_bounds(cloud.positions, resolution, padding)
    return voxelize(cloud, origin, dims, resolution)


def cell_of(grid: VoxelGrid, position) -> int:
    """Linear index of the cell holding ``position`` (no bounds check on occupancy)"""
    coords = np.floor((np.asarray(position, dtype=np.float64) - grid.origin) / grid.resolution).astype(np.int64)
    return int(np.ravel_multi_index(tuple(coords), grid.dims))
