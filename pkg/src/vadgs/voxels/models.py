from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

MISSING_INDEX = -1


class SourceKind(IntEnum):
    """Where a point came from; the value is the PLY ``source_kind`` byte"""
    LIDAR = 0
    SFM = 1
    MVS = 2


class InstanceStatus(str, Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    UNOBSERVED = "unobserved"


class ProvenancedPoint(BaseModel):
    """A world-frame point with the views it was observed from"""
    model_config = ConfigDict(frozen=True)

    position: Tuple[float, float, float]
    source_views: FrozenSet[int]
    source_kind: SourceKind

    @model_validator(mode="after")
    def _provenance_matches_kind(self) -> "ProvenancedPoint":
        if self.source_kind == SourceKind.LIDAR and len(self.source_views) != 1:
            raise ValueError("lidar points carry exactly one view id")
        if self.source_kind == SourceKind.SFM and len(self.source_views) < 2:
            raise ValueError("sfm points are triangulated from at least two views")
        if self.source_kind == SourceKind.MVS and len(self.source_views) < 1:
            raise ValueError("mvs points carry their reference view")
        return self


@dataclass(frozen=True)
class PointCloud:
    """Column storage of provenanced points"""
    positions: np.ndarray                 # (N, 3) float64, world frame
    kinds: np.ndarray                     # (N,) uint8 SourceKind values
    source_views: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        if len(self.positions) != len(self.kinds) or len(self.kinds) != len(self.source_views):
            raise ValueError("point cloud columns differ in length")

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def from_points(cls, points: Sequence[ProvenancedPoint]) -> "PointCloud":
        if not points:
            return cls.empty()
        return cls(
            positions=np.array([p.position for p in points], dtype=np.float64),
            kinds=np.array([int(p.source_kind) for p in points], dtype=np.uint8),
            source_views=tuple(p.source_views for p in points),
        )

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)), np.zeros(0, dtype=np.uint8), ())

    def to_points(self) -> List[ProvenancedPoint]:
        return [
            ProvenancedPoint(position=tuple(pos), source_views=views, source_kind=SourceKind(int(kind)))
            for pos, kind, views in zip(self.positions, self.kinds, self.source_views)
        ]

    def concatenate(self, other: "PointCloud") -> "PointCloud":
        return PointCloud(
            positions=np.concatenate([self.positions, other.positions]),
            kinds=np.concatenate([self.kinds, other.kinds]),
            source_views=self.source_views + other.source_views,
        )

    def with_positions(self, positions: np.ndarray) -> "PointCloud":
        return PointCloud(np.asarray(positions, dtype=np.float64), self.kinds, self.source_views)


@dataclass(frozen=True)
class VoxelRecord:
    centroid: np.ndarray          # (3,) mean of the member points
    point_count: int
    visibility: FrozenSet[int]


@dataclass(frozen=True)
class VoxelGrid:
    """Sparse occupancy grid; cells are keyed by C-order linear index"""
    origin: np.ndarray
    resolution: float
    dims: Tuple[int, int, int]
    cells: Dict[int, VoxelRecord]
    _arrays: Dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.cells)

    def cell_coords(self, indices) -> np.ndarray:
        """(i, j, k) integer coordinates of linear indices, shape (N, 3)"""
        return np.stack(np.unravel_index(np.asarray(indices, dtype=np.int64), self.dims), axis=-1)

    def cell_bounds(self, indices) -> Tuple[np.ndarray, np.ndarray]:
        lower = self.origin + self.cell_coords(indices) * self.resolution
        return lower, lower + self.resolution

    def arrays(self) -> Dict[str, np.ndarray]:
        """Sorted indices, centroids, counts and cube bounds as arrays (computed once)"""
        if not self._arrays:
            indices = np.array(sorted(self.cells), dtype=np.int64)
            lower, upper = self.cell_bounds(indices)
            self._arrays.update(
                indices=indices,
                centroids=np.array([self.cells[i].centroid for i in indices]).reshape(-1, 3),
                counts=np.array([self.cells[i].point_count for i in indices], dtype=np.int64),
                lower=lower.reshape(-1, 3),
                upper=upper.reshape(-1, 3),
            )
        return self._arrays

    def visible_mask(self, view_id: int) -> np.ndarray:
        """Boolean mask over ``arrays()['indices']`` of cells whose visibility holds ``view_id``"""
        indices = self.arrays()["indices"]
        return np.array([view_id in self.cells[i].visibility for i in indices], dtype=bool)


@dataclass(frozen=True)
class DepthIndexMap:
    """Per-pixel first-hit depth (inf = MISSING) and voxel index (-1 = MISSING)"""
    depth: np.ndarray
    index: np.ndarray

    def __post_init__(self):
        if self.depth.shape != self.index.shape:
            raise ValueError("depth and index rasters differ in shape")

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.index != MISSING_INDEX

    @classmethod
    def missing(cls, height: int, width: int) -> "DepthIndexMap":
        return cls(np.full((height, width), np.inf), np.full((height, width), MISSING_INDEX, dtype=np.int64))


class InstanceRecord(BaseModel):
    """A segmented scene element and its masks in every view"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    instance_id: int
    masks: Dict[int, np.ndarray] = {}
    voxel_ids: FrozenSet[int] = frozenset()
    status: InstanceStatus = InstanceStatus.UNOBSERVED

    def mask(self, view_id: int, shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
        if view_id in self.masks:
            return self.masks[view_id]
        if shape is None:
            raise KeyError(view_id)
        return np.zeros(shape, dtype=bool)


@dataclass(frozen=True)
class CoVisibility:
    """Voxels of an instance visible from one view, with viewpoint distances"""
    view_id: int
    voxel_ids: np.ndarray
    distances: np.ndarray

    @property
    def count(self) -> int:
        return len(self.voxel_ids)
