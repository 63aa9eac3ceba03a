from .models import (
    MISSING_INDEX,
    CoVisibility,
    DepthIndexMap,
    InstanceRecord,
    InstanceStatus,
    PointCloud,
    ProvenancedPoint,
    SourceKind,
    VoxelGrid,
    VoxelRecord,
)
from .grid import cell_of, grid_bounds, voxelize, voxelize_cloud
from .raster import instance_voxels, rasterize_visible
from .discriminant import bad_pixel_fraction, candidate_views, co_visibility, flag_incomplete, flag_instance

__all__ = [
    'MISSING_INDEX',
    'CoVisibility',
    'DepthIndexMap',
    'InstanceRecord',
    'InstanceStatus',
    'PointCloud',
    'ProvenancedPoint',
    'SourceKind',
    'VoxelGrid',
    'VoxelRecord',
    'voxelize',
    'voxelize_cloud',
    'grid_bounds',
    'cell_of',
    'rasterize_visible',
    'instance_voxels',
    'flag_incomplete',
    'flag_instance',
    'bad_pixel_fraction',
    'candidate_views',
    'co_visibility',
]
