from .models import ConsistencyCheck, ConsistencyResult, HypothesisMap, HypothesisState, PlaneHypothesis
from .plane import depth_from_plane, homography_warp, plane_from_depth_normal, plane_homography, warp_rays
from .cost import WORST_COST, bilinear_sample, ncc_cost, photometric_cost, to_gray, window_offsets
from .patchmatch import patchmatch_iterate
from .consistency import filter_consistent, geometric_consistency
from .dynamic import object_frame_points, object_frame_views

__all__ = [
    'PlaneHypothesis',
    'HypothesisMap',
    'HypothesisState',
    'ConsistencyCheck',
    'ConsistencyResult',
    'plane_from_depth_normal',
    'depth_from_plane',
    'plane_homography',
    'homography_warp',
    'warp_rays',
    'WORST_COST',
    'to_gray',
    'window_offsets',
    'bilinear_sample',
    'ncc_cost',
    'photometric_cost',
    'patchmatch_iterate',
    'geometric_consistency',
    'filter_consistent',
    'object_frame_views',
    'object_frame_points',
]
