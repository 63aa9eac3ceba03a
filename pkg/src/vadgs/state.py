from operator import add
from typing import Annotated, Any, Dict, FrozenSet, List, Optional, Tuple, TypedDict

import numpy as np


class InstanceState(TypedDict, total=False):
    """
    State carried through the per-instance densification graph.
    """
    instance_id: int
    dynamic: bool
    views: Dict[int, Any]                 # working-frame training views (object frame when dynamic)
    grid: Any                             # VoxelGrid in the working frame
    references: List[int]
    cursor: int
    depth_maps: Dict[int, Any]            # reference view id -> DepthIndexMap
    voxel_ids: FrozenSet[int]
    pre_status: Any
    post_status: Any
    selection: Optional[Any]
    hyp_map: Optional[Any]
    consistency: Optional[Any]
    opacities: Optional[np.ndarray]
    opacity_adjusted: int
    pre_loss: Optional[Any]
    post_loss: Optional[Any]
    stage: Optional[str]
    error: Optional[str]
    views_selected: Annotated[List[int], add]
    selections: Annotated[List[Dict[str, Any]], add]
    converged_counts: Annotated[List[int], add]
    surviving_counts: Annotated[List[int], add]
    spawned: Annotated[List[Any], add]
    new_points: Annotated[List[Any], add]
    targets: Annotated[List[Tuple[int, np.ndarray, np.ndarray]], add]
    messages: Annotated[List[str], add]
