"""Rigid moving instances are reconstructed in their own object frame."""
import logging
from typing import Dict, List, Sequence

import numpy as np

from ..geometry import CameraView, ObjectTrack
from ..voxels import PointCloud

logger = logging.getLogger(__name__)


def object_frame_views(views: Sequence[CameraView], track: ObjectTrack) -> List[CameraView]:
    """Views re-posed as object_from_world(t) o world_from_camera; images are unchanged"""
    transformed = [
        view.with_pose(track.pose_at(view.timestamp).inverse().compose(view.world_from_camera))
        for view in views
    ]
    logger.debug("Moved %d views into the frame of instance %d", len(transformed), track.instance_id)
    return transformed


def object_frame_points(cloud: PointCloud, track: ObjectTrack, timestamps: Dict[int, float]) -> PointCloud:
    """Points moved into the object frame at the timestamp of their first source view"""
    positions = cloud.positions.copy()
    first_views = np.array([min(views) for views in cloud.source_views], dtype=np.int64)
    for view_id in np.unique(first_views):
        members = first_views == view_id
        object_from_world = track.pose_at(timestamps[int(view_id)]).inverse()
        positions[members] = object_from_world.apply(positions[members])
    return cloud.with_positions(positions)
