from .models import CameraIntrinsics, CameraView, ObjectTrack, Pixel, RigidTransform
from .camera import (
    camera_rays,
    pixel_grid,
    project,
    project_points,
    ray_aabb,
    relative_pose,
    rotation_angle,
    unproject,
    unproject_points,
    world_rays,
)

__all__ = [
    'CameraIntrinsics',
    'CameraView',
    'ObjectTrack',
    'Pixel',
    'RigidTransform',
    'project',
    'unproject',
    'relative_pose',
    'rotation_angle',
    'project_points',
    'unproject_points',
    'pixel_grid',
    'camera_rays',
    'world_rays',
    'ray_aabb',
]
