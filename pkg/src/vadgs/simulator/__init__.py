from .models import (
    BoxPrimitive,
    GroundTruth,
    LidarSpec,
    PlanePrimitive,
    RigCamera,
    SceneSpec,
    SimulatedScene,
    TrajectorySpec,
    default_rig,
)
from .texture import surface_color, value_noise
from .raycast import Hits, cast, posed
from .generate import (
    build_views,
    check_texture,
    generate,
    gt_depth,
    gt_gaussians,
    lidar_points,
    load_spec,
    object_tracks,
    prior_gaussians,
    render_truth,
    rig_pose,
    sfm_points,
    surface_samples,
    validate_spec,
)

__all__ = [
    'SceneSpec',
    'PlanePrimitive',
    'BoxPrimitive',
    'RigCamera',
    'TrajectorySpec',
    'LidarSpec',
    'GroundTruth',
    'SimulatedScene',
    'default_rig',
    'value_noise',
    'surface_color',
    'Hits',
    'cast',
    'posed',
    'load_spec',
    'validate_spec',
    'generate',
    'gt_depth',
    'gt_gaussians',
    'prior_gaussians',
    'render_truth',
    'build_views',
    'object_tracks',
    'rig_pose',
    'lidar_points',
    'sfm_points',
    'surface_samples',
    'check_texture',
]
