from .models import DensificationReport, SceneInputs, SurfacePoints
from .spawn import align_z_to, initialize_from_points, neighbor_spacing, patches_to_points, spawn_gaussians, thin_points
from .stages import InstanceStages, PassContext, instance_points
from .pipeline import initial_primitives, run_pipeline

__all__ = [
    'DensificationReport',
    'SceneInputs',
    'SurfacePoints',
    'patches_to_points',
    'spawn_gaussians',
    'initialize_from_points',
    'neighbor_spacing',
    'align_z_to',
    'thin_points',
    'InstanceStages',
    'PassContext',
    'instance_points',
    'initial_primitives',
    'run_pipeline',
]
