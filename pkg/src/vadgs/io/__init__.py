from .formats import (
    read_gaussians_ply, read_index, read_pfm, read_pgm, read_ply, read_points_ply, read_ppm, to_float_image,
    write_gaussians_ply, write_index, write_pfm, write_pgm, write_ply, write_points_ply, write_ppm,
)
from .manifest import (
    CameraRecord, SceneManifest, load_cameras, load_ground_truth, load_gt_instances, load_manifest,
    load_scene_inputs, write_simulated_scene,
)
from .metrics import PSNR_CAP, depth_accuracy, mean_depth_error, normal_accuracy, psnr
from .report_storage import ReportStorage, summarize_reports

__all__ = [
    'read_ply',
    'write_ply',
    'read_points_ply',
    'write_points_ply',
    'read_gaussians_ply',
    'write_gaussians_ply',
    'read_pfm',
    'write_pfm',
    'read_pgm',
    'write_pgm',
    'read_ppm',
    'write_ppm',
    'to_float_image',
    'read_index',
    'write_index',
    'CameraRecord',
    'SceneManifest',
    'load_manifest',
    'load_cameras',
    'load_scene_inputs',
    'load_ground_truth',
    'load_gt_instances',
    'write_simulated_scene',
    'psnr',
    'PSNR_CAP',
    'mean_depth_error',
    'depth_accuracy',
    'normal_accuracy',
    'ReportStorage',
    'summarize_reports',
]
