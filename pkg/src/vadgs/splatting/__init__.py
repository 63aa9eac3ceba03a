from ..config import LossWeights, RenderConfig
from .models import STATIC_INSTANCE, GaussianPrimitive, GaussianSet, RenderOutput
from .density import evaluate_density, gaussian_normal, gaussian_normals, pose_gaussians
from .renderer import ProjectedGaussians, composite, project_gaussians, splat_alpha, splat_render
from .losses import LossBreakdown, ssim_map, total_loss
from .opacity import adjust_redundant_opacity

__all__ = [
    'LossWeights',
    'RenderConfig',
    'STATIC_INSTANCE',
    'GaussianPrimitive',
    'GaussianSet',
    'RenderOutput',
    'evaluate_density',
    'gaussian_normal',
    'gaussian_normals',
    'pose_gaussians',
    'ProjectedGaussians',
    'project_gaussians',
    'splat_alpha',
    'composite',
    'splat_render',
    'LossBreakdown',
    'ssim_map',
    'total_loss',
    'adjust_redundant_opacity',
]
