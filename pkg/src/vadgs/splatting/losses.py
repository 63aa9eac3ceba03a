"""Four-term evaluation loss between a render and observed / reconstructed targets."""
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.ndimage import gaussian_filter

from ..config import LossWeights
from ..errors import DimensionMismatch, NoValidPixels
from .models import RenderOutput

_SSIM_SIGMA = 1.5
_SSIM_TRUNCATE = 3.5  # 11x11 support
_C1 = 0.01 ** 2
_C2 = 0.03 ** 2


class LossBreakdown(BaseModel):
    """Per-term values of the evaluation loss"""
    total: float
    color: float
    l1: float
    ssim: float
    normal: float
    hard: float
    soft: float
    pixels: int


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel SSIM with an 11x11 Gaussian window, averaged over channels"""
    a = np.atleast_3d(np.asarray(a, dtype=np.float64))
    b = np.atleast_3d(np.asarray(b, dtype=np.float64))

    def blur(x):
        return np.stack([gaussian_filter(x[..., ch], _SSIM_SIGMA, truncate=_SSIM_TRUNCATE, mode="reflect")
                         for ch in range(x.shape[-1])], axis=-1)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b
    numerator = (2 * mu_a * mu_b + _C1) * (2 * cov + _C2)
    denominator = (mu_a * mu_a + mu_b * mu_b + _C1) * (var_a + var_b + _C2)
    return (numerator / denominator).mean(axis=-1)


def _masked_mean(values: np.ndarray, valid: np.ndarray) -> float:
    return float(values[valid].mean()) if valid.any() else 0.0


def total_loss(
    render: RenderOutput,
    observed: np.ndarray,
    mvs_depth: np.ndarray,
    mvs_normal: np.ndarray,
    weights: Optional[LossWeights] = None,
    mask: Optional[np.ndarray] = None,
) -> Tuple[float, LossBreakdown]:
    """L = L_color + w_normal L_normal + w_hard L_hard + w_soft L_soft.

    Depth terms compare pixels where both depths are finite, the normal term
    pixels where both normals are nonzero; ``mask`` further restricts every term.
    """
    weights = weights or LossWeights()
    shape = render.soft_depth.shape
    if observed.shape[:2] != shape or mvs_depth.shape != shape or mvs_normal.shape[:2] != shape:
        raise DimensionMismatch(
            f"render {shape}, observed {observed.shape[:2]}, depth {mvs_depth.shape}, normal {mvs_normal.shape[:2]}"
        )
    region = np.ones(shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not region.any():
        raise NoValidPixels("no pixel is selected for comparison")

    l1 = _masked_mean(np.abs(render.color - observed).mean(axis=-1), region)
    ssim = _masked_mean(ssim_map(render.color, observed), region)
    color = (1.0 - weights.ssim) * l1 + weights.ssim * (1.0 - ssim)

    render_norm = np.linalg.norm(render.normal, axis=-1)
    mvs_norm = np.linalg.norm(mvs_normal, axis=-1)
    normal_valid = region & (render_norm > 0) & (mvs_norm > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosine = np.einsum("hwc,hwc->hw", render.normal, mvs_normal) / (render_norm * mvs_norm)
    normal = _masked_mean(1.0 - cosine, normal_valid)

    depth_valid = region & np.isfinite(mvs_depth)
    hard_valid = depth_valid & np.isfinite(render.hard_depth)
    soft_valid = depth_valid & np.isfinite(render.soft_depth)
    with np.errstate(invalid="ignore"):
        hard = _masked_mean(np.abs(render.hard_depth - mvs_depth), hard_valid)
        soft = _masked_mean(np.abs(render.soft_depth - mvs_depth), soft_valid)

    total = color + weights.normal * normal + weights.hard * hard + weights.soft * soft
    breakdown = LossBreakdown(total=total, color=color, l1=l1, ssim=ssim, normal=normal, hard=hard, soft=soft,
                              pixels=int(region.sum()))
    return total, breakdown
