"""Photometric matching cost: 1 - NCC between a reference window and its plane-warped copy."""
from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import map_coordinates

from ..geometry import CameraIntrinsics, CameraView, Pixel, RigidTransform, relative_pose
from .models import PlaneHypothesis
from .plane import warp_rays

WORST_COST = 2.0
_MIN_VARIANCE = 1e-10
_LUMA = np.array([0.299, 0.587, 0.114])


def to_gray(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.shape[-1] == 1:
        return image[..., 0]
    return image[..., :3] @ _LUMA


def window_offsets(window: int, step: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel offsets (du, dv) of the sampled window positions, always including the border"""
    half = window // 2
    ticks = np.arange(-half, half + 1, step)
    if ticks[-1] != half:
        ticks = np.append(ticks, half)
    dv, du = np.meshgrid(ticks, ticks, indexing="ij")
    return du.ravel().astype(np.float64), dv.ravel().astype(np.float64)


def bilinear_sample(gray: np.ndarray, u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Bilinear samples and a mask of coordinates inside the pixel-center hull"""
    height, width = gray.shape
    inside = np.isfinite(u) & np.isfinite(v) & (u >= 0) & (u <= width - 1) & (v >= 0) & (v <= height - 1)
    coords = np.stack([np.where(inside, v, 0.0).ravel(), np.where(inside, u, 0.0).ravel()])
    values = map_coordinates(gray, coords, order=1, mode="nearest").reshape(np.shape(u))
    return values, inside


def ncc_cost(ref: np.ndarray, sup: np.ndarray, valid: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-wise 1 - NCC of (n, m) patches; zero-variance or invalid rows cost 2"""
    ref0 = ref - ref.mean(axis=-1, keepdims=True)
    sup0 = sup - sup.mean(axis=-1, keepdims=True)
    m = ref.shape[-1]
    ref_energy = np.einsum("...i,...i->...", ref0, ref0)
    sup_energy = np.einsum("...i,...i->...", sup0, sup0)
    textured = (ref_energy / m > _MIN_VARIANCE) & (sup_energy / m > _MIN_VARIANCE)
    with np.errstate(divide="ignore", invalid="ignore"):
        ncc = np.einsum("...i,...i->...", ref0, sup0) / np.sqrt(ref_energy * sup_energy)
    cost = np.clip(1.0 - ncc, 0.0, WORST_COST)
    ok = textured if valid is None else textured & valid
    return np.where(ok, cost, WORST_COST)


def reference_patches(gray: np.ndarray, us: np.ndarray, vs: np.ndarray, du: np.ndarray, dv: np.ndarray):
    """Window samples around pixels (us, vs): values (n, m) and per-window validity"""
    values, inside = bilinear_sample(gray, us[:, None] + du, vs[:, None] + dv)
    return values, inside.all(axis=1)


def warped_cost(
    ref_values: np.ndarray,
    ref_valid: np.ndarray,
    sup_gray: np.ndarray,
    rays: np.ndarray,
    normals: np.ndarray,
    offsets: np.ndarray,
    intr_sup: CameraIntrinsics,
    rel: RigidTransform,
) -> np.ndarray:
    """Costs of n windows whose reference rays (n, m, 3) share one plane per row"""
    u, v, front = warp_rays(rays, normals[:, None, :], offsets[:, None], intr_sup, rel)
    sampled, inside = bilinear_sample(sup_gray, u, v)
    valid = ref_valid & (front & inside).all(axis=1)
    return ncc_cost(ref_values, sampled, valid)


def photometric_cost(reference: CameraView, supporting: CameraView, p: Pixel, hyp: PlaneHypothesis,
                     window: int, step: int = 1) -> float:
    """Matching cost in [0, 2] of pixel ``p`` under ``hyp``; any sample off either image costs 2"""
    intr = reference.intrinsics
    du, dv = window_offsets(window, step)
    us, vs = np.array([p.u]), np.array([p.v])
    ref_values, ref_valid = reference_patches(to_gray(reference.image), us, vs, du, dv)
    rays = np.stack([
        (us[:, None] + du - intr.cx) / intr.fx,
        (vs[:, None] + dv - intr.cy) / intr.fy,
        np.ones((1, len(du))),
    ], axis=-1)
    costs = warped_cost(
        ref_values, ref_valid, to_gray(supporting.image), rays,
        hyp.normal_vector[None], np.array([hyp.d]), supporting.intrinsics, relative_pose(reference, supporting),
    )
    return float(costs[0])
