"""Plane hypotheses and the plane-induced homography between two views.

For a plane n.X + d = 0 in the reference camera frame and the relative pose
X_S = R X_R + t, pixels transfer as  p' ~ K_S (R - t n^T / d) K_R^-1 p.
"""
from typing import Tuple

import numpy as np

from ..errors import BehindCamera, DegeneratePlane, GrazingPlane, NonPositiveDepth
from ..geometry import CameraIntrinsics, Pixel, RigidTransform
from .models import PlaneHypothesis

_GRAZING = 1e-6


def _ray(intr: CameraIntrinsics, p: Pixel) -> np.ndarray:
    return intr.inverse_matrix @ p.homogeneous()


def plane_from_depth_normal(p: Pixel, z: float, normal, intr: CameraIntrinsics) -> PlaneHypothesis:
    if z <= 0:
        raise NonPositiveDepth(f"depth {z} at ({p.u}, {p.v})")
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    ray = _ray(intr, p)
    if abs(n @ ray) / np.linalg.norm(ray) < _GRAZING:
        raise GrazingPlane(f"normal {tuple(n)} is parallel to the ray of ({p.u}, {p.v})")
    return PlaneHypothesis(d=float(-n @ (z * ray)), normal=tuple(n))


def depth_from_plane(p: Pixel, hyp: PlaneHypothesis, intr: CameraIntrinsics) -> float:
    ray = _ray(intr, p)
    denominator = hyp.normal_vector @ ray
    if abs(denominator) / np.linalg.norm(ray) < _GRAZING:
        raise GrazingPlane(f"plane is parallel to the ray of ({p.u}, {p.v})")
    return float(-hyp.d / denominator)


def plane_homography(hyp: PlaneHypothesis, intr_ref: CameraIntrinsics, intr_sup: CameraIntrinsics,
                     rel: RigidTransform) -> np.ndarray:
    if hyp.d == 0:
        raise DegeneratePlane("plane passes through the reference camera center")
    induced = rel.rotation_matrix - np.outer(rel.translation_vector, hyp.normal_vector) / hyp.d
    return intr_sup.matrix @ induced @ intr_ref.inverse_matrix


def homography_warp(p: Pixel, hyp: PlaneHypothesis, intr_ref: CameraIntrinsics, intr_sup: CameraIntrinsics,
                    rel: RigidTransform) -> Pixel:
    """Transfer a reference pixel into the supporting view through its plane"""
    homography = plane_homography(hyp, intr_ref, intr_sup, rel)
    if depth_from_plane(p, hyp, intr_ref) <= 0:
        raise BehindCamera(f"plane lies behind the reference camera at ({p.u}, {p.v})")
    h = homography @ p.homogeneous()
    if h[2] <= 0:
        raise BehindCamera(f"({p.u}, {p.v}) transfers behind the supporting camera")
    return Pixel(u=float(h[0] / h[2]), v=float(h[1] / h[2]))


def warp_rays(rays: np.ndarray, normals: np.ndarray, offsets: np.ndarray, intr_sup: CameraIntrinsics,
              rel: RigidTransform) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized transfer of reference rays (..., 3) through per-ray planes.

    Returns supporting pixel coordinates u, v and a validity mask that is false
    where the plane point sits behind either camera.
    """
    nr = np.einsum("...c,...c->...", normals, rays)
    with np.errstate(divide="ignore", invalid="ignore"):
        ref_depth = -offsets / nr
        # direction of R X + t scaled by 1 / ref_depth
        q = rays @ rel.rotation_matrix.T - rel.translation_vector * (nr / offsets)[..., None]
        valid = np.isfinite(ref_depth) & (ref_depth > 0) & (q[..., 2] > 0)
        u = intr_sup.fx * q[..., 0] / q[..., 2] + intr_sup.cx
        v = intr_sup.fy * q[..., 1] / q[..., 2] + intr_sup.cy
    return u, v, valid
