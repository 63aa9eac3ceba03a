"""Pinhole projection, unprojection and pose algebra.

Camera frame: +x right, +y down, +z forward. Depth is the camera-frame z.
"""
from typing import Tuple

import numpy as np

from ..errors import NonPositiveDepth
from .models import CameraIntrinsics, CameraView, Pixel, RigidTransform


def project(intr: CameraIntrinsics, point_cam) -> Tuple[Pixel, float]:
    """Project a camera-frame point to a pixel and its depth"""
    x, y, z = (float(c) for c in point_cam)
    if z <= 0:
        raise NonPositiveDepth(f"point {x, y, z} is not in front of the camera")
    return Pixel(u=intr.fx * x / z + intr.cx, v=intr.fy * y / z + intr.cy), z


def unproject(intr: CameraIntrinsics, p: Pixel, depth: float) -> np.ndarray:
    """Camera-frame point seen at pixel ``p`` with the given depth"""
    if depth <= 0:
        raise NonPositiveDepth(f"depth {depth} is not positive")
    return np.array([(p.u - intr.cx) / intr.fx * depth, (p.v - intr.cy) / intr.fy * depth, depth])


def relative_pose(reference: CameraView, supporting: CameraView) -> RigidTransform:
    """Transform mapping reference-camera coordinates to supporting-camera coordinates"""
    return supporting.camera_from_world.compose(reference.world_from_camera)


def rotation_angle(transform: RigidTransform) -> float:
    """Geodesic angle of the rotation part, in [0, pi]"""
    return float(transform.scipy_rotation.magnitude())


def project_points(intr: CameraIntrinsics, points_cam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized projection; returns (N, 2) pixels and (N,) depths, NaN pixels where z <= 0"""
    points_cam = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    z = points_cam[:, 2]
    uv = np.full((len(points_cam), 2), np.nan)
    front = z > 0
    uv[front, 0] = intr.fx * points_cam[front, 0] / z[front] + intr.cx
    uv[front, 1] = intr.fy * points_cam[front, 1] / z[front] + intr.cy
    return uv, z


def unproject_points(intr: CameraIntrinsics, uv: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Vectorized unprojection of (N, 2) pixels with (N,) depths"""
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    depth = np.asarray(depth, dtype=np.float64).reshape(-1)
    return np.stack([
        (uv[:, 0] - intr.cx) / intr.fx * depth,
        (uv[:, 1] - intr.cy) / intr.fy * depth,
        depth,
    ], axis=1)


def pixel_grid(intr: CameraIntrinsics) -> Tuple[np.ndarray, np.ndarray]:
    """Integer pixel-center coordinates (u, v), each of shape (height, width)"""
    v, u = np.mgrid[0:intr.height, 0:intr.width]
    return u.astype(np.float64), v.astype(np.float64)


def camera_rays(intr: CameraIntrinsics) -> np.ndarray:
    """Camera-frame ray directions with unit z for every pixel, shape (H, W, 3)"""
    u, v = pixel_grid(intr)
    return np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones_like(u)], axis=-1)


def world_rays(view: CameraView) -> Tuple[np.ndarray, np.ndarray]:
    """Ray origin (3,) and world-frame directions (H, W, 3) whose parameter equals camera depth"""
    directions = view.world_from_camera.rotate(camera_rays(view.intrinsics).reshape(-1, 3))
    return view.center, directions.reshape(view.intrinsics.height, view.intrinsics.width, 3)


def ray_aabb(origin: np.ndarray, directions: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Slab test between rays and axis-aligned boxes.

    ``directions`` is (N, 3); ``lower``/``upper`` broadcast against it. Returns
    (hit, t_near) with t_near clamped at 0 for origins inside a box.
    """
    directions = np.asarray(directions, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / directions
        t1 = (lower - origin) * inv
        t2 = (upper - origin) * inv
    parallel = directions == 0
    inside_slab = (origin >= lower) & (origin <= upper)
    t_lo = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), np.minimum(t1, t2))
    t_hi = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), np.maximum(t1, t2))
    t_near = t_lo.max(axis=-1)
    t_far = t_hi.min(axis=-1)
    hit = (t_far >= np.maximum(t_near, 0.0)) & np.isfinite(t_far)
    return hit, np.maximum(t_near, 0.0)
