from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import SingularCovariance
from ..geometry import CameraView, ObjectTrack
from .models import GaussianPrimitive, GaussianSet

MIN_SCALE = 1e-7

Tracks = Optional[Dict[int, ObjectTrack]]


def evaluate_density(g: GaussianPrimitive, x) -> float:
    """Unnormalized Gaussian density exp(-0.5 (x - mu)^T Sigma^-1 (x - mu))"""
    if min(g.scale) < MIN_SCALE:
        raise SingularCovariance(f"scale {g.scale} is below {MIN_SCALE} m")
    offset = np.asarray(x, dtype=np.float64) - np.asarray(g.mean)
    # Sigma^-1 = R diag(1/s^2) R^T, so the Mahalanobis term is |diag(1/s) R^T offset|^2
    local = (g.rotation_matrix.T @ offset) / np.asarray(g.scale)
    return float(np.exp(-0.5 * local @ local))


def pose_gaussians(gaussians: GaussianSet, timestamp: float, tracks: Tracks = None) -> Tuple[np.ndarray, np.ndarray]:
    """World-frame means and rotation matrices at ``timestamp``.

    Primitives tagged with an instance that has a track are stored in the
    object frame and get posed with world_from_object(timestamp).
    """
    means = gaussians.means.copy()
    rotations = gaussians.rotation_matrices()
    for instance_id, track in (tracks or {}).items():
        members = gaussians.instances == instance_id
        if not members.any():
            continue
        pose = track.pose_at(timestamp)
        means[members] = pose.apply(means[members])
        rotations[members] = np.einsum("ij,njk->nik", pose.rotation_matrix, rotations[members])
    return means, rotations


def gaussian_normal(g: GaussianPrimitive, view: CameraView) -> np.ndarray:
    """World-frame axis of the smallest scale, oriented toward the camera"""
    axis = g.rotation_matrix[:, int(np.argmin(g.scale))]
    if axis @ (view.center - np.asarray(g.mean)) < 0:
        axis = -axis
    return axis


def gaussian_normals(means: np.ndarray, rotations: np.ndarray, scales: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Vectorized ``gaussian_normal`` for posed primitives, world frame"""
    shortest = np.argmin(scales, axis=1)
    axes = rotations[np.arange(len(rotations)), :, shortest]
    facing = np.einsum("ni,ni->n", axes, center - means) < 0
    axes[facing] *= -1
    return axes
