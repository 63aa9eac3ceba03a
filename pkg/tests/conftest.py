"""Shared fixtures: small cameras, hand-built views and a tiny simulated scene."""
import os
import sys
from functools import lru_cache

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from vadgs.geometry import CameraIntrinsics, CameraView, RigidTransform  # noqa: E402
from vadgs.simulator import LidarSpec, PlanePrimitive, RigCamera, SceneSpec, TrajectorySpec, generate  # noqa: E402

SCENES_DIR = os.path.join(os.path.dirname(__file__), "..", "scenes")


def make_intrinsics(width=64, height=48, focal=50.0, cx=None, cy=None) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=focal, fy=focal,
        cx=(width - 1) / 2.0 if cx is None else cx,
        cy=(height - 1) / 2.0 if cy is None else cy,
        width=width, height=height,
    )


def make_view(view_id=0, center=(0.0, 0.0, 0.0), yaw_deg=0.0, intrinsics=None, image=None,
              timestamp=0.0, frame_index=0) -> CameraView:
    """Camera at ``center`` turned by ``yaw_deg`` about +y (positive turns toward +x)"""
    pose = RigidTransform.from_rotation(Rotation.from_euler("y", yaw_deg, degrees=True), center)
    return CameraView(view_id=view_id, intrinsics=intrinsics or make_intrinsics(), world_from_camera=pose,
                      image=image, timestamp=timestamp, frame_index=frame_index)


def textured_image(height, width, seed=0, channels=3):
    """Smooth random texture in [0, 1]"""
    from scipy.ndimage import gaussian_filter
    rng = np.random.Generator(np.random.Philox(seed))
    noise = gaussian_filter(rng.random((height, width)), 1.2)
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    if channels == 1:
        return noise
    return np.repeat(noise[..., None], channels, axis=2)


def tiny_spec(**updates) -> SceneSpec:
    """One textured wall at 6 m seen by a single 64x48 camera sliding right"""
    intrinsics = make_intrinsics()
    spec = SceneSpec(
        name="tiny_wall",
        seed=3,
        primitives=[PlanePrimitive(instance_id=0, pose=RigidTransform(translation=(0.0, 0.0, 6.0)),
                                   size=(12.0, 8.0), texture_scale=0.3, texture_seed=5)],
        rig=[RigCamera(camera_id=0, intrinsics=intrinsics)],
        trajectory=TrajectorySpec(frames=4, period=0.1, velocity=(1.0, 0.0, 0.0)),
        lidar=LidarSpec(rays_per_frame=300, azimuth=(-30.0, 30.0), elevation=(-20.0, 20.0)),
    )
    return spec.model_copy(update=updates) if updates else spec


@lru_cache(maxsize=None)
def _tiny_scene():
    return generate(tiny_spec())


@pytest.fixture
def intrinsics():
    return make_intrinsics()


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


@pytest.fixture
def tiny_scene():
    return _tiny_scene()
