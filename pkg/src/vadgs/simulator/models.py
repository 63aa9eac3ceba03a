"""Scene specifications for the synthetic driving-rig generator."""
from dataclasses import dataclass, field
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.transform import Rotation

from ..geometry import CameraIntrinsics, CameraView, ObjectTrack, RigidTransform
from ..splatting import GaussianSet
from ..voxels import PointCloud

Vector3 = Tuple[float, float, float]
PriorKind = Literal["surface", "points", "none"]


class _Primitive(BaseModel):
    model_config = ConfigDict(extra="forbid")

    instance_id: int = Field(ge=0)
    pose: RigidTransform = RigidTransform()      # world_from_local at t = 0
    velocity: Vector3 = (0.0, 0.0, 0.0)           # m/s; nonzero makes the instance dynamic
    texture_seed: int = 0
    texture_scale: float = Field(0.25, gt=0)      # meters per noise cell
    base_color: Vector3 = (0.6, 0.6, 0.6)
    contrast: float = Field(0.8, ge=0, le=1)
    prior: PriorKind = "surface"

    @property
    def dynamic(self) -> bool:
        return any(v != 0 for v in self.velocity)


class PlanePrimitive(_Primitive):
    """Rectangle on the local z = 0 plane centered at the local origin"""
    kind: Literal["plane"] = "plane"
    size: Tuple[float, float] = (1.0, 1.0)


class BoxPrimitive(_Primitive):
    """Axis-aligned box in its local frame centered at the local origin"""
    kind: Literal["box"] = "box"
    size: Vector3 = (1.0, 1.0, 1.0)


Primitive = Annotated[Union[PlanePrimitive, BoxPrimitive], Field(discriminator="kind")]


class RigCamera(BaseModel):
    model_config = ConfigDict(extra="forbid")

    camera_id: int
    intrinsics: CameraIntrinsics
    rig_from_camera: RigidTransform = RigidTransform()


class TrajectorySpec(BaseModel):
    """Rig poses at timestamps k * period: start, moved by a constant velocity"""
    model_config = ConfigDict(extra="forbid")

    frames: int = Field(20, ge=1)
    period: float = Field(0.1, gt=0)
    start: RigidTransform = RigidTransform()
    velocity: Vector3 = (0.0, 0.0, 5.0)


class LidarSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rays_per_frame: int = Field(2000, ge=0, le=5000)
    max_range: float = Field(40.0, gt=0)
    azimuth: Tuple[float, float] = (-90.0, 90.0)      # degrees, 0 = rig forward, positive to the right
    elevation: Tuple[float, float] = (-25.0, 5.0)     # degrees, positive up
    pattern: Literal["grid", "random"] = "grid"
    rig_from_lidar: RigidTransform = RigidTransform()


class SceneSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scene"
    seed: int = 0
    primitives: List[Primitive] = []
    rig: List[RigCamera] = Field(default_factory=lambda: default_rig())
    trajectory: TrajectorySpec = TrajectorySpec()
    lidar: LidarSpec = LidarSpec()
    sfm_points_per_view: int = Field(0, ge=0)
    surface_spacing: float = Field(0.1, gt=0)
    sky_color: Vector3 = (0.75, 0.8, 0.85)

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(self.trajectory.frames) * self.trajectory.period

    def view_id(self, frame: int, camera_index: int) -> int:
        return frame * len(self.rig) + camera_index


@dataclass
class GroundTruth:
    """Exact per-view rasters plus provenance-tagged samples"""
    depth: Dict[int, np.ndarray] = field(default_factory=dict)       # view -> (H, W), inf where nothing is hit
    normals: Dict[int, np.ndarray] = field(default_factory=dict)     # view -> (H, W, 3) camera frame
    instances: Dict[int, np.ndarray] = field(default_factory=dict)   # view -> (H, W) instance id, -1 for sky
    masks: Dict[int, Dict[int, np.ndarray]] = field(default_factory=dict)  # instance -> view -> bool mask
    tracks: Dict[int, ObjectTrack] = field(default_factory=dict)
    lidar: PointCloud = field(default_factory=PointCloud.empty)
    sfm: PointCloud = field(default_factory=PointCloud.empty)
    point_primitives: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))  # lidar then sfm rows

    @property
    def points(self) -> PointCloud:
        return self.lidar.concatenate(self.sfm)


@dataclass
class SimulatedScene:
    spec: SceneSpec
    views: List[CameraView]
    truth: GroundTruth
    priors: Optional[GaussianSet] = None


def default_rig(width: int = 320, height: int = 240, focal: float = 200.0) -> List[RigCamera]:
    """Front, front-left (+45 deg) and front-right (-45 deg) cameras sharing one intrinsics"""
    intrinsics = CameraIntrinsics(fx=focal, fy=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                                  width=width, height=height)
    return [
        RigCamera(camera_id=index, intrinsics=intrinsics,
                  rig_from_camera=RigidTransform.from_rotation(Rotation.from_euler("y", yaw, degrees=True)))
        for index, yaw in enumerate((0.0, -45.0, 45.0))
    ]
