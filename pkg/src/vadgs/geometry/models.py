from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial.transform import Rotation

from ..errors import TrackGap

Quaternion = Tuple[float, float, float, float]
Vector3 = Tuple[float, float, float]


class CameraIntrinsics(BaseModel):
    """Pinhole intrinsics; pixel centers sit at integer coordinates"""
    model_config = ConfigDict(frozen=True)

    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    width: int = Field(gt=0)
    height: int = Field(gt=0)

    @model_validator(mode="after")
    def _principal_point_inside(self) -> "CameraIntrinsics":
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        return self

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.array([
            [1.0 / self.fx, 0.0, -self.cx / self.fx],
            [0.0, 1.0 / self.fy, -self.cy / self.fy],
            [0.0, 0.0, 1.0],
        ])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)


class RigidTransform(BaseModel):
    """Rotation (unit quaternion w, x, y, z) followed by translation in meters.

    Quaternions are normalized on construction and kept in the w >= 0
    hemisphere so equal rotations compare equal.
    """
    model_config = ConfigDict(frozen=True)

    rotation: Quaternion = (1.0, 0.0, 0.0, 0.0)
    translation: Vector3 = (0.0, 0.0, 0.0)

    @field_validator("rotation")
    @classmethod
    def _normalize(cls, value: Quaternion) -> Quaternion:
        q = np.asarray(value, dtype=np.float64)
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm < 1e-12:
            raise ValueError("rotation quaternion must be nonzero")
        q = q / norm
        if q[0] < 0:
            q = -q
        return (float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_rotation(cls, rotation: Rotation, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        x, y, z, w = rotation.as_quat()
        t = np.asarray(translation, dtype=np.float64)
        return cls(rotation=(w, x, y, z), translation=(float(t[0]), float(t[1]), float(t[2])))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls.from_rotation(Rotation.from_matrix(np.asarray(matrix, dtype=np.float64)), translation)

    @property
    def scipy_rotation(self) -> Rotation:
        w, x, y, z = self.rotation
        return Rotation.from_quat([x, y, z, w])

    @property
    def rotation_matrix(self) -> np.ndarray:
        return self.scipy_rotation.as_matrix()

    @property
    def translation_vector(self) -> np.ndarray:
        return np.asarray(self.translation, dtype=np.float64)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply ``other`` first, then ``self``"""
        rotation = self.scipy_rotation * other.scipy_rotation
        translation = self.scipy_rotation.apply(other.translation_vector) + self.translation_vector
        return RigidTransform.from_rotation(rotation, translation)

    def inverse(self) -> "RigidTransform":
        inv = self.scipy_rotation.inv()
        return RigidTransform.from_rotation(inv, -inv.apply(self.translation_vector))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform a 3-vector or an (N, 3) array of points"""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation_matrix.T + self.translation_vector

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation_matrix.T

    def to_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation_matrix
        matrix[:3, 3] = self.translation_vector
        return matrix


class Pixel(BaseModel):
    """Continuous image coordinates, possibly outside the image"""
    model_config = ConfigDict(frozen=True)

    u: float
    v: float

    def homogeneous(self) -> np.ndarray:
        return np.array([self.u, self.v, 1.0])


class CameraView(BaseModel):
    """A calibrated image taken by one rig camera at one timestamp"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    view_id: int
    camera_id: int = 0
    timestamp: float = 0.0
    frame_index: int = 0
    intrinsics: CameraIntrinsics
    world_from_camera: RigidTransform = RigidTransform()
    image: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def _image_matches_intrinsics(self) -> "CameraView":
        if self.image is not None and self.image.shape[:2] != self.intrinsics.shape:
            raise ValueError(
                f"image of view {self.view_id} is {self.image.shape[:2]}, intrinsics expect {self.intrinsics.shape}"
            )
        return self

    @property
    def camera_from_world(self) -> RigidTransform:
        return self.world_from_camera.inverse()

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates"""
        return self.world_from_camera.translation_vector

    def with_pose(self, world_from_camera: RigidTransform) -> "CameraView":
        return self.model_copy(update={"world_from_camera": world_from_camera})


class ObjectTrack(BaseModel):
    """Per-timestamp world_from_object poses of a rigid moving instance"""
    model_config = ConfigDict(frozen=True)

    instance_id: int
    timestamps: Tuple[float, ...]
    poses: Tuple[RigidTransform, ...]

    @model_validator(mode="after")
    def _aligned_and_sorted(self) -> "ObjectTrack":
        if len(self.timestamps) != len(self.poses) or not self.timestamps:
            raise ValueError("a track needs one pose per timestamp")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("track timestamps must be strictly increasing")
        return self

    @property
    def frame_period(self) -> float:
        if len(self.timestamps) < 2:
            return 0.0
        return float(np.median(np.diff(self.timestamps)))

    def pose_at(self, timestamp: float) -> RigidTransform:
        """Nearest-timestamp pose; gaps beyond half a frame period raise TrackGap"""
        times = np.asarray(self.timestamps)
        nearest = int(np.argmin(np.abs(times - timestamp)))
        gap = abs(times[nearest] - timestamp)
        tolerance = 0.5 * self.frame_period if len(times) > 1 else 1e-9
        if gap > tolerance + 1e-12:
            raise TrackGap(f"instance {self.instance_id} has no pose within {tolerance:.4f}s of t={timestamp:.4f}")
        return self.poses[nearest]
