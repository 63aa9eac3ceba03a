from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from ..geometry import CameraIntrinsics, camera_rays


class HypothesisState(IntEnum):
    RANDOM = 0
    PROPAGATED = 1
    CONVERGED = 2
    INVALID = 3


class PlaneHypothesis(BaseModel):
    """Local plane n.X + d = 0 in the camera frame; d in meters"""
    model_config = ConfigDict(frozen=True)

    d: float
    normal: Tuple[float, float, float]

    @field_validator("normal")
    @classmethod
    def _unit_normal(cls, value):
        n = np.asarray(value, dtype=np.float64)
        norm = np.linalg.norm(n)
        if not np.isfinite(norm) or norm < 1e-12:
            raise ValueError("plane normal must be nonzero")
        n = n / norm
        return (float(n[0]), float(n[1]), float(n[2]))

    @property
    def normal_vector(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=np.float64)


@dataclass
class HypothesisMap:
    """Per-pixel plane hypotheses of one reference view"""
    intrinsics: CameraIntrinsics
    offsets: np.ndarray   # (H, W) plane offsets d
    normals: np.ndarray   # (H, W, 3) unit normals, camera frame
    costs: np.ndarray     # (H, W) aggregated matching cost in [0, 2]
    states: np.ndarray    # (H, W) uint8 HypothesisState
    active: np.ndarray    # (H, W) bool

    @property
    def width(self) -> int:
        return self.intrinsics.width

    @property
    def height(self) -> int:
        return self.intrinsics.height

    @property
    def converged(self) -> np.ndarray:
        return self.states == HypothesisState.CONVERGED

    def depth(self) -> np.ndarray:
        """Camera depth of every active pixel's plane along its ray, inf elsewhere"""
        denominator = np.einsum("hwc,hwc->hw", self.normals, camera_rays(self.intrinsics))
        with np.errstate(divide="ignore", invalid="ignore"):
            depth = -self.offsets / denominator
        valid = self.active & np.isfinite(depth) & (depth > 0)
        return np.where(valid, depth, np.inf)


class ConsistencyCheck(BaseModel):
    """Outcome of the reference/supporting hypothesis agreement test at one pixel"""
    passed: bool
    reprojection_error: float
    depth_error: float
    normal_angle: float


@dataclass(frozen=True)
class ConsistencyResult:
    """Per-pixel agreement of a reference map with its supporting maps"""
    counts: np.ndarray              # (H, W) supporting views that agree
    reprojection_error: np.ndarray  # (H, W) mean over agreeing views, px; nan where none
    depth_error: np.ndarray         # (H, W) relative
    normal_angle: np.ndarray        # (H, W) degrees
    survivors: np.ndarray           # (H, W) bool

    @property
    def survivor_count(self) -> int:
        return int(self.survivors.sum())
