from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, model_validator

from ..geometry import CameraView, ObjectTrack
from ..splatting import GaussianSet, LossBreakdown
from ..voxels import InstanceStatus, PointCloud


class DensificationReport(BaseModel):
    """What one detect-and-densify pass did to one instance"""
    instance_id: int
    pass_index: int = 0
    dynamic: bool = False
    reference_views: List[int] = []
    views_selected: List[int] = []
    pixels_converged: int = 0
    pixels_surviving: int = 0
    points_spawned: int = 0
    opacity_adjusted: int = 0
    pre_status: InstanceStatus = InstanceStatus.UNOBSERVED
    post_status: InstanceStatus = InstanceStatus.UNOBSERVED
    pre_loss: Optional[LossBreakdown] = None
    post_loss: Optional[LossBreakdown] = None
    stage: Optional[str] = None
    error: Optional[str] = None

    @model_validator(mode="after")
    def _spawn_within_survivors(self) -> "DensificationReport":
        if self.points_spawned > self.pixels_surviving:
            raise ValueError("cannot spawn more points than surviving pixels")
        return self


@dataclass(frozen=True)
class SurfacePoints:
    """Reconstructed surface samples with normals and colors, one row per point"""
    positions: np.ndarray  # (N, 3)
    normals: np.ndarray    # (N, 3) unit
    colors: np.ndarray     # (N, 3) in [0, 1]

    def __len__(self) -> int:
        return len(self.positions)

    def __iter__(self):
        return iter(zip(self.positions, self.normals, self.colors))


@dataclass
class SceneInputs:
    """Everything a densification run reads"""
    views: List[CameraView]
    points: PointCloud
    masks: Dict[int, Dict[int, np.ndarray]] = field(default_factory=dict)  # instance -> view -> mask
    tracks: Dict[int, ObjectTrack] = field(default_factory=dict)
    priors: Optional[GaussianSet] = None

    def view(self, view_id: int) -> CameraView:
        for candidate in self.views:
            if candidate.view_id == view_id:
                return candidate
        raise KeyError(view_id)

    @property
    def timestamps(self) -> Dict[int, float]:
        return {view.view_id: view.timestamp for view in self.views}

    def is_held_out(self, view: CameraView, holdout_every: int) -> bool:
        return holdout_every > 0 and view.frame_index % holdout_every == holdout_every - 1

    def training_views(self, holdout_every: int) -> List[CameraView]:
        return [v for v in self.views if not self.is_held_out(v, holdout_every)]

    def held_out_views(self, holdout_every: int) -> List[CameraView]:
        return [v for v in self.views if self.is_held_out(v, holdout_every)]
