from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.spatial.transform import Rotation

STATIC_INSTANCE = -1


class GaussianPrimitive(BaseModel):
    """One anisotropic 3D Gaussian: covariance = R diag(scale)^2 R^T"""
    model_config = ConfigDict(frozen=True)

    mean: Tuple[float, float, float]
    scale: Tuple[float, float, float]
    rotation: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)  # w, x, y, z
    opacity: float = Field(gt=0, le=1)
    color: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    instance: int = STATIC_INSTANCE

    @field_validator("scale")
    @classmethod
    def _positive_scale(cls, value):
        if min(value) <= 0:
            raise ValueError("scales must be positive")
        return value

    @field_validator("rotation")
    @classmethod
    def _unit_quaternion(cls, value):
        q = np.asarray(value, dtype=np.float64)
        norm = np.linalg.norm(q)
        if norm < 1e-12:
            raise ValueError("rotation quaternion must be nonzero")
        return tuple(float(c) for c in q / norm)

    @field_validator("color")
    @classmethod
    def _color_range(cls, value):
        if min(value) < 0 or max(value) > 1:
            raise ValueError("color channels must lie in [0, 1]")
        return value

    @property
    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.rotation
        return Rotation.from_quat([x, y, z, w]).as_matrix()

    @property
    def covariance(self) -> np.ndarray:
        r = self.rotation_matrix
        return r @ np.diag(np.square(self.scale)) @ r.T


@dataclass(frozen=True)
class GaussianSet:
    """Column storage of primitives; dynamic ones live in their object frame"""
    means: np.ndarray        # (N, 3)
    scales: np.ndarray       # (N, 3)
    rotations: np.ndarray    # (N, 4) w, x, y, z
    opacities: np.ndarray    # (N,)
    colors: np.ndarray       # (N, 3)
    instances: np.ndarray    # (N,) int, STATIC_INSTANCE for world-frame primitives

    def __post_init__(self):
        n = len(self.means)
        if any(len(a) != n for a in (self.scales, self.rotations, self.opacities, self.colors, self.instances)):
            raise ValueError("Gaussian set columns differ in length")

    def __len__(self) -> int:
        return len(self.means)

    @classmethod
    def empty(cls) -> "GaussianSet":
        return cls(np.zeros((0, 3)), np.ones((0, 3)), np.zeros((0, 4)), np.zeros(0), np.zeros((0, 3)),
                   np.zeros(0, dtype=np.int64))

    @classmethod
    def from_primitives(cls, primitives: Sequence[GaussianPrimitive]) -> "GaussianSet":
        if not primitives:
            return cls.empty()
        return cls(
            means=np.array([g.mean for g in primitives], dtype=np.float64),
            scales=np.array([g.scale for g in primitives], dtype=np.float64),
            rotations=np.array([g.rotation for g in primitives], dtype=np.float64),
            opacities=np.array([g.opacity for g in primitives], dtype=np.float64),
            colors=np.array([g.color for g in primitives], dtype=np.float64),
            instances=np.array([g.instance for g in primitives], dtype=np.int64),
        )

    def to_primitives(self) -> List[GaussianPrimitive]:
        return [
            GaussianPrimitive(mean=tuple(m), scale=tuple(s), rotation=tuple(r), opacity=float(o),
                              color=tuple(np.clip(c, 0, 1)), instance=int(i))
            for m, s, r, o, c, i in zip(self.means, self.scales, self.rotations, self.opacities, self.colors, self.instances)
        ]

    def concatenate(self, other: "GaussianSet") -> "GaussianSet":
        return GaussianSet(*(np.concatenate([a, b]) for a, b in zip(self._columns(), other._columns())))

    def select(self, keep: np.ndarray) -> "GaussianSet":
        return GaussianSet(*(column[keep] for column in self._columns()))

    def with_opacities(self, opacities: np.ndarray) -> "GaussianSet":
        return GaussianSet(self.means, self.scales, self.rotations, np.asarray(opacities, dtype=np.float64),
                           self.colors, self.instances)

    def rotation_matrices(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros((0, 3, 3))
        q = self.rotations / np.linalg.norm(self.rotations, axis=1, keepdims=True)
        return Rotation.from_quat(q[:, [1, 2, 3, 0]]).as_matrix()

    def covariances(self) -> np.ndarray:
        r = self.rotation_matrices()
        return np.einsum("nij,nj,nkj->nik", r, np.square(self.scales), r)

    def _columns(self):
        return (self.means, self.scales, self.rotations, self.opacities, self.colors, self.instances)


@dataclass(frozen=True)
class RenderOutput:
    """Rendered rasters; depths are inf and normals zero where nothing contributes"""
    color: np.ndarray               # (H, W, 3)
    soft_depth: np.ndarray          # (H, W)
    hard_depth: np.ndarray          # (H, W)
    normal: np.ndarray              # (H, W, 3) camera frame
    accumulated_alpha: np.ndarray   # (H, W)
    transmittance: np.ndarray       # (H, W)

    @classmethod
    def blank(cls, height: int, width: int) -> "RenderOutput":
        return cls(
            color=np.zeros((height, width, 3)),
            soft_depth=np.full((height, width), np.inf),
            hard_depth=np.full((height, width), np.inf),
            normal=np.zeros((height, width, 3)),
            accumulated_alpha=np.zeros((height, width)),
            transmittance=np.ones((height, width)),
        )
