from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ViewPairScore(BaseModel):
    """Geometric diversity of a (reference, supporting) view pair"""
    model_config = ConfigDict(frozen=True)

    reference_id: int
    supporting_id: int
    count: int = Field(ge=0)            # co-visible voxels
    dist_dot: float = Field(ge=0)       # d_R . d_S, m^2
    translation: Tuple[float, float, float]  # supporting center in the reference camera frame
    angle: float = Field(ge=0)          # relative rotation, radians
    score: float = Field(ge=0)

    @model_validator(mode="after")
    def _zero_without_overlap(self) -> "ViewPairScore":
        if self.count > 0 and self.dist_dot <= 0:
            raise ValueError("co-visible voxels must lie at positive distance")
        if self.count == 0 and self.score != 0:
            raise ValueError("a pair without co-visible voxels scores zero")
        return self


class SelectionResult(BaseModel):
    """Audit record of one supporting-view selection"""
    reference_id: int
    strategy: str
    candidates: List[int]
    reference_scores: Dict[int, float]
    chosen: List[int]
    objective: float
    swaps: int = 0
