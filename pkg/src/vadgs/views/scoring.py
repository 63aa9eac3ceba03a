"""Pairwise view diversity scores.

s = (N / d_R.d_S) * (sqrt(t_x^2 + t_y^2) / |t_z|) * sin(theta)

rewards many shared voxels seen from close by, lateral rather than
longitudinal displacement, and a rotation between the two cameras.
"""
import logging
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from ..geometry import CameraView, relative_pose, rotation_angle
from ..voxels import CoVisibility, co_visibility
from .models import ViewPairScore

logger = logging.getLogger(__name__)

_MIN_TZ = 1e-6
_REL_TZ = 0.01


def diversity_score(count: int, dist_ref: np.ndarray, dist_sup: np.ndarray, translation, angle: float) -> Tuple[float, float]:
    """(dist_dot, score) for raw pair geometry"""
    if count == 0:
        return 0.0, 0.0
    dist_dot = float(np.dot(dist_ref, dist_sup))
    t = np.asarray(translation, dtype=np.float64)
    lateral = float(np.hypot(t[0], t[1]))
    longitudinal = max(abs(float(t[2])), _REL_TZ * float(np.linalg.norm(t)), _MIN_TZ)
    score = (count / dist_dot) * (lateral / longitudinal) * abs(np.sin(angle))
    return dist_dot, float(score)


def pair_score(reference: CameraView, supporting: CameraView, co_visible: Tuple[int, np.ndarray, np.ndarray]) -> ViewPairScore:
    count, dist_ref, dist_sup = co_visible
    translation = reference.camera_from_world.apply(supporting.center)
    angle = rotation_angle(relative_pose(reference, supporting))
    dist_dot, score = diversity_score(count, dist_ref, dist_sup, translation, angle)
    return ViewPairScore(
        reference_id=reference.view_id,
        supporting_id=supporting.view_id,
        count=count,
        dist_dot=dist_dot,
        translation=tuple(float(x) for x in translation),
        angle=angle,
        score=score,
    )


def score_candidates(
    reference_id: int,
    coverage: Mapping[int, CoVisibility],
    views: Mapping[int, CameraView],
    candidate_ids: Sequence[int],
) -> Tuple[Dict[int, float], Dict[Tuple[int, int], float]]:
    """Reference-to-candidate and candidate-to-candidate scores.

    Pairs between candidates are keyed (i, j) with i < j and scored with the
    smaller id as reference.
    """
    reference = views[reference_id]
    ids = sorted(candidate_ids)
    to_reference = {
        i: pair_score(reference, views[i], co_visibility(coverage[reference_id], coverage[i])).score for i in ids
    }
    between: Dict[Tuple[int, int], float] = {}
    for a, i in enumerate(ids):
        for j in ids[a + 1:]:
            between[(i, j)] = pair_score(views[i], views[j], co_visibility(coverage[i], coverage[j])).score
    logger.debug("Scored %d candidates against reference %d", len(ids), reference_id)
    return to_reference, between
