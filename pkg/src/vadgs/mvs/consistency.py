"""Multi-view geometric consistency of hypothesis maps."""
import logging
from typing import Sequence, Tuple

import numpy as np

from ..config import PatchMatchConfig
from ..geometry import Pixel, RigidTransform
from .models import ConsistencyCheck, ConsistencyResult, HypothesisMap

logger = logging.getLogger(__name__)


def _check_pixels(ref_map: HypothesisMap, sup_map: HypothesisMap, rel: RigidTransform,
                  us: np.ndarray, vs: np.ndarray, config: PatchMatchConfig):
    """Forward-backward check at integer reference pixels.

    The reference plane point is moved into the supporting view, the
    supporting plane is evaluated along the exact transferred ray (looked up
    at the nearest pixel) and carried back. Returns pass mask, reprojection
    error, relative depth gap and normal angle in degrees; failures from
    missing hypotheses carry inf metrics.
    """
    n = len(us)
    reproj = np.full(n, np.inf)
    depth_gap = np.full(n, np.inf)
    angle = np.full(n, np.inf)

    ref_intr, sup_intr = ref_map.intrinsics, sup_map.intrinsics
    z_ref = ref_map.depth()[vs, us]
    rays = np.stack([(us - ref_intr.cx) / ref_intr.fx, (vs - ref_intr.cy) / ref_intr.fy, np.ones(n)], axis=1)
    points_sup = rel.apply(z_ref[:, None] * rays) if n else np.zeros((0, 3))
    z_sup = points_sup[:, 2]
    ok = np.isfinite(z_ref) & np.isfinite(z_sup) & (z_sup > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        su = sup_intr.fx * points_sup[:, 0] / z_sup + sup_intr.cx
        sv = sup_intr.fy * points_sup[:, 1] / z_sup + sup_intr.cy
    iu = np.rint(np.where(ok, su, -1)).astype(np.int64)
    iv = np.rint(np.where(ok, sv, -1)).astype(np.int64)
    ok &= (iu >= 0) & (iu < sup_intr.width) & (iv >= 0) & (iv < sup_intr.height)
    iu, iv = np.where(ok, iu, 0), np.where(ok, iv, 0)
    ok &= sup_map.converged[iv, iu]

    sup_normals = sup_map.normals[iv, iu]
    sup_rays = np.stack([(su - sup_intr.cx) / sup_intr.fx, (sv - sup_intr.cy) / sup_intr.fy, np.ones(n)], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_back = -sup_map.offsets[iv, iu] / np.einsum("nc,nc->n", sup_normals, sup_rays)
    ok &= np.isfinite(z_back) & (z_back > 0)

    back = rel.inverse().apply(np.where(ok, z_back, 1.0)[:, None] * np.where(ok[:, None], sup_rays, 0.0))
    ok &= back[:, 2] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        bu = ref_intr.fx * back[:, 0] / back[:, 2] + ref_intr.cx
        bv = ref_intr.fy * back[:, 1] / back[:, 2] + ref_intr.cy
        gap = np.abs(z_sup - z_back) / z_back

    sup_in_ref = rel.inverse().rotate(sup_normals)
    cosine = np.clip(np.einsum("nc,nc->n", ref_map.normals[vs, us], sup_in_ref), -1.0, 1.0)

    reproj[ok] = np.hypot(bu - us, bv - vs)[ok]
    depth_gap[ok] = gap[ok]
    angle[ok] = np.degrees(np.arccos(cosine))[ok]
    passed = ok & (reproj <= config.geo_max_px) & (depth_gap <= config.geo_max_rel) & (angle <= config.geo_max_deg)
    return passed, reproj, depth_gap, angle


def geometric_consistency(ref_map: HypothesisMap, sup_map: HypothesisMap, p: Pixel, rel: RigidTransform,
                          config: PatchMatchConfig) -> ConsistencyCheck:
    """Agreement of the two maps at reference pixel ``p``; ``rel`` maps reference to supporting coordinates"""
    us, vs = np.array([int(round(p.u))]), np.array([int(round(p.v))])
    passed, reproj, gap, angle = _check_pixels(ref_map, sup_map, rel, us, vs, config)
    return ConsistencyCheck(passed=bool(passed[0]), reprojection_error=float(reproj[0]),
                            depth_error=float(gap[0]), normal_angle=float(angle[0]))


def filter_consistent(ref_map: HypothesisMap, supports: Sequence[Tuple[HypothesisMap, RigidTransform]],
                      config: PatchMatchConfig) -> ConsistencyResult:
    """Keep converged pixels that agree with at least ``min_consistent`` supporting maps"""
    shape = ref_map.intrinsics.shape
    counts = np.zeros(shape, dtype=np.int64)
    sums = np.zeros((3,) + shape)
    vs, us = np.nonzero(ref_map.converged)
    for sup_map, rel in supports:
        passed, reproj, gap, angle = _check_pixels(ref_map, sup_map, rel, us, vs, config)
        counts[vs[passed], us[passed]] += 1
        for slot, metric in enumerate((reproj, gap, angle)):
            sums[slot, vs[passed], us[passed]] += metric[passed]

    with np.errstate(divide="ignore", invalid="ignore"):
        means = np.where(counts > 0, sums / counts, np.nan)
    survivors = ref_map.converged & (counts >= config.min_consistent)
    logger.info("Consistency filter: %d of %d converged pixels survive (min_consistent=%d, %d supporting maps)",
                int(survivors.sum()), len(us), config.min_consistent, len(supports))
    return ConsistencyResult(counts=counts, reprojection_error=means[0], depth_error=means[1],
                             normal_angle=means[2], survivors=survivors)
