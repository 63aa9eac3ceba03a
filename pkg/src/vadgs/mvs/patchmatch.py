"""Patch-match multi-view stereo over plane hypotheses.

Pixels are updated in a red-black checkerboard: all pixels of one color
update together, reading hypotheses only from 4-neighbors of the other
color, so every half-step is order independent. Each update tries the
current plane, the neighbors' planes, one perturbation and one fresh random
plane, and keeps the lowest aggregated cost (mean of the best half of the
per-view costs). A stored cost never increases.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..config import PatchMatchConfig
from ..errors import DimensionMismatch, NoSupportingViews
from ..geometry import CameraView, RigidTransform, camera_rays, relative_pose
from .cost import WORST_COST, reference_patches, to_gray, warped_cost, window_offsets
from .models import HypothesisMap, HypothesisState

logger = logging.getLogger(__name__)

_CHUNK = 4096
_MIN_FACING = 0.05
_NEIGHBORS = ((0, -1), (0, 1), (-1, 0), (1, 0))


@dataclass
class _Support:
    gray: np.ndarray
    view: CameraView
    rel: RigidTransform


class _Matcher:
    """Aggregated multi-view cost of candidate planes at reference pixels"""

    def __init__(self, reference: CameraView, supporting: Sequence[CameraView], config: PatchMatchConfig):
        self.intr = reference.intrinsics
        self.du, self.dv = window_offsets(config.window, config.window_step)
        height, width = self.intr.shape
        v, u = np.mgrid[0:height, 0:width]
        self.ref_values, self.ref_valid = reference_patches(
            to_gray(reference.image), u.ravel().astype(np.float64), v.ravel().astype(np.float64), self.du, self.dv)
        self.supports = [_Support(to_gray(s.image), s, relative_pose(reference, s)) for s in supporting]
        self.keep = (len(self.supports) + 1) // 2

    def cost(self, us: np.ndarray, vs: np.ndarray, normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        out = np.empty(len(us))
        for start in range(0, len(us), _CHUNK):
            part = slice(start, start + _CHUNK)
            u, v = us[part][:, None] + self.du, vs[part][:, None] + self.dv
            flat = vs[part].astype(np.int64) * self.intr.width + us[part].astype(np.int64)
            ref_values, ref_valid = self.ref_values[flat], self.ref_valid[flat]
            rays = np.stack([(u - self.intr.cx) / self.intr.fx, (v - self.intr.cy) / self.intr.fy,
                             np.ones_like(u)], axis=-1)
            per_view = np.stack([
                warped_cost(ref_values, ref_valid, s.gray, rays, normals[part], offsets[part], s.view.intrinsics, s.rel)
                for s in self.supports
            ], axis=1)
            per_view.sort(axis=1)
            out[part] = per_view[:, :self.keep].mean(axis=1)
        return out


def _face_camera(normals: np.ndarray, rays: np.ndarray) -> np.ndarray:
    """Flip normals toward the camera and push grazing ones off the ray direction"""
    unit_rays = rays / np.linalg.norm(rays, axis=-1, keepdims=True)
    facing = np.einsum("...c,...c->...", normals, unit_rays)
    normals = np.where((facing > 0)[..., None], -normals, normals)
    facing = -np.abs(facing)
    grazing = facing > -_MIN_FACING
    normals = np.where(grazing[..., None], normals - (facing + _MIN_FACING)[..., None] * unit_rays, normals)
    return normals / np.linalg.norm(normals, axis=-1, keepdims=True)


def _random_planes(rng: np.random.Generator, rays: np.ndarray, config: PatchMatchConfig):
    z_min, z_max = config.depth_range
    depths = rng.uniform(z_min, z_max, size=rays.shape[:-1])
    normals = _face_camera(rng.normal(size=rays.shape), rays)
    return normals, -depths * np.einsum("...c,...c->...", normals, rays)


def _perturbed_planes(rng: np.random.Generator, normals: np.ndarray, offsets: np.ndarray, rays: np.ndarray,
                      scale: float, config: PatchMatchConfig):
    nr = np.einsum("...c,...c->...", normals, rays)
    depths = -offsets / nr
    z_min, z_max = config.depth_range
    depths = np.clip(depths * (1.0 + scale * rng.uniform(-1.0, 1.0, size=depths.shape)), z_min, z_max)
    moved = _face_camera(normals + scale * rng.normal(size=normals.shape), rays)
    return moved, -depths * np.einsum("...c,...c->...", moved, rays)


def patchmatch_iterate(
    reference: CameraView,
    supporting: Sequence[CameraView],
    config: Optional[PatchMatchConfig] = None,
    init_depth: Optional[np.ndarray] = None,
    init_normal: Optional[np.ndarray] = None,
    mask: Optional[np.ndarray] = None,
    instance_id: int = 0,
) -> HypothesisMap:
    """Estimate per-pixel planes of ``reference`` against ``supporting`` views.

    ``init_depth`` / ``init_normal`` (camera frame) seed the pixels where both
    are finite and nonzero; the rest start from random planes. Pixels outside
    ``mask`` are neither read nor written. The random stream is keyed on
    ``config.seed``, ``instance_id`` and the reference view.
    """
    config = config or PatchMatchConfig()
    if not supporting:
        raise NoSupportingViews(f"reference view {reference.view_id} has no supporting view")
    intr = reference.intrinsics
    shape = intr.shape
    active = np.ones(shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if active.shape != shape:
        raise DimensionMismatch(f"mask {active.shape} vs view {shape}")

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, instance_id, reference.view_id])))
    rays = camera_rays(intr)
    normals, offsets = _random_planes(rng, rays, config)
    states = np.full(shape, HypothesisState.RANDOM, dtype=np.uint8)
    if init_depth is not None and init_normal is not None:
        norm = np.linalg.norm(init_normal, axis=-1)
        seeded = active & np.isfinite(init_depth) & (init_depth > 0) & (norm > 0)
        seeded_normals = init_normal[seeded] / norm[seeded][:, None]
        normals[seeded] = _face_camera(seeded_normals, rays[seeded])
        offsets[seeded] = -init_depth[seeded] * np.einsum("nc,nc->n", normals[seeded], rays[seeded])
        states[seeded] = HypothesisState.PROPAGATED
    states[~active] = HypothesisState.INVALID
    normals[~active] = 0.0
    offsets[~active] = 0.0

    matcher = _Matcher(reference, supporting, config)
    costs = np.full(shape, WORST_COST)
    vs, us = np.nonzero(active)
    costs[vs, us] = matcher.cost(us.astype(np.float64), vs.astype(np.float64), normals[vs, us], offsets[vs, us])

    height, width = shape
    checker = (np.add.outer(np.arange(height), np.arange(width)) % 2).astype(bool)
    for iteration in range(config.iterations):
        scale = config.perturbation * 0.5 ** iteration
        for color in (False, True):
            vs, us = np.nonzero(active & (checker == color))
            if len(us) == 0:
                continue
            best_cost = costs[vs, us]
            best_normals = normals[vs, us]
            best_offsets = offsets[vs, us]
            best_state = states[vs, us]
            pixel_rays = rays[vs, us]
            fu, fv = us.astype(np.float64), vs.astype(np.float64)

            candidates: List = []
            for dy, dx in _NEIGHBORS:
                ny, nx = vs + dy, us + dx
                inside = (ny >= 0) & (ny < height) & (nx >= 0) & (nx < width)
                ny, nx = np.clip(ny, 0, height - 1), np.clip(nx, 0, width - 1)
                usable = inside & active[ny, nx]
                candidates.append((normals[ny, nx], offsets[ny, nx], usable, HypothesisState.PROPAGATED))
            moved_normals, moved_offsets = _perturbed_planes(rng, best_normals, best_offsets, pixel_rays, scale, config)
            candidates.append((moved_normals, moved_offsets, np.ones(len(us), dtype=bool), HypothesisState.PROPAGATED))
            fresh_normals, fresh_offsets = _random_planes(rng, pixel_rays, config)
            candidates.append((fresh_normals, fresh_offsets, np.ones(len(us), dtype=bool), HypothesisState.RANDOM))

            for cand_normals, cand_offsets, usable, state in candidates:
                rows = np.flatnonzero(usable)
                if len(rows) == 0:
                    continue
                trial = matcher.cost(fu[rows], fv[rows], cand_normals[rows], cand_offsets[rows])
                better = trial < best_cost[rows]
                rows = rows[better]
                best_cost[rows] = trial[better]
                best_normals[rows] = cand_normals[rows]
                best_offsets[rows] = cand_offsets[rows]
                best_state[rows] = state

            costs[vs, us] = best_cost
            normals[vs, us] = best_normals
            offsets[vs, us] = best_offsets
            states[vs, us] = best_state
        logger.debug("View %d iteration %d: mean cost %.4f", reference.view_id, iteration,
                     float(costs[active].mean()) if active.any() else 0.0)

    states[active & (costs <= config.cost_max)] = HypothesisState.CONVERGED
    hyp_map = HypothesisMap(intrinsics=intr, offsets=offsets, normals=normals, costs=costs, states=states, active=active)
    logger.info("Patch match on view %d with %d supporting views: %d of %d active pixels converged",
                reference.view_id, len(supporting), int(hyp_map.converged.sum()), int(active.sum()))
    return hyp_map
