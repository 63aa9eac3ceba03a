"""Stages of the per-instance detect-and-densify graph.

Every stage reads the graph state plus a shared, read-only pass context
(the primitive snapshot taken at the start of the pass) and returns its
state updates. Nothing here mutates the snapshot; the pipeline commits the
results of all instances afterwards.
"""
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..config import PipelineConfig
from ..errors import EmptyInput, NoObservingView
from ..geometry import CameraView, project_points, relative_pose
from ..mvs import filter_consistent, object_frame_points, object_frame_views, patchmatch_iterate
from ..splatting import STATIC_INSTANCE, GaussianSet, RenderOutput, adjust_redundant_opacity, splat_render, total_loss
from ..views import score_candidates, select_supporting_views
from ..voxels import (
    CoVisibility,
    DepthIndexMap,
    InstanceStatus,
    PointCloud,
    SourceKind,
    VoxelGrid,
    candidate_views,
    flag_incomplete,
    instance_voxels,
    rasterize_visible,
    voxelize_cloud,
)
from .models import SceneInputs
from .spawn import patches_to_points, spawn_gaussians

logger = logging.getLogger(__name__)


@dataclass
class PassContext:
    """Inputs and caches shared by every instance of one pass"""
    inputs: SceneInputs
    config: PipelineConfig
    snapshot: GaussianSet
    points: PointCloud
    pass_index: int = 0
    render_threads: Optional[int] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _grid: Optional[VoxelGrid] = field(default=None, repr=False)
    _depth_maps: Dict[int, DepthIndexMap] = field(default_factory=dict, repr=False)
    _renders: Dict[int, RenderOutput] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        holdout = self.config.densify.holdout_every
        self.training: Dict[int, CameraView] = {v.view_id: v for v in self.inputs.training_views(holdout)}

    def static_grid(self) -> VoxelGrid:
        with self._lock:
            if self._grid is None:
                voxel = self.config.voxel
                self._grid = voxelize_cloud(self.points, voxel.resolution, voxel.padding)
                logger.info("Voxelized %d points into %d occupied cells", len(self.points), len(self._grid))
            return self._grid

    def static_depth(self, view_id: int) -> DepthIndexMap:
        grid = self.static_grid()
        with self._lock:
            if view_id not in self._depth_maps:
                self._depth_maps[view_id] = rasterize_visible(grid, self.training[view_id])
            return self._depth_maps[view_id]

    def render(self, view_id: int) -> RenderOutput:
        """Snapshot rendered into a training view (world frame)"""
        with self._lock:
            if view_id not in self._renders:
                self._renders[view_id] = splat_render(
                    self.snapshot, self.training[view_id], self.inputs.tracks, self.config.render, self.render_threads
                )
            return self._renders[view_id]

    def mask(self, instance_id: int, view_id: int) -> np.ndarray:
        masks = self.inputs.masks.get(instance_id, {})
        if view_id in masks:
            return np.asarray(masks[view_id], dtype=bool)
        return np.zeros(self.training[view_id].intrinsics.shape, dtype=bool)


def instance_points(cloud: PointCloud, views: Dict[int, CameraView], masks: Dict[int, np.ndarray]) -> PointCloud:
    """Points that project inside the instance mask of their first source view"""
    keep = np.zeros(len(cloud), dtype=bool)
    first_views = np.array([min(v) for v in cloud.source_views], dtype=np.int64)
    for view_id in np.unique(first_views):
        view, mask = views.get(int(view_id)), masks.get(int(view_id))
        if view is None or mask is None:
            continue
        members = np.flatnonzero(first_views == view_id)
        uv, _ = project_points(view.intrinsics, view.camera_from_world.apply(cloud.positions[members]))
        inside = np.isfinite(uv).all(axis=1)
        px = np.rint(np.where(inside, uv[:, 0], -1)).astype(np.int64)
        py = np.rint(np.where(inside, uv[:, 1], -1)).astype(np.int64)
        inside &= (px >= 0) & (px < view.intrinsics.width) & (py >= 0) & (py < view.intrinsics.height)
        hit = np.zeros(len(members), dtype=bool)
        hit[inside] = np.asarray(mask, dtype=bool)[py[inside], px[inside]]
        keep[members[hit]] = True
    rows = np.flatnonzero(keep)
    return PointCloud(cloud.positions[rows], cloud.kinds[rows], tuple(cloud.source_views[r] for r in rows))


class InstanceStages:
    """Node implementations of the instance graph"""

    def __init__(self, context: PassContext):
        self.context = context
        self.config = context.config

    def prepare(self, state: Dict[str, Any]) -> Dict[str, Any]:
        ctx, instance_id = self.context, state["instance_id"]
        masks = {
            view_id: np.asarray(mask, dtype=bool)
            for view_id, mask in ctx.inputs.masks.get(instance_id, {}).items()
            if view_id in ctx.training and np.any(mask)
        }
        if not masks:
            raise NoObservingView(f"instance {instance_id} has no mask pixels in any training view")
        references = sorted(masks, key=lambda v: (-int(masks[v].sum()), v))[:self.config.densify.reference_views]

        track = ctx.inputs.tracks.get(instance_id)
        if track is None:
            views = dict(ctx.training)
            grid = ctx.static_grid()
            depth_maps = {ref: ctx.static_depth(ref) for ref in references}
        else:
            ordered = [ctx.training[v] for v in sorted(ctx.training)]
            views = {v.view_id: v for v in object_frame_views(ordered, track)}
            members = instance_points(ctx.points, ctx.training, masks)
            if len(members) == 0:
                raise EmptyInput(f"no point of the cloud falls on dynamic instance {instance_id}")
            local = object_frame_points(members, track, ctx.inputs.timestamps)
            grid = voxelize_cloud(local, self.config.voxel.resolution, self.config.voxel.padding)
            depth_maps = {ref: rasterize_visible(grid, views[ref]) for ref in references}

        voxel_ids = set()
        for ref in references:
            voxel_ids |= instance_voxels(masks[ref], depth_maps[ref])
        logger.info("Instance %d (%s): references %s, %d voxels", instance_id,
                    "dynamic" if track is not None else "static", references, len(voxel_ids))
        return {
            "dynamic": track is not None,
            "views": views,
            "grid": grid,
            "references": references,
            "cursor": 0,
            "depth_maps": depth_maps,
            "voxel_ids": frozenset(voxel_ids),
        }

    def flag(self, state: Dict[str, Any]) -> Dict[str, Any]:
        ctx, instance_id = self.context, state["instance_id"]
        ref = state["references"][0]
        voxel = self.config.voxel
        status = flag_incomplete(ctx.mask(instance_id, ref), state["depth_maps"][ref], ctx.render(ref).hard_depth,
                                 voxel.tau_rel, voxel.tau_frac)
        logger.info("Instance %d flagged %s in view %d", instance_id, status.value, ref)
        return {"pre_status": status, "post_status": status}

    def select(self, state: Dict[str, Any]) -> Dict[str, Any]:
        ref = state["references"][state["cursor"]]
        views = state["views"]
        coverage = candidate_views(state["voxel_ids"], state["grid"], [views[v] for v in sorted(views)])
        if ref not in coverage:
            coverage[ref] = CoVisibility(ref, np.zeros(0, dtype=np.int64), np.zeros(0))
        candidates = [v for v in sorted(coverage) if v != ref]
        to_reference, between = score_candidates(ref, coverage, views, candidates)
        timestamps = {v: views[v].timestamp for v in coverage}
        result = select_supporting_views(ref, to_reference, between, self.config.selection, timestamps)
        return {"selection": result, "views_selected": list(result.chosen), "selections": [result.model_dump()]}

    def reconstruct(self, state: Dict[str, Any]) -> Dict[str, Any]:
        ctx, instance_id = self.context, state["instance_id"]
        views = state["views"]
        ref = state["references"][state["cursor"]]
        chosen = list(state["selection"].chosen)
        pm = self.config.patchmatch

        def match(view_id: int, others: List[int]):
            render = ctx.render(view_id)
            mask = ctx.inputs.masks.get(instance_id, {}).get(view_id)
            return patchmatch_iterate(views[view_id], [views[o] for o in others], pm,
                                      init_depth=render.hard_depth, init_normal=render.normal, mask=mask,
                                      instance_id=instance_id)

        ref_map = match(ref, chosen)
        supports = []
        for sup in chosen:
            sup_map = match(sup, [ref] + [o for o in chosen if o != sup])
            supports.append((sup_map, relative_pose(views[ref], views[sup])))
        consistency = filter_consistent(ref_map, supports, pm)
        return {
            "hyp_map": ref_map,
            "consistency": consistency,
            "converged_counts": [int(ref_map.converged.sum())],
            "surviving_counts": [consistency.survivor_count],
        }

    def spawn(self, state: Dict[str, Any]) -> Dict[str, Any]:
        ctx, instance_id = self.context, state["instance_id"]
        ref = state["references"][state["cursor"]]
        ref_view = state["views"][ref]
        hyp_map, survivors = state["hyp_map"], state["consistency"].survivors
        densify = self.config.densify

        points = patches_to_points(hyp_map, survivors, ref_view, densify.stride)
        tag = instance_id if state["dynamic"] else STATIC_INSTANCE
        spawned = spawn_gaussians(points, densify.neighbor_k, densify, instance=tag)

        world = points.positions
        if state["dynamic"]:
            world = ctx.inputs.tracks[instance_id].pose_at(ref_view.timestamp).apply(world).reshape(-1, 3)
        new_points = PointCloud(world, np.full(len(world), int(SourceKind.MVS), dtype=np.uint8),
                                tuple(frozenset({ref}) for _ in range(len(world))))

        target_depth = np.where(survivors, hyp_map.depth(), np.inf)
        target_normal = np.where(survivors[..., None], hyp_map.normals, 0.0)
        logger.info("Instance %d: spawned %d primitives from view %d", instance_id, len(spawned), ref)
        return {
            "spawned": [spawned],
            "new_points": [new_points],
            "targets": [(ref, target_depth, target_normal)],
            "cursor": state["cursor"] + 1,
        }

    def _combined(self, state: Dict[str, Any]) -> GaussianSet:
        combined = self.context.snapshot
        for spawned in state.get("spawned", []):
            combined = combined.concatenate(spawned)
        return combined

    def adjust(self, state: Dict[str, Any]) -> Dict[str, Any]:
        ctx, instance_id = self.context, state["instance_id"]
        densify = self.config.densify
        combined = self._combined(state)
        candidates = np.arange(len(combined)) < len(ctx.snapshot)
        adjusted = 0
        for ref in state["references"]:
            combined, count = adjust_redundant_opacity(
                combined, ctx.training[ref], state["depth_maps"][ref].depth, ctx.mask(instance_id, ref),
                ctx.inputs.tracks, densify.redundancy_factor, densify.redundancy_fraction, candidates, self.config.render,
            )
            adjusted += count
        return {"opacities": combined.opacities[:len(ctx.snapshot)].copy(), "opacity_adjusted": adjusted}

    def evaluate(self, state: Dict[str, Any]) -> Dict[str, Any]:
        ctx, instance_id = self.context, state["instance_id"]
        ref = state["references"][0]
        combined = self._combined(state)
        opacities = combined.opacities.copy()
        opacities[:len(ctx.snapshot)] = state["opacities"]
        updated = combined.with_opacities(opacities)

        view = ctx.training[ref]
        mask = ctx.mask(instance_id, ref)
        after = splat_render(updated, view, ctx.inputs.tracks, self.config.render, ctx.render_threads)
        voxel = self.config.voxel
        post_status = flag_incomplete(mask, state["depth_maps"][ref], after.hard_depth, voxel.tau_rel, voxel.tau_frac)

        updates: Dict[str, Any] = {"post_status": post_status}
        primary = [t for t in state.get("targets", []) if t[0] == ref]
        if primary and view.image is not None:
            _, depth, normal = primary[0]
            _, updates["pre_loss"] = total_loss(ctx.render(ref), view.image, depth, normal, self.config.loss, mask)
            _, updates["post_loss"] = total_loss(after, view.image, depth, normal, self.config.loss, mask)
        logger.info("Instance %d re-evaluated: %s -> %s", instance_id, state["pre_status"].value, post_status.value)
        return updates
