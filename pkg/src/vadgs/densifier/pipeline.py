"""End-to-end densification: detect incomplete instances, reconstruct them, add primitives."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..config import PipelineConfig
from ..graph_setup import build_instance_graph
from ..splatting import GaussianSet
from ..voxels import InstanceStatus, PointCloud
from .models import DensificationReport, SceneInputs
from .spawn import initialize_from_points
from .stages import InstanceStages, PassContext

logger = logging.getLogger(__name__)


def _report(state: Dict[str, Any], pass_index: int) -> DensificationReport:
    spawned = state.get("spawned", [])
    committed = state.get("opacities") is not None
    return DensificationReport(
        instance_id=state["instance_id"],
        pass_index=pass_index,
        dynamic=bool(state.get("dynamic", False)),
        reference_views=list(state.get("references", [])),
        views_selected=list(state.get("views_selected", [])),
        pixels_converged=sum(state.get("converged_counts", [])),
        pixels_surviving=sum(state.get("surviving_counts", [])),
        points_spawned=sum(len(s) for s in spawned) if committed else 0,
        opacity_adjusted=int(state.get("opacity_adjusted", 0)),
        pre_status=state.get("pre_status", InstanceStatus.UNOBSERVED),
        post_status=state.get("post_status", state.get("pre_status", InstanceStatus.UNOBSERVED)),
        pre_loss=state.get("pre_loss"),
        post_loss=state.get("post_loss"),
        stage=state.get("stage"),
        error=state.get("error"),
    )


def initial_primitives(inputs: SceneInputs, config: PipelineConfig) -> GaussianSet:
    if inputs.priors is not None:
        return inputs.priors
    views = {v.view_id: v for v in inputs.views}
    return initialize_from_points(inputs.points, views, config.densify, spacing=config.densify.init_scale_max)


def run_pipeline(inputs: SceneInputs, config: Optional[PipelineConfig] = None) -> Tuple[GaussianSet, List[DensificationReport]]:
    """Run ``config.densify.repeats`` detect-and-densify passes over every instance with a mask.

    Instances of a pass all read the same snapshot of the primitive set; their
    spawned primitives are appended and their opacity reductions applied in
    ascending instance order once the pass is complete.
    """
    config = config or PipelineConfig()
    gaussians = initial_primitives(inputs, config)
    points = inputs.points
    reports: List[DensificationReport] = []
    instance_ids = sorted(inputs.masks)
    parallel = config.threads is not None and config.threads > 1 and len(instance_ids) > 1

    for pass_index in range(config.densify.repeats):
        context = PassContext(inputs=inputs, config=config, snapshot=gaussians, points=points, pass_index=pass_index,
                              render_threads=None if parallel else config.threads)
        graph = build_instance_graph(InstanceStages(context))
        limit = 16 + 4 * config.densify.reference_views

        def run_instance(instance_id: int) -> Dict[str, Any]:
            logger.info("Pass %d: processing instance %d", pass_index, instance_id)
            return graph.invoke({"instance_id": instance_id, "messages": []}, config={"recursion_limit": limit})

        if parallel:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                states = list(pool.map(run_instance, instance_ids))
        else:
            states = [run_instance(i) for i in instance_ids]

        opacities = gaussians.opacities.copy()
        additions: List[GaussianSet] = []
        new_points: List[PointCloud] = []
        for state in sorted(states, key=lambda s: s["instance_id"]):
            reports.append(_report(state, pass_index))
            if state.get("opacities") is None:
                continue
            opacities = np.minimum(opacities, state["opacities"])
            additions.extend(state.get("spawned", []))
            new_points.extend(state.get("new_points", []))

        gaussians = gaussians.with_opacities(opacities)
        for spawned in additions:
            gaussians = gaussians.concatenate(spawned)
        for cloud in new_points:
            points = points.concatenate(cloud)
        logger.info("Pass %d committed %d new primitives (%d total)", pass_index,
                    sum(len(s) for s in additions), len(gaussians))

    return gaussians, reports
