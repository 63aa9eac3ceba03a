import logging
from typing import Optional, Tuple

import numpy as np

from ..config import RenderConfig
from ..geometry import CameraView
from .density import Tracks
from .models import GaussianSet
from .renderer import project_gaussians

logger = logging.getLogger(__name__)

_CHUNK_PIXELS = 2_000_000


def adjust_redundant_opacity(
    gaussians: GaussianSet,
    view: CameraView,
    voxel_depth: np.ndarray,
    mask: np.ndarray,
    tracks: Tracks = None,
    factor: float = 2.0,
    fraction: float = 0.5,
    candidates: Optional[np.ndarray] = None,
    config: Optional[RenderConfig] = None,
) -> Tuple[GaussianSet, int]:
    """Halve the opacity of primitives floating well in front of the voxel surface.

    A primitive is redundant when, over the instance pixels of its footprint
    that carry voxel depth, more than ``fraction`` see it at least ``factor``
    times nearer than the voxel depth. Only rows flagged in ``candidates``
    (default: all) may change.
    """
    config = config or RenderConfig()
    projected = project_gaussians(gaussians, view, tracks, config)
    height, width = voxel_depth.shape
    observed = np.asarray(mask, dtype=bool) & np.isfinite(voxel_depth)
    if len(projected) == 0 or not observed.any():
        return gaussians, 0

    allowed = np.ones(len(gaussians), dtype=bool) if candidates is None else np.asarray(candidates, dtype=bool)
    rows = np.flatnonzero(allowed[projected.source])
    cx, cy, r = projected.means2d[rows, 0], projected.means2d[rows, 1], projected.radii[rows]
    x0 = np.clip(np.ceil(cx - r), 0, width).astype(np.int64)
    x1 = np.clip(np.floor(cx + r), -1, width - 1).astype(np.int64)
    y0 = np.clip(np.ceil(cy - r), 0, height).astype(np.int64)
    y1 = np.clip(np.floor(cy + r), -1, height - 1).astype(np.int64)
    box_w = np.maximum(x1 - x0 + 1, 0)
    counts = box_w * np.maximum(y1 - y0 + 1, 0)
    keep = counts > 0
    rows, x0, y0, box_w, counts = rows[keep], x0[keep], y0[keep], box_w[keep], counts[keep]

    footprint = np.zeros(len(projected), dtype=np.int64)
    near = np.zeros(len(projected), dtype=np.int64)
    conic = projected.conics
    start = 0
    while start < len(rows):
        stop = start + max(1, int(np.searchsorted(np.cumsum(counts[start:]), _CHUNK_PIXELS)))
        chunk, chunk_counts = np.arange(start, stop), counts[start:stop]
        start = stop
        slot = np.repeat(chunk, chunk_counts)
        offsets = np.arange(chunk_counts.sum()) - np.repeat(np.cumsum(chunk_counts) - chunk_counts, chunk_counts)
        px = x0[slot] + offsets % box_w[slot]
        py = y0[slot] + offsets // box_w[slot]
        row = rows[slot]

        du = px - projected.means2d[row, 0]
        dv = py - projected.means2d[row, 1]
        inside = conic[row, 0] * du * du + 2 * conic[row, 1] * du * dv + conic[row, 2] * dv * dv
        inside = (inside <= config.cutoff_sigma ** 2) & observed[py, px]
        row, px, py = row[inside], px[inside], py[inside]
        is_near = projected.depths[row] * factor <= voxel_depth[py, px]
        np.add.at(footprint, row, 1)
        np.add.at(near, row, is_near.astype(np.int64))

    redundant_rows = np.flatnonzero((footprint > 0) & (near > fraction * footprint))
    if len(redundant_rows) == 0:
        return gaussians, 0
    opacities = gaussians.opacities.copy()
    opacities[projected.source[redundant_rows]] *= 0.5
    logger.info("Halved opacity of %d redundant primitives in view %d", len(redundant_rows), view.view_id)
    return gaussians.with_opacities(opacities), len(redundant_rows)
