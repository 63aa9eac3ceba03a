"""Tile-based forward splatting renderer.

Primitives are projected with the first-order (Jacobian) approximation of
the perspective map, sorted front to back and alpha-composited per pixel.
Each projected Gaussian is truncated outside its ``cutoff_sigma`` ellipse so
that tile binning by bounding box is exact.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..config import RenderConfig
from ..geometry import CameraView
from .density import Tracks, gaussian_normals, pose_gaussians
from .models import GaussianSet, RenderOutput

logger = logging.getLogger(__name__)

@dataclass(frozen=True)
class ProjectedGaussians:
    """Screen-space primitives in front-to-back order"""
    means2d: np.ndarray     # (M, 2)
    conics: np.ndarray      # (M, 3) inverse 2D covariance a, b, c of [[a, b], [b, c]]
    radii: np.ndarray       # (M,) pixel radius of the cutoff ellipse's bounding circle
    depths: np.ndarray      # (M,)
    opacities: np.ndarray   # (M,)
    colors: np.ndarray      # (M, 3)
    normals: np.ndarray     # (M, 3) camera frame
    source: np.ndarray      # (M,) row of each primitive in the input set

    def __len__(self) -> int:
        return len(self.depths)


def project_gaussians(gaussians: GaussianSet, view: CameraView, tracks: Tracks = None,
                      config: Optional[RenderConfig] = None) -> ProjectedGaussians:
    """Project, cull and depth-sort primitives for one view.

    Primitives nearer than ``config.znear`` are dropped.
    """
    config = config or RenderConfig()
    intr = view.intrinsics
    means, rotations = pose_gaussians(gaussians, view.timestamp, tracks)
    camera_from_world = view.camera_from_world
    w = camera_from_world.rotation_matrix
    points = camera_from_world.apply(means) if len(means) else np.zeros((0, 3))
    front = points[:, 2] >= config.znear

    points = points[front]
    rotations = rotations[front]
    scales = gaussians.scales[front]
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    # footprints of primitives far outside the frustum use the Jacobian at its border
    lim_x = config.frustum_margin * intr.width / (2.0 * intr.fx)
    lim_y = config.frustum_margin * intr.height / (2.0 * intr.fy)
    jx = np.clip(x / z, -lim_x, lim_x) * z
    jy = np.clip(y / z, -lim_y, lim_y) * z

    cov_world = np.einsum("nij,nj,nkj->nik", rotations, np.square(scales), rotations)
    cov_cam = np.einsum("ij,njk,lk->nil", w, cov_world, w)
    jac = np.zeros((len(z), 2, 3))
    jac[:, 0, 0] = intr.fx / z
    jac[:, 0, 2] = -intr.fx * jx / z ** 2
    jac[:, 1, 1] = intr.fy / z
    jac[:, 1, 2] = -intr.fy * jy / z ** 2
    cov2d = np.einsum("nij,njk,nlk->nil", jac, cov_cam, jac)
    cov2d[:, 0, 0] += config.lowpass
    cov2d[:, 1, 1] += config.lowpass

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    conics = np.stack([c / det, -b / det, a / det], axis=1)
    half_trace = 0.5 * (a + c)
    lambda_max = half_trace + np.sqrt(np.maximum(half_trace ** 2 - det, 0.0))
    radii = config.cutoff_sigma * np.sqrt(lambda_max)

    means2d = np.stack([intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy], axis=1)
    normals = gaussian_normals(means[front], rotations, scales, view.center) @ w.T

    source = np.flatnonzero(front)
    colors = gaussians.colors[front]
    opacities = gaussians.opacities[front]
    # lexsort's last key is primary: depth first, then every parameter so ties do not depend on input order
    order = np.lexsort((
        *colors.T[::-1], opacities, *gaussians.rotations[front].T[::-1], *scales.T[::-1],
        *gaussians.means[front].T[::-1], z,
    ))
    return ProjectedGaussians(
        means2d=means2d[order], conics=conics[order], radii=radii[order], depths=z[order],
        opacities=opacities[order], colors=colors[order], normals=normals[order], source=source[order],
    )


def splat_alpha(projected: ProjectedGaussians, rows: np.ndarray, u: np.ndarray, v: np.ndarray,
                cutoff_sigma: float) -> np.ndarray:
    """Alpha of primitives ``rows`` at pixels (u, v): shape (len(rows), len(u))"""
    du = u[None, :] - projected.means2d[rows, 0, None]
    dv = v[None, :] - projected.means2d[rows, 1, None]
    conic = projected.conics[rows]
    mahalanobis = conic[:, 0, None] * du * du + 2 * conic[:, 1, None] * du * dv + conic[:, 2, None] * dv * dv
    alpha = projected.opacities[rows, None] * np.exp(-0.5 * mahalanobis)
    alpha[mahalanobis > cutoff_sigma ** 2] = 0.0
    return np.minimum(alpha, 1.0)


def composite(alpha: np.ndarray, min_transmittance: float):
    """Front-to-back weights for an (n, P) alpha stack.

    Returns (weights, transmittance). Contributions stop once the
    transmittance in front of a primitive drops below ``min_transmittance``;
    transmittance itself keeps accumulating over every primitive.
    """
    survive = np.cumprod(1.0 - alpha, axis=0)
    before = np.vstack([np.ones((1, alpha.shape[1])), survive[:-1]])
    weights = alpha * before * (before >= min_transmittance)
    transmittance = survive[-1] if len(alpha) else np.ones(alpha.shape[1])
    return weights, transmittance


def splat_render(gaussians: GaussianSet, view: CameraView, tracks: Tracks = None,
                 config: Optional[RenderConfig] = None, threads: Optional[int] = None) -> RenderOutput:
    """Render color, soft/hard depth, normals and accumulated alpha for one view"""
    config = config or RenderConfig()
    height, width = view.intrinsics.height, view.intrinsics.width
    output = RenderOutput.blank(height, width)
    projected = project_gaussians(gaussians, view, tracks, config)
    if len(projected) == 0:
        return output

    tile = config.tile_size
    tiles_x = (width + tile - 1) // tile
    tiles_y = (height + tile - 1) // tile
    cx, cy, r = projected.means2d[:, 0], projected.means2d[:, 1], projected.radii
    tx0 = np.clip(np.floor((cx - r) / tile), 0, tiles_x).astype(np.int64)
    tx1 = np.clip(np.floor((cx + r) / tile), -1, tiles_x - 1).astype(np.int64)
    ty0 = np.clip(np.floor((cy - r) / tile), 0, tiles_y).astype(np.int64)
    ty1 = np.clip(np.floor((cy + r) / tile), -1, tiles_y - 1).astype(np.int64)
    span_x = np.maximum(tx1 - tx0 + 1, 0)
    span_y = np.maximum(ty1 - ty0 + 1, 0)
    counts = span_x * span_y

    # one (tile, primitive) pair per overlap; primitives keep their depth order within a tile
    rows = np.repeat(np.arange(len(projected)), counts)
    local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    tile_x = tx0[rows] + local % np.maximum(span_x[rows], 1)
    tile_y = ty0[rows] + local // np.maximum(span_x[rows], 1)
    tile_ids = tile_y * tiles_x + tile_x
    order = np.lexsort((rows, tile_ids))
    rows, tile_ids = rows[order], tile_ids[order]
    occupied, starts = np.unique(tile_ids, return_index=True)
    bins = np.split(rows, starts[1:])

    def render_tile(tile_id: int, members: np.ndarray) -> None:
        ty, tx = divmod(int(tile_id), tiles_x)
        y0, x0 = ty * tile, tx * tile
        y1, x1 = min(y0 + tile, height), min(x0 + tile, width)
        v, u = np.mgrid[y0:y1, x0:x1]
        u = u.ravel().astype(np.float64)
        v = v.ravel().astype(np.float64)

        alpha = splat_alpha(projected, members, u, v, config.cutoff_sigma)
        weights, transmittance = composite(alpha, config.min_transmittance)
        shape = (y1 - y0, x1 - x0)
        total = weights.sum(axis=0)
        depths = projected.depths[members]

        output.color[y0:y1, x0:x1] = (weights.T @ projected.colors[members]).reshape(*shape, 3)
        output.accumulated_alpha[y0:y1, x0:x1] = (1.0 - transmittance).reshape(shape)
        output.transmittance[y0:y1, x0:x1] = transmittance.reshape(shape)

        covered = total > 0
        soft = np.full(len(u), np.inf)
        soft[covered] = (weights.T @ depths)[covered] / total[covered]
        output.soft_depth[y0:y1, x0:x1] = soft.reshape(shape)

        opaque = (1.0 - np.cumprod(1.0 - alpha, axis=0)) >= config.hard_depth_threshold
        opaque &= weights > 0
        crossed = opaque.any(axis=0)
        hard = np.full(len(u), np.inf)
        hard[crossed] = depths[np.argmax(opaque, axis=0)[crossed]]
        output.hard_depth[y0:y1, x0:x1] = hard.reshape(shape)

        normals = weights.T @ projected.normals[members]
        norm = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = np.divide(normals, norm, out=np.zeros_like(normals), where=norm > 0)
        output.normal[y0:y1, x0:x1] = normals.reshape(*shape, 3)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(render_tile, occupied, bins))
    else:
        for tile_id, members in zip(occupied, bins):
            render_tile(tile_id, members)

    logger.debug("Rendered %d primitives into view %d over %d tiles", len(projected), view.view_id, len(occupied))
    return output
