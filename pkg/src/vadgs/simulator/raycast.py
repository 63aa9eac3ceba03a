"""Exact ray casting against the analytic scene primitives."""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..geometry import RigidTransform
from .models import BoxPrimitive, PlanePrimitive
from .texture import surface_color

_EPS = 1e-9
_LIGHT = np.array([0.3, -1.0, -0.4]) / np.linalg.norm([0.3, -1.0, -0.4])


def posed(primitive, timestamp: float) -> RigidTransform:
    """world_from_local of a primitive at ``timestamp``"""
    if not primitive.dynamic:
        return primitive.pose
    moved = primitive.pose.translation_vector + np.asarray(primitive.velocity) * timestamp
    return RigidTransform(rotation=primitive.pose.rotation, translation=tuple(float(x) for x in moved))


def flat_shade(world_normals: np.ndarray) -> np.ndarray:
    return 0.6 + 0.4 * np.abs(world_normals @ _LIGHT)


@dataclass
class Hits:
    """Nearest hit per ray; t is the ray parameter, inf on a miss"""
    t: np.ndarray
    normals: np.ndarray     # world frame, facing the ray origin
    colors: np.ndarray
    instances: np.ndarray   # -1 on a miss
    primitives: np.ndarray  # index into the primitive list, -1 on a miss


def _plane_hits(prim: PlanePrimitive, origin_local: np.ndarray, dirs_local: np.ndarray):
    dz = dirs_local[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -origin_local[..., 2] / dz
    points = origin_local + t[:, None] * dirs_local
    half_w, half_h = prim.size[0] / 2.0, prim.size[1] / 2.0
    hit = (np.abs(dz) > 1e-15) & (t > _EPS) & (np.abs(points[:, 0]) <= half_w) & (np.abs(points[:, 1]) <= half_h)
    normals = np.tile([0.0, 0.0, 1.0], (len(t), 1))
    return np.where(hit, t, np.inf), normals, points[:, 0], points[:, 1]


def box_face_uv(points: np.ndarray, axis: np.ndarray, sign: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Texture coordinates on box faces; each face gets its own offset in texture space"""
    first = np.where(axis == 0, points[:, 1], points[:, 0])
    second = np.where(axis == 2, points[:, 1], points[:, 2])
    offset = 37.0 * axis + 11.0 * (sign > 0)
    return first + offset, second + offset


def _box_hits(prim: BoxPrimitive, origin_local: np.ndarray, dirs_local: np.ndarray):
    half = np.asarray(prim.size) / 2.0
    safe = np.where(np.abs(dirs_local) < 1e-15, 1e-15, dirs_local)
    t1 = (-half - origin_local) / safe
    t2 = (half - origin_local) / safe
    near, far = np.minimum(t1, t2), np.maximum(t1, t2)
    axis = np.argmax(near, axis=1)
    t_near = near[np.arange(len(near)), axis]
    t_far = far.min(axis=1)
    hit = (t_near <= t_far) & (t_near > _EPS)
    sign = -np.sign(safe[np.arange(len(safe)), axis])
    normals = np.zeros((len(t_near), 3))
    normals[np.arange(len(t_near)), axis] = sign
    points = origin_local + t_near[:, None] * dirs_local
    u, v = box_face_uv(points, axis, sign)
    return np.where(hit, t_near, np.inf), normals, u, v


def cast(primitives: Sequence, timestamp: float, origin: np.ndarray, directions: np.ndarray) -> Hits:
    """Nearest primitive along rays ``origin + t * directions``; ties go to the earlier primitive"""
    shape = directions.shape[:-1]
    dirs = directions.reshape(-1, 3)
    n = len(dirs)
    best = Hits(np.full(n, np.inf), np.zeros((n, 3)), np.zeros((n, 3)), np.full(n, -1, dtype=np.int64),
                np.full(n, -1, dtype=np.int64))
    for index, prim in enumerate(primitives):
        pose = posed(prim, timestamp)
        local_from_world = pose.inverse()
        origin_local = np.broadcast_to(local_from_world.apply(np.asarray(origin, dtype=np.float64)), (n, 3))
        dirs_local = local_from_world.rotate(dirs)
        if isinstance(prim, PlanePrimitive):
            t, normals, u, v = _plane_hits(prim, origin_local, dirs_local)
        else:
            t, normals, u, v = _box_hits(prim, origin_local, dirs_local)
        closer = t < best.t
        if not closer.any():
            continue
        world_normals = pose.rotate(normals[closer])
        facing = np.einsum("nc,nc->n", world_normals, dirs[closer]) > 0
        world_normals[facing] *= -1
        colors = surface_color(u[closer], v[closer], prim.texture_seed, prim.texture_scale, prim.base_color, prim.contrast)
        best.t[closer] = t[closer]
        best.normals[closer] = world_normals
        best.colors[closer] = np.clip(colors * flat_shade(world_normals)[:, None], 0.0, 1.0)
        best.instances[closer] = prim.instance_id
        best.primitives[closer] = index
    return Hits(best.t.reshape(shape), best.normals.reshape(shape + (3,)), best.colors.reshape(shape + (3,)),
                best.instances.reshape(shape), best.primitives.reshape(shape))
