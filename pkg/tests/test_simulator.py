"""Synthetic scene generation: ray-cast truth, LiDAR, tracks, priors and spec validation."""
import json
import os

import numpy as np
import pytest

from conftest import SCENES_DIR, make_intrinsics, tiny_spec
from vadgs.errors import InvalidSpec
from vadgs.geometry import RigidTransform, project
from vadgs.simulator import (
    BoxPrimitive,
    PlanePrimitive,
    RigCamera,
    TrajectorySpec,
    build_views,
    default_rig,
    generate,
    gt_depth,
    load_spec,
    posed,
    render_truth,
    validate_spec,
    value_noise,
)
from vadgs.splatting import STATIC_INSTANCE
from vadgs.voxels import SourceKind

SCENE_FILES = sorted(f for f in os.listdir(SCENES_DIR) if f.endswith(".json"))


def wall(instance_id=0, z=6.0, size=(12.0, 8.0), **fields):
    return PlanePrimitive(instance_id=instance_id, pose=RigidTransform(translation=(0.0, 0.0, z)), size=size,
                          texture_scale=0.3, texture_seed=5 + instance_id, **fields)


def moving_box_spec():
    box = BoxPrimitive(instance_id=1, pose=RigidTransform(translation=(-1.0, 0.0, 8.0)), size=(1.0, 1.0, 1.0),
                       velocity=(1.0, 0.0, 0.0), texture_scale=0.2, texture_seed=8)
    return tiny_spec(
        primitives=[wall(z=12.0, size=(20.0, 14.0)), box],
        trajectory=TrajectorySpec(frames=3, period=0.1, velocity=(0.0, 0.0, 0.5)),
    )


# ── Ground truth ─────────────────────────────────────────────────────────────

class TestGroundTruth:

    def test_wall_depth_and_normals(self, tiny_scene):
        for view in tiny_scene.views:
            np.testing.assert_allclose(tiny_scene.truth.depth[view.view_id], 6.0, rtol=1e-12)
            normals = tiny_scene.truth.normals[view.view_id]
            np.testing.assert_allclose(normals.reshape(-1, 3), np.tile([0.0, 0.0, -1.0], (48 * 64, 1)), atol=1e-12)

    def test_views_follow_trajectory(self, tiny_scene):
        assert [v.view_id for v in tiny_scene.views] == [0, 1, 2, 3]
        for view in tiny_scene.views:
            assert view.timestamp == pytest.approx(0.1 * view.frame_index)
            np.testing.assert_allclose(view.center, (0.1 * view.frame_index, 0.0, 0.0), atol=1e-12)

    def test_images_and_masks(self, tiny_scene):
        for view in tiny_scene.views:
            assert view.image.shape == (48, 64, 3)
            assert view.image.min() >= 0.0 and view.image.max() <= 1.0
            assert np.all(tiny_scene.truth.instances[view.view_id] == 0)
            assert tiny_scene.truth.masks[0][view.view_id].all()

    def test_empty_scene(self):
        scene = generate(tiny_spec(primitives=[]))
        assert np.all(np.isinf(scene.truth.depth[0]))
        np.testing.assert_allclose(scene.views[0].image, np.broadcast_to(scene.spec.sky_color, (48, 64, 3)))
        assert scene.truth.masks == {}
        assert len(scene.truth.lidar) == 0
        assert len(scene.priors) == 0

    def test_plane_behind_camera(self):
        spec = tiny_spec(primitives=[wall(z=-6.0)])
        assert np.all(np.isinf(gt_depth(spec, build_views(spec)[0])))

    def test_nearer_surface_wins(self):
        spec = tiny_spec(primitives=[wall(), wall(instance_id=1, z=3.0, size=(1.0, 1.0))])
        _, depth, _, instances = render_truth(spec, build_views(spec)[0])
        assert depth[24, 32] == pytest.approx(3.0)
        assert instances[24, 32] == 1
        assert depth[0, 0] == pytest.approx(6.0)
        assert instances[0, 0] == 0

    def test_generation_is_deterministic(self, tiny_scene):
        again = generate(tiny_spec())
        for first, second in zip(tiny_scene.views, again.views):
            np.testing.assert_array_equal(first.image, second.image)
        np.testing.assert_array_equal(tiny_scene.truth.lidar.positions, again.truth.lidar.positions)
        np.testing.assert_array_equal(tiny_scene.priors.means, again.priors.means)

    def test_threaded_generation_matches(self, tiny_scene):
        threaded = generate(tiny_spec(), threads=2)
        for first, second in zip(tiny_scene.views, threaded.views):
            np.testing.assert_array_equal(first.image, second.image)


class TestLidar:

    def test_points_lie_on_the_wall(self, tiny_scene):
        lidar = tiny_scene.truth.lidar
        assert 0 < len(lidar) <= 4 * 300
        np.testing.assert_allclose(lidar.positions[:, 2], 6.0, atol=1e-9)
        assert np.all(lidar.kinds == int(SourceKind.LIDAR))
        assert all(len(views) == 1 and min(views) in range(4) for views in lidar.source_views)

    def test_points_tagged_with_their_frame(self, tiny_scene):
        lidar = tiny_scene.truth.lidar
        frames = np.array([min(views) for views in lidar.source_views])
        assert np.all(np.diff(frames) >= 0)
        assert set(frames) == {0, 1, 2, 3}

    def test_random_pattern_depends_on_seed(self):
        lidar = tiny_spec().lidar.model_copy(update={"pattern": "random"})
        first = generate(tiny_spec(lidar=lidar, seed=1)).truth.lidar.positions
        second = generate(tiny_spec(lidar=lidar, seed=2)).truth.lidar.positions
        assert first.shape != second.shape or not np.array_equal(first, second)

    def test_max_range_drops_far_hits(self):
        lidar = tiny_spec().lidar.model_copy(update={"max_range": 5.0})
        assert len(generate(tiny_spec(lidar=lidar)).truth.lidar) == 0


class TestDynamicInstances:

    def test_track_follows_velocity(self):
        scene = generate(moving_box_spec())
        track = scene.truth.tracks[1]
        assert 0 not in scene.truth.tracks
        for t in (0.0, 0.1, 0.2):
            np.testing.assert_allclose(track.pose_at(t).translation, (-1.0 + t, 0.0, 8.0), atol=1e-12)

    def test_front_face_reprojects_onto_box_pixels(self):
        scene = generate(moving_box_spec())
        track = scene.truth.tracks[1]
        for view in scene.views:
            face = track.pose_at(view.timestamp).apply(np.array([0.0, 0.0, -0.5]))
            pixel, z = project(view.intrinsics, view.camera_from_world.apply(face))
            u, v = int(round(pixel.u)), int(round(pixel.v))
            assert scene.truth.instances[view.view_id][v, u] == 1
            assert scene.truth.depth[view.view_id][v, u] == pytest.approx(z, rel=1e-9)

    def test_dynamic_priors_live_in_object_frame(self):
        scene = generate(moving_box_spec())
        dynamic = scene.priors.instances == 1
        assert dynamic.any()
        assert np.any(scene.priors.instances == STATIC_INSTANCE)
        assert np.all(np.abs(scene.priors.means[dynamic]) <= 0.5 + 1e-9)

    def test_posed_static_primitive_ignores_time(self):
        plane = wall()
        assert posed(plane, 3.0) == plane.pose


# ── Specs ────────────────────────────────────────────────────────────────────

class TestSpecValidation:

    def test_dynamic_instance_must_be_single_primitive(self):
        spec = tiny_spec(primitives=[wall(instance_id=2), wall(instance_id=2, z=8.0, velocity=(1.0, 0.0, 0.0))])
        with pytest.raises(InvalidSpec) as info:
            validate_spec(spec)
        assert info.value.field == "primitives.1.instance_id"

    def test_static_instance_may_span_primitives(self):
        validate_spec(tiny_spec(primitives=[wall(instance_id=2), wall(instance_id=2, z=8.0)]))

    def test_zero_extent_rejected(self):
        with pytest.raises(InvalidSpec) as info:
            validate_spec(tiny_spec(primitives=[wall(size=(0.0, 1.0))]))
        assert info.value.field == "primitives.0.size"

    def test_textureless_surface_rejected(self):
        with pytest.raises(InvalidSpec) as info:
            generate(tiny_spec(primitives=[wall(contrast=0.0)]))
        assert info.value.field == "primitives.contrast"

    def test_missing_rig_rejected(self):
        with pytest.raises(InvalidSpec):
            validate_spec(tiny_spec(rig=[]))

    def test_unreadable_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(InvalidSpec):
            load_spec(path)

    @pytest.mark.parametrize("payload, field", [
        ({"trajectory": {"frames": 0}}, "trajectory.frames"),
        ({"lidar": {"rays_per_frame": 6000}}, "lidar.rays_per_frame"),
        ({"colour": 1}, "colour"),
    ])
    def test_field_errors_name_the_field(self, tmp_path, payload, field):
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(InvalidSpec) as info:
            load_spec(path)
        assert info.value.field == field

    @pytest.mark.parametrize("name", SCENE_FILES)
    def test_bundled_scenes_are_valid(self, name):
        validate_spec(load_spec(os.path.join(SCENES_DIR, name)))

    def test_default_rig(self):
        rig = default_rig()
        assert [cam.camera_id for cam in rig] == [0, 1, 2]
        assert rig[0].intrinsics.shape == (240, 320)
        forward = [cam.rig_from_camera.rotate([0.0, 0.0, 1.0]) for cam in rig]
        assert forward[0] == pytest.approx([0.0, 0.0, 1.0])
        assert forward[1][0] < 0 < forward[2][0]

    def test_view_ids_interleave_cameras(self):
        rig = [RigCamera(camera_id=i, intrinsics=make_intrinsics()) for i in range(2)]
        views = build_views(tiny_spec(rig=rig))
        assert [(v.view_id, v.frame_index, v.camera_id) for v in views[:4]] == [(0, 0, 0), (1, 0, 1), (2, 1, 0), (3, 1, 1)]


class TestTexture:

    def test_range_and_determinism(self, rng):
        u, v = rng.uniform(-50, 50, 500), rng.uniform(-50, 50, 500)
        noise = value_noise(u, v, seed=3)
        assert noise.min() >= 0.0 and noise.max() <= 1.0
        np.testing.assert_array_equal(noise, value_noise(u, v, seed=3))
        assert not np.array_equal(noise, value_noise(u, v, seed=4))
