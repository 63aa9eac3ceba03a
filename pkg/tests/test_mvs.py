"""Plane hypotheses, homography transfer, NCC cost, patch match and geometric consistency."""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from conftest import make_intrinsics, make_view, textured_image
from vadgs.config import PatchMatchConfig
from vadgs.errors import BehindCamera, DegeneratePlane, GrazingPlane, NonPositiveDepth, NoSupportingViews
from vadgs.geometry import (
    CameraIntrinsics,
    ObjectTrack,
    Pixel,
    RigidTransform,
    project,
    relative_pose,
    unproject,
)
from vadgs.mvs import (
    WORST_COST,
    HypothesisMap,
    HypothesisState,
    PlaneHypothesis,
    depth_from_plane,
    filter_consistent,
    geometric_consistency,
    homography_warp,
    ncc_cost,
    object_frame_points,
    object_frame_views,
    patchmatch_iterate,
    photometric_cost,
    plane_from_depth_normal,
    plane_homography,
    warp_rays,
    window_offsets,
)
from vadgs.voxels import PointCloud

DEPTH = 5.0
SHIFT = 2          # disparity in pixels of a 0.2 m baseline at 5 m with f = 50
FRONTO = PlaneHypothesis(d=DEPTH, normal=(0.0, 0.0, -1.0))


def shifted(image, shift, seed=99):
    """Image of the same wall from a camera moved so that content moves by ``-shift`` pixels"""
    filler = textured_image(*image.shape[:2], seed=seed)
    out = filler.copy()
    if shift > 0:
        out[:, :-shift] = image[:, shift:]
    else:
        out[:, -shift:] = image[:, :shift]
    return out


def stereo_rig():
    """Reference at the origin plus one camera 0.2 m to each side, all facing a wall at 5 m"""
    ref_image = textured_image(48, 64, seed=1)
    reference = make_view(0, image=ref_image)
    right = make_view(1, center=(0.2, 0.0, 0.0), image=shifted(ref_image, SHIFT))
    left = make_view(2, center=(-0.2, 0.0, 0.0), image=shifted(ref_image, -SHIFT))
    return reference, right, left


def wall_map(intrinsics, normals=None, offsets=None, states=None):
    shape = intrinsics.shape
    return HypothesisMap(
        intrinsics=intrinsics,
        offsets=np.full(shape, DEPTH) if offsets is None else offsets,
        normals=np.tile([0.0, 0.0, -1.0], shape + (1,)) if normals is None else normals,
        costs=np.zeros(shape),
        states=np.full(shape, HypothesisState.CONVERGED, dtype=np.uint8) if states is None else states,
        active=np.ones(shape, dtype=bool),
    )


def bilinear(gray, u, v):
    x0, y0 = int(np.floor(u)), int(np.floor(v))
    fx, fy = u - x0, v - y0
    x1, y1 = min(x0 + 1, gray.shape[1] - 1), min(y0 + 1, gray.shape[0] - 1)
    top = gray[y0, x0] * (1 - fx) + gray[y0, x1] * fx
    bottom = gray[y1, x0] * (1 - fx) + gray[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


# ── Planes and homographies ──────────────────────────────────────────────────

class TestPlane:

    def test_fronto_parallel_offset(self, intrinsics):
        p = Pixel(u=intrinsics.cx, v=intrinsics.cy)
        hyp = plane_from_depth_normal(p, 2.0, (0.0, 0.0, -1.0), intrinsics)
        assert hyp.d == pytest.approx(2.0)

    def test_slanted_offset(self, intrinsics):
        p = Pixel(u=intrinsics.cx, v=intrinsics.cy)
        hyp = plane_from_depth_normal(p, 2.0, (0.0, -1.0, -1.0), intrinsics)
        assert hyp.d == pytest.approx(np.sqrt(2.0))
        assert np.linalg.norm(hyp.normal_vector) == pytest.approx(1.0)

    def test_depth_round_trip(self, intrinsics, rng):
        for _ in range(100):
            p = Pixel(u=rng.uniform(0, 63), v=rng.uniform(0, 47))
            normal = np.array([rng.normal(0, 0.3), rng.normal(0, 0.3), -1.0])
            z = rng.uniform(0.5, 50)
            hyp = plane_from_depth_normal(p, z, normal, intrinsics)
            assert depth_from_plane(p, hyp, intrinsics) == pytest.approx(z, rel=1e-9)

    def test_grazing_and_nonpositive(self, intrinsics):
        p = Pixel(u=intrinsics.cx, v=intrinsics.cy)
        with pytest.raises(GrazingPlane):
            plane_from_depth_normal(p, 2.0, (1.0, 0.0, 0.0), intrinsics)
        with pytest.raises(NonPositiveDepth):
            plane_from_depth_normal(p, 0.0, (0.0, 0.0, -1.0), intrinsics)

    def test_zero_normal_rejected(self):
        with pytest.raises(ValueError):
            PlaneHypothesis(d=1.0, normal=(0.0, 0.0, 0.0))


class TestHomography:

    def test_known_transfer(self):
        unit = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=1, height=1)
        rel = RigidTransform(translation=(-1.0, 0.0, 0.0))
        hyp = PlaneHypothesis(d=2.0, normal=(0.0, 0.0, -1.0))
        p = homography_warp(Pixel(u=0.5, v=0.3), hyp, unit, unit, rel)
        assert (p.u, p.v) == pytest.approx((0.0, 0.3))

    def test_degenerate_plane(self, intrinsics):
        with pytest.raises(DegeneratePlane):
            plane_homography(PlaneHypothesis(d=0.0, normal=(0.0, 0.0, -1.0)), intrinsics, intrinsics,
                             RigidTransform())

    def test_plane_behind_reference(self, intrinsics):
        hyp = PlaneHypothesis(d=-2.0, normal=(0.0, 0.0, -1.0))
        with pytest.raises(BehindCamera):
            homography_warp(Pixel(u=10, v=10), hyp, intrinsics, intrinsics, RigidTransform())

    def test_point_behind_supporting_camera(self, intrinsics):
        rel = RigidTransform(translation=(0.0, 0.0, -10.0))
        with pytest.raises(BehindCamera):
            homography_warp(Pixel(u=10, v=10), FRONTO, intrinsics, intrinsics, rel)

    def test_matches_point_transfer(self, intrinsics, rng):
        checked = 0
        for _ in range(1000):
            rel = RigidTransform.from_rotation(Rotation.from_rotvec(rng.normal(0, 0.1, 3)), rng.normal(0, 0.5, 3))
            p = Pixel(u=rng.uniform(0, 63), v=rng.uniform(0, 47))
            z = rng.uniform(1, 20)
            normal = np.array([rng.normal(0, 0.3), rng.normal(0, 0.3), -1.0])
            hyp = plane_from_depth_normal(p, z, normal, intrinsics)
            point = rel.apply(unproject(intrinsics, p, z))
            if point[2] <= 0.05:
                continue
            expected, _ = project(intrinsics, point)
            warped = homography_warp(p, hyp, intrinsics, intrinsics, rel)
            assert (warped.u, warped.v) == pytest.approx((expected.u, expected.v), rel=1e-6, abs=1e-6)
            u, v, valid = warp_rays((intrinsics.inverse_matrix @ p.homogeneous())[None], hyp.normal_vector[None],
                                    np.array([hyp.d]), intrinsics, rel)
            assert valid[0]
            assert (u[0], v[0]) == pytest.approx((expected.u, expected.v), rel=1e-6, abs=1e-6)
            checked += 1
        assert checked > 900


# ── Matching cost ────────────────────────────────────────────────────────────

class TestPhotometricCost:

    def test_window_step_one_samples_every_pixel(self):
        du, dv = window_offsets(11)
        assert len(du) == 121
        assert set(zip(du, dv)) == {(float(x), float(y)) for x in range(-5, 6) for y in range(-5, 6)}

    def test_window_step_keeps_the_border(self):
        du, dv = window_offsets(11, step=2)
        assert len(du) == 36
        assert du.min() == dv.min() == -5.0
        assert du.max() == dv.max() == 5.0
        assert PatchMatchConfig().window_step == 2

    def test_true_plane_costs_zero(self):
        reference, right, _ = stereo_rig()
        cost = photometric_cost(reference, right, Pixel(u=30, v=20), FRONTO, window=11)
        assert cost == pytest.approx(0.0, abs=1e-6)

    def test_negated_image_costs_two(self):
        reference, right, _ = stereo_rig()
        negated = right.model_copy(update={"image": 1.0 - right.image})
        assert photometric_cost(reference, negated, Pixel(u=30, v=20), FRONTO, 11) == pytest.approx(2.0, abs=1e-6)

    def test_affine_intensity_invariance(self):
        reference, right, _ = stereo_rig()
        wrong = PlaneHypothesis(d=8.0, normal=(0.0, 0.0, -1.0))
        brighter = right.model_copy(update={"image": 0.5 * right.image + 0.3})
        base = photometric_cost(reference, right, Pixel(u=30, v=20), wrong, 11)
        assert photometric_cost(reference, brighter, Pixel(u=30, v=20), wrong, 11) == pytest.approx(base, abs=1e-9)
        assert base > 0.01

    def test_window_off_image_costs_worst(self):
        reference, right, _ = stereo_rig()
        assert photometric_cost(reference, right, Pixel(u=2, v=20), FRONTO, 11) == WORST_COST

    def test_flat_window_costs_worst(self):
        flat = np.full((48, 64, 3), 0.5)
        reference, right = make_view(0, image=flat), make_view(1, center=(0.2, 0.0, 0.0), image=flat)
        assert photometric_cost(reference, right, Pixel(u=30, v=20), FRONTO, 11) == WORST_COST

    def test_matches_explicit_ncc(self):
        reference, right, _ = stereo_rig()
        hyp = PlaneHypothesis(d=4.7, normal=(0.1, 0.05, -1.0))
        rel = relative_pose(reference, right)
        ref_gray, sup_gray = reference.image.mean(axis=-1), right.image.mean(axis=-1)
        ref_samples, sup_samples = [], []
        for dv in range(-2, 3):
            for du in range(-2, 3):
                p = Pixel(u=30 + du, v=20 + dv)
                q = homography_warp(p, hyp, reference.intrinsics, right.intrinsics, rel)
                ref_samples.append(ref_gray[20 + dv, 30 + du])
                sup_samples.append(bilinear(sup_gray, q.u, q.v))
        a = np.array(ref_samples) - np.mean(ref_samples)
        b = np.array(sup_samples) - np.mean(sup_samples)
        expected = 1.0 - a @ b / np.sqrt((a @ a) * (b @ b))
        assert photometric_cost(reference, right, Pixel(u=30, v=20), hyp, window=5) == pytest.approx(expected, abs=1e-9)

    def test_ncc_cost_rows(self):
        ref = np.array([[0.0, 1.0, 2.0], [1.0, 1.0, 1.0]])
        sup = np.array([[0.0, 2.0, 4.0], [0.0, 1.0, 2.0]])
        np.testing.assert_allclose(ncc_cost(ref, sup), [0.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(ncc_cost(ref, sup, np.array([False, True])), [2.0, 2.0])


# ── Patch match ──────────────────────────────────────────────────────────────

class TestPatchMatch:

    def _config(self, **updates):
        base = dict(window=5, window_step=1, iterations=2)
        base.update(updates)
        return PatchMatchConfig(**base)

    def test_seeded_with_truth_keeps_exact_depth(self):
        reference, right, left = stereo_rig()
        init_depth = np.full((48, 64), DEPTH)
        init_normal = np.tile([0.0, 0.0, -1.0], (48, 64, 1))
        hyp_map = patchmatch_iterate(reference, [right, left], self._config(), init_depth, init_normal)
        interior = (slice(2, 46), slice(4, 60))
        assert hyp_map.converged[interior].all()
        np.testing.assert_allclose(hyp_map.depth()[interior], DEPTH, rtol=1e-12)

    def test_mask_isolates_pixels(self):
        reference, right, left = stereo_rig()
        mask = np.zeros((48, 64), dtype=bool)
        mask[:, :32] = True
        hyp_map = patchmatch_iterate(reference, [right, left], self._config(iterations=1), mask=mask)
        outside = ~mask
        assert np.all(hyp_map.states[outside] == HypothesisState.INVALID)
        assert np.all(hyp_map.normals[outside] == 0)
        assert np.all(hyp_map.offsets[outside] == 0)
        assert np.all(np.isinf(hyp_map.depth()[outside]))

    def test_textureless_never_converges(self):
        flat = np.full((48, 64, 3), 0.4)
        reference = make_view(0, image=flat)
        others = [make_view(1, center=(0.2, 0.0, 0.0), image=flat)]
        hyp_map = patchmatch_iterate(reference, others, self._config(iterations=1))
        assert not hyp_map.converged.any()

    def test_requires_supporting_views(self):
        reference, _, _ = stereo_rig()
        with pytest.raises(NoSupportingViews):
            patchmatch_iterate(reference, [], self._config())

    def test_deterministic(self):
        reference, right, left = stereo_rig()
        first = patchmatch_iterate(reference, [right, left], self._config())
        second = patchmatch_iterate(reference, [right, left], self._config())
        np.testing.assert_array_equal(first.offsets, second.offsets)
        np.testing.assert_array_equal(first.states, second.states)

    def test_random_start_keyed_on_instance(self):
        reference, right, left = stereo_rig()
        first = patchmatch_iterate(reference, [right, left], self._config(iterations=0), instance_id=1)
        again = patchmatch_iterate(reference, [right, left], self._config(iterations=0), instance_id=1)
        other = patchmatch_iterate(reference, [right, left], self._config(iterations=0), instance_id=2)
        np.testing.assert_array_equal(first.offsets, again.offsets)
        assert not np.array_equal(first.offsets, other.offsets)

    @pytest.mark.slow
    def test_random_start_recovers_wall(self):
        reference, right, left = stereo_rig()
        hyp_map = patchmatch_iterate(reference, [right, left], self._config(iterations=8))
        interior = np.zeros((48, 64), dtype=bool)
        interior[2:46, 4:60] = True
        converged = hyp_map.converged & interior
        assert converged.sum() > 0.5 * interior.sum()
        error = np.abs(hyp_map.depth()[converged] - DEPTH) / DEPTH
        assert np.mean(error <= 0.01) >= 0.8


# ── Geometric consistency ────────────────────────────────────────────────────

class TestGeometricConsistency:

    def _maps(self):
        reference, right, _ = stereo_rig()
        return reference, right, wall_map(reference.intrinsics), relative_pose(reference, right)

    def test_agreeing_maps_pass(self):
        _, _, ref_map, rel = self._maps()
        check = geometric_consistency(ref_map, wall_map(ref_map.intrinsics), Pixel(u=30, v=20), rel,
                                      PatchMatchConfig())
        assert check.passed
        assert check.reprojection_error == pytest.approx(0.0, abs=1e-9)
        assert check.depth_error == pytest.approx(0.0, abs=1e-12)

    def test_depth_disagreement_fails(self):
        _, _, ref_map, rel = self._maps()
        farther = wall_map(ref_map.intrinsics, offsets=np.full((48, 64), 1.05 * DEPTH))
        check = geometric_consistency(ref_map, farther, Pixel(u=30, v=20), rel, PatchMatchConfig())
        assert not check.passed
        assert check.depth_error > 0.02

    def test_normal_disagreement_fails(self, intrinsics):
        _, _, ref_map, rel = self._maps()
        tilted = Rotation.from_euler("y", 20, degrees=True).apply([0.0, 0.0, -1.0])
        v, u = np.mgrid[0:48, 0:64]
        rays = np.stack([(u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy,
                         np.ones(u.shape)], axis=-1)
        offsets = -DEPTH * rays @ tilted
        sup_map = wall_map(intrinsics, normals=np.tile(tilted, (48, 64, 1)), offsets=offsets)
        strict = geometric_consistency(ref_map, sup_map, Pixel(u=30, v=20), rel, PatchMatchConfig())
        loose = geometric_consistency(ref_map, sup_map, Pixel(u=30, v=20), rel, PatchMatchConfig(geo_max_deg=30))
        assert strict.normal_angle == pytest.approx(20.0, abs=1e-6)
        assert not strict.passed
        assert loose.passed

    def test_unconverged_supporting_pixel_fails(self):
        _, _, ref_map, rel = self._maps()
        states = np.full((48, 64), HypothesisState.RANDOM, dtype=np.uint8)
        check = geometric_consistency(ref_map, wall_map(ref_map.intrinsics, states=states), Pixel(u=30, v=20), rel,
                                      PatchMatchConfig())
        assert not check.passed

    def test_filter_keeps_every_consistent_pixel(self):
        _, _, _, rel = self._maps()
        intr = make_intrinsics()
        states = np.full((48, 64), HypothesisState.RANDOM, dtype=np.uint8)
        states[:, 4:60] = HypothesisState.CONVERGED
        ref_map = wall_map(intr, states=states)
        result = filter_consistent(ref_map, [(wall_map(intr), rel)], PatchMatchConfig(min_consistent=1))
        np.testing.assert_array_equal(result.survivors, ref_map.converged)
        strict = filter_consistent(ref_map, [(wall_map(intr), rel)], PatchMatchConfig(min_consistent=2))
        assert strict.survivor_count == 0

    def test_survivors_are_converged(self):
        reference, right, left = stereo_rig()
        config = PatchMatchConfig(window=5, window_step=1, iterations=1, min_consistent=1)
        ref_map = patchmatch_iterate(reference, [right, left], config)
        sup_map = patchmatch_iterate(right, [reference, left], config)
        result = filter_consistent(ref_map, [(sup_map, relative_pose(reference, right))], config)
        assert not np.any(result.survivors & ~ref_map.converged)


# ── Moving instances ─────────────────────────────────────────────────────────

class TestObjectFrame:

    def _track(self):
        timestamps = tuple(0.1 * k for k in range(4))
        poses = tuple(RigidTransform(translation=(float(k), 0.0, 0.0)) for k in range(4))
        return ObjectTrack(instance_id=1, timestamps=timestamps, poses=poses)

    def test_identity_track_keeps_poses(self):
        track = ObjectTrack(instance_id=1, timestamps=(0.0,), poses=(RigidTransform(),))
        view = make_view(0, center=(1.0, 2.0, 3.0), yaw_deg=15.0)
        moved = object_frame_views([view], track)[0]
        np.testing.assert_allclose(moved.world_from_camera.to_matrix(), view.world_from_camera.to_matrix(),
                                   atol=1e-12)

    def test_static_camera_moves_backwards_in_object_frame(self):
        views = [make_view(k, timestamp=0.1 * k, frame_index=k) for k in range(4)]
        moved = object_frame_views(views, self._track())
        for k, view in enumerate(moved):
            np.testing.assert_allclose(view.center, [-float(k), 0.0, 0.0], atol=1e-12)

    def test_points_use_first_source_view_time(self):
        cloud = PointCloud(np.array([[2.0, 0.0, 5.0], [3.0, 1.0, 5.0]]), np.array([0, 1], dtype=np.uint8),
                           (frozenset({2}), frozenset({3, 1})))
        local = object_frame_points(cloud, self._track(), {k: 0.1 * k for k in range(4)})
        np.testing.assert_allclose(local.positions, [[0.0, 0.0, 5.0], [2.0, 1.0, 5.0]], atol=1e-12)
