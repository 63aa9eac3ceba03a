"""File formats, scene manifests, metrics and report storage."""
import json

import numpy as np
import pytest

from vadgs.densifier import DensificationReport
from vadgs.errors import DimensionMismatch, FormatError, ManifestError, NoValidPixels
from vadgs.io import (
    PSNR_CAP,
    ReportStorage,
    depth_accuracy,
    load_cameras,
    load_ground_truth,
    load_gt_instances,
    load_manifest,
    load_scene_inputs,
    mean_depth_error,
    normal_accuracy,
    psnr,
    read_gaussians_ply,
    read_index,
    read_pfm,
    read_pgm,
    read_ply,
    read_points_ply,
    read_ppm,
    summarize_reports,
    write_gaussians_ply,
    write_index,
    write_pfm,
    write_pgm,
    write_points_ply,
    write_ppm,
    write_simulated_scene,
)
from vadgs.splatting import GaussianSet
from vadgs.voxels import InstanceStatus, PointCloud, SourceKind


@pytest.fixture
def scene_dir(tmp_path, tiny_scene):
    write_simulated_scene(tiny_scene, tmp_path / "scene")
    return tmp_path / "scene"


# ── Formats ──────────────────────────────────────────────────────────────────

class TestPly:

    def test_points(self, tmp_path, rng):
        positions = rng.normal(size=(20, 3))
        kinds = np.array([int(SourceKind.LIDAR)] * 10 + [int(SourceKind.SFM)] * 10, dtype=np.uint8)
        views = tuple(frozenset({i % 3, 5}) for i in range(20))
        write_points_ply(tmp_path / "points.ply", PointCloud(positions, kinds, views))
        back = read_points_ply(tmp_path / "points.ply", [sorted(v) for v in views])
        np.testing.assert_array_equal(back.positions, positions)
        np.testing.assert_array_equal(back.kinds, kinds)
        assert back.source_views == views

    def test_provenance_length_must_match(self, tmp_path):
        cloud = PointCloud(np.zeros((2, 3)), np.zeros(2, dtype=np.uint8), (frozenset({0}), frozenset({0})))
        write_points_ply(tmp_path / "points.ply", cloud)
        with pytest.raises(FormatError):
            read_points_ply(tmp_path / "points.ply", [[0]])

    def test_gaussians_keep_instances(self, tmp_path, rng):
        n = 6
        gaussians = GaussianSet(
            means=rng.normal(size=(n, 3)), scales=rng.uniform(0.1, 1.0, (n, 3)),
            rotations=np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)), opacities=rng.uniform(0, 1, n),
            colors=rng.uniform(0, 1, (n, 3)), instances=np.array([-1, -1, 2, 2, 3, -1]),
        )
        write_gaussians_ply(tmp_path / "g.ply", gaussians)
        back = read_gaussians_ply(tmp_path / "g.ply")
        for name in ("means", "scales", "rotations", "opacities", "colors", "instances"):
            np.testing.assert_array_equal(getattr(back, name), getattr(gaussians, name))

    def test_static_set_has_no_instance_column(self, tmp_path):
        gaussians = GaussianSet(np.zeros((1, 3)), np.ones((1, 3)), np.array([[1.0, 0, 0, 0]]), np.ones(1),
                                np.zeros((1, 3)), np.array([-1]))
        write_gaussians_ply(tmp_path / "g.ply", gaussians)
        assert "instance" not in read_ply(tmp_path / "g.ply").dtype.names

    def test_rejects_other_files(self, tmp_path):
        (tmp_path / "bad.ply").write_bytes(b"not a ply\n")
        with pytest.raises(FormatError):
            read_ply(tmp_path / "bad.ply")

    def test_rejects_truncated_body(self, tmp_path):
        write_points_ply(tmp_path / "p.ply", PointCloud(np.zeros((3, 3)), np.zeros(3, dtype=np.uint8),
                                                        (frozenset({0}),) * 3))
        data = (tmp_path / "p.ply").read_bytes()
        (tmp_path / "p.ply").write_bytes(data[:-5])
        with pytest.raises(FormatError):
            read_ply(tmp_path / "p.ply")

    def test_ascii_ply_unsupported(self, tmp_path):
        (tmp_path / "a.ply").write_bytes(b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n")
        with pytest.raises(FormatError):
            read_ply(tmp_path / "a.ply")


class TestRasters:

    def test_pfm_keeps_inf_and_orientation(self, tmp_path):
        depth = np.arange(12, dtype=np.float64).reshape(3, 4)
        depth[0, 1] = np.inf
        write_pfm(tmp_path / "d.pfm", depth)
        back = read_pfm(tmp_path / "d.pfm")
        assert back.dtype == np.float32
        np.testing.assert_array_equal(back, depth.astype(np.float32))

    def test_pfm_three_channels(self, tmp_path, rng):
        normals = rng.normal(size=(5, 7, 3)).astype(np.float32)
        write_pfm(tmp_path / "n.pfm", normals)
        np.testing.assert_array_equal(read_pfm(tmp_path / "n.pfm"), normals)

    def test_pfm_rejects_bad_shape(self, tmp_path):
        with pytest.raises(FormatError):
            write_pfm(tmp_path / "x.pfm", np.zeros((2, 2, 2)))

    def test_pgm_mask_and_sixteen_bit(self, tmp_path):
        mask = np.eye(4, 5, dtype=bool)
        write_pgm(tmp_path / "m.pgm", mask)
        np.testing.assert_array_equal(read_pgm(tmp_path / "m.pgm"), mask.astype(np.uint8) * 255)
        wide = np.array([[0, 1, 65535], [300, 4000, 7]], dtype=np.uint16)
        write_pgm(tmp_path / "w.pgm", wide)
        np.testing.assert_array_equal(read_pgm(tmp_path / "w.pgm"), wide)

    def test_pgm_rejects_floats(self, tmp_path):
        with pytest.raises(FormatError):
            write_pgm(tmp_path / "f.pgm", np.zeros((2, 2)))

    def test_ppm_rounds_to_eight_bits(self, tmp_path):
        image = np.zeros((2, 3, 3))
        image[0, 0] = (1.0, 0.5, 0.2)
        write_ppm(tmp_path / "c.ppm", image)
        back = read_ppm(tmp_path / "c.ppm")
        assert tuple(back[0, 0]) == (255, 128, 51)
        assert back.shape == (2, 3, 3)

    def test_ppm_magic_checked(self, tmp_path):
        write_pgm(tmp_path / "m.pgm", np.zeros((2, 2), dtype=np.uint8))
        with pytest.raises(FormatError):
            read_ppm(tmp_path / "m.pgm")

    def test_index(self, tmp_path):
        index = np.array([[-1, 3, 7], [2, -1, 100000]])
        write_index(tmp_path / "i.idx", index)
        np.testing.assert_array_equal(read_index(tmp_path / "i.idx"), index)

    def test_index_size_checked(self, tmp_path):
        (tmp_path / "i.idx").write_bytes(np.array([4, 4, 0], dtype="<i4").tobytes())
        with pytest.raises(FormatError):
            read_index(tmp_path / "i.idx")


# ── Metrics ──────────────────────────────────────────────────────────────────

class TestMetrics:

    def test_psnr_values(self):
        a = np.zeros((4, 4, 3))
        assert psnr(a, a) == PSNR_CAP == 99.0
        assert psnr(a, np.ones_like(a)) == pytest.approx(0.0)
        assert psnr(a, np.full_like(a, 0.1)) == pytest.approx(20.0)

    def test_psnr_mask_and_shapes(self):
        a, b = np.zeros((2, 2)), np.array([[0.0, 1.0], [0.0, 0.0]])
        assert psnr(a, b, mask=np.array([[True, False], [True, True]])) == PSNR_CAP
        with pytest.raises(NoValidPixels):
            psnr(a, b, mask=np.zeros((2, 2), dtype=bool))
        with pytest.raises(DimensionMismatch):
            psnr(a, np.zeros((2, 3)))

    def test_depth_metrics(self):
        reference = np.array([[10.0, 10.0], [np.inf, 5.0]])
        depth = np.array([[10.05, 11.0], [3.0, np.inf]])
        assert mean_depth_error(depth, reference) == pytest.approx(0.525)
        assert depth_accuracy(depth, reference, np.ones((2, 2), dtype=bool)) == pytest.approx(0.5)
        with pytest.raises(NoValidPixels):
            mean_depth_error(depth, reference, np.array([[False, False], [True, True]]))

    def test_normal_accuracy(self):
        reference = np.tile([0.0, 0.0, -1.0], (1, 2, 1))
        tilted = np.array([[[0.0, 0.0, -1.0], [np.sin(0.2), 0.0, -np.cos(0.2)]]])
        assert normal_accuracy(tilted, reference, np.ones((1, 2), dtype=bool)) == pytest.approx(0.5)


# ── Manifests ────────────────────────────────────────────────────────────────

class TestManifest:

    def test_simulated_scene_round_trip(self, scene_dir, tiny_scene):
        manifest = load_manifest(scene_dir)
        inputs = load_scene_inputs(manifest)
        assert [v.view_id for v in inputs.views] == [v.view_id for v in tiny_scene.views]
        for loaded, original in zip(inputs.views, tiny_scene.views):
            assert loaded.intrinsics == original.intrinsics
            assert loaded.world_from_camera == original.world_from_camera
            assert np.abs(loaded.image - original.image).max() <= 0.5 / 255 + 1e-12
        points = tiny_scene.truth.points
        np.testing.assert_array_equal(inputs.points.positions, points.positions)
        assert inputs.points.source_views == points.source_views
        assert manifest.instances == [0]
        assert all(inputs.masks[0][v.view_id].all() for v in tiny_scene.views)
        assert len(inputs.priors) == len(tiny_scene.priors)
        assert inputs.tracks == {}

    def test_ground_truth_files(self, scene_dir):
        manifest = load_manifest(scene_dir / "manifest.json")
        depth, normals = load_ground_truth(manifest, 2)
        np.testing.assert_allclose(depth, 6.0)
        assert normals.shape == (48, 64, 3)
        assert np.all(load_gt_instances(manifest, 2) == 0)

    def test_cameras_without_images(self, scene_dir):
        views = load_cameras(load_manifest(scene_dir), with_images=False)
        assert all(view.image is None for view in views)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "nowhere")

    def test_unknown_manifest_key(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps({"camera_file": "x.json"}))
        with pytest.raises(ManifestError):
            load_manifest(tmp_path)

    def test_missing_image(self, scene_dir):
        (scene_dir / "images" / "0001.ppm").unlink()
        with pytest.raises(ManifestError, match="missing image"):
            load_scene_inputs(load_manifest(scene_dir))

    def test_provenance_must_reference_known_views(self, scene_dir):
        path = scene_dir / "points_provenance.json"
        provenance = json.loads(path.read_text())
        provenance["source_views"][0] = [42]
        path.write_text(json.dumps(provenance))
        with pytest.raises(ManifestError, match="unknown views"):
            load_scene_inputs(load_manifest(scene_dir))

    def test_missing_mask_file_means_empty_mask(self, scene_dir):
        (scene_dir / "masks" / "000_0002.pgm").unlink()
        inputs = load_scene_inputs(load_manifest(scene_dir))
        assert 2 not in inputs.masks[0]
        assert 1 in inputs.masks[0]


# ── Reports ──────────────────────────────────────────────────────────────────

class TestReportStorage:

    def _reports(self):
        return [
            DensificationReport(instance_id=0, pre_status=InstanceStatus.INCOMPLETE, post_status=InstanceStatus.COMPLETE,
                                pixels_converged=50, pixels_surviving=40, points_spawned=10, opacity_adjusted=2),
            DensificationReport(instance_id=1, pre_status=InstanceStatus.COMPLETE, post_status=InstanceStatus.COMPLETE),
            DensificationReport(instance_id=2, stage="prepare", error="NoObservingView: nothing"),
        ]

    def test_save_and_query(self, tmp_path):
        storage = ReportStorage(str(tmp_path / "out" / "report.json"))
        reports = self._reports()
        storage.save_reports(reports, summarize_reports(reports), {"seed": 3})
        assert storage.get_all_reports() == reports
        assert [r.instance_id for r in storage.get_reports_by_status("complete")] == [0, 1]
        assert [r.instance_id for r in storage.get_failed_reports()] == [2]
        assert storage.load_data()["metadata"]["seed"] == 3

    def test_summary_counts(self):
        summary = summarize_reports(self._reports())
        assert summary == {"instances": 3, "passes": 1, "flagged": 1, "completed": 1, "points_spawned": 10,
                           "opacity_adjusted": 2, "failures": 1}

    def test_missing_file_reads_empty(self, tmp_path):
        storage = ReportStorage(str(tmp_path / "report.json"))
        assert storage.get_all_reports() == []
        assert storage.get_summary() == {}

    def test_output_is_deterministic(self, tmp_path):
        first, second = ReportStorage(str(tmp_path / "a.json")), ReportStorage(str(tmp_path / "b.json"))
        for storage in (first, second):
            storage.save_reports(self._reports(), summarize_reports(self._reports()))
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
