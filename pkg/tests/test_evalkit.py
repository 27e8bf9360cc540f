import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.facedetail.common.errors import ConfigurationError, DegenerateConfigurationError, EmptyMeshError
from src.facedetail.evalkit import (
    DistanceReport,
    RigidTransform,
    TriangleIndex,
    brute_force_distances,
    closest_point_on_triangles,
    cumulative_curve,
    error_stats,
    evaluate_reconstruction,
    landmark_consistency_filter,
    rigid_align,
    scan_to_mesh_distance,
)
from src.facedetail.evalkit.distance import closest_point_on_segments
from src.facedetail.model_core import icosphere

UNIT_TRIANGLE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def _ellipsoid():
    vertices, faces = icosphere(3)
    return vertices * np.array([100.0, 80.0, 60.0]), faces


def _transform(seed: int, scale: float = 1.0) -> RigidTransform:
    rng = np.random.default_rng(seed)
    rotation = Rotation.from_rotvec(rng.normal(scale=0.3, size=3)).as_matrix()
    return RigidTransform(rotation, rng.normal(scale=10.0, size=3), scale)


class TestClosestPoint:
    """
    Tests the exact point-to-triangle distance.
    - A point above the interior is at its height.
    - Points in vertex and edge regions snap to the corner or edge.
    - Zero-area triangles project onto their nearest edge.
    - The indexed query matches brute force on a random triangle soup.
    - Empty meshes are rejected.
    """
    def _distance(self, point):
        return float(brute_force_distances(np.array([point]), UNIT_TRIANGLE, np.array([[0, 1, 2]]))[0])

    def test_regions(self):
        assert self._distance([0.2, 0.2, 0.7]) == pytest.approx(0.7, abs=1e-12)
        assert self._distance([-1.0, -1.0, 0.0]) == pytest.approx(np.sqrt(2.0), abs=1e-12)
        assert self._distance([0.5, -1.0, 0.0]) == pytest.approx(1.0, abs=1e-12)
        assert self._distance([1.0, 1.0, 0.0]) == pytest.approx(np.sqrt(0.5), abs=1e-12)

    def test_closest_points(self):
        a, b, c = (np.repeat(UNIT_TRIANGLE[i][None], 2, axis=0) for i in range(3))
        p = np.array([[0.2, 0.3, -2.0], [2.0, 0.0, 0.0]])
        np.testing.assert_allclose(closest_point_on_triangles(p, a, b, c), [[0.2, 0.3, 0.0], [1.0, 0.0, 0.0]])

    def test_degenerate_triangles(self):
        p = np.array([[2.0, 1.0, 0.0], [3.0, 1.0, 0.0]])
        a = np.zeros((2, 3))
        b = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        c = np.array([[4.0, 0.0, 0.0], [4.0, 0.0, 0.0]])
        np.testing.assert_allclose(closest_point_on_triangles(p, a, b, c), [[2.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        vertices = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [4.0, 0.0, 0.0]])
        distance = brute_force_distances(np.array([[2.0, 1.0, 0.0]]), vertices, np.array([[0, 1, 2]]))
        assert float(distance[0]) == pytest.approx(1.0, abs=1e-12)

    def test_segments(self):
        p = np.array([[-1.0, 1.0, 0.0], [0.5, 2.0, 0.0], [3.0, 0.0, 0.0]])
        a = np.zeros((3, 3))
        b = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        np.testing.assert_allclose(closest_point_on_segments(p, a, b), [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])

    def test_index_matches_brute_force(self):
        rng = np.random.default_rng(0)
        vertices = rng.uniform(-1.0, 1.0, size=(600, 3))
        triangles = np.arange(600).reshape(200, 3)
        points = rng.uniform(-1.5, 1.5, size=(1000, 3))
        indexed = scan_to_mesh_distance(points, vertices, triangles)
        np.testing.assert_allclose(indexed, brute_force_distances(points, vertices, triangles), atol=1e-9)

    def test_query_outputs(self):
        index = TriangleIndex(UNIT_TRIANGLE, np.array([[0, 1, 2]]))
        distances, tri, closest = index.query(np.array([[0.1, 0.1, 3.0]]))
        assert distances[0] == pytest.approx(3.0)
        assert tri[0] == 0
        np.testing.assert_allclose(closest[0], [0.1, 0.1, 0.0], atol=1e-12)

    def test_empty_mesh(self):
        with pytest.raises(EmptyMeshError):
            TriangleIndex(UNIT_TRIANGLE, np.zeros((0, 3), dtype=np.int64))


class TestRigidAlign:
    """
    Tests landmark Procrustes alignment and ICP refinement.
    - A known rotation and translation are recovered, with scale when asked.
    - The result is a proper rotation even for mirrored input.
    - Fewer than three or collinear landmarks are rejected.
    - ICP removes the error left by noisy landmarks.
    """
    def test_recovers_transform(self):
        truth = _transform(1)
        mesh_landmarks = np.random.default_rng(2).normal(size=(10, 3)) * 50.0
        found = rigid_align(truth.apply(mesh_landmarks), mesh_landmarks)
        np.testing.assert_allclose(found.rotation, truth.rotation, atol=1e-6)
        np.testing.assert_allclose(found.translation, truth.translation, atol=1e-6)
        assert found.scale == 1.0

    def test_recovers_scale(self):
        truth = _transform(3, scale=1.5)
        mesh_landmarks = np.random.default_rng(4).normal(size=(10, 3)) * 50.0
        found = rigid_align(truth.apply(mesh_landmarks), mesh_landmarks, with_scale=True)
        assert found.scale == pytest.approx(1.5, abs=1e-9)
        np.testing.assert_allclose(found.apply(mesh_landmarks), truth.apply(mesh_landmarks), atol=1e-6)

    def test_reflection_guard(self):
        mesh_landmarks = np.random.default_rng(5).normal(size=(10, 3))
        mirrored = mesh_landmarks * np.array([-1.0, 1.0, 1.0])
        assert rigid_align(mirrored, mesh_landmarks).is_orthonormal()

    def test_degenerate(self):
        line = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
        with pytest.raises(DegenerateConfigurationError):
            rigid_align(line, line)
        with pytest.raises(DegenerateConfigurationError):
            rigid_align(line[:2], line[:2])

    def test_icp_refinement(self):
        vertices, faces = _ellipsoid()
        truth = _transform(6)
        scan = truth.apply(vertices)
        picks = np.arange(0, vertices.shape[0], 40)
        noisy = truth.apply(vertices[picks]) + np.random.default_rng(7).normal(scale=1.0, size=(picks.size, 3))
        coarse = evaluate_reconstruction(scan, vertices, faces, noisy, vertices[picks])
        refined = evaluate_reconstruction(scan, vertices, faces, noisy, vertices[picks], icp=True)
        assert refined.mean < coarse.mean
        assert refined.mean < 1e-3
        assert refined.transform.is_orthonormal()

    def test_transform_algebra(self):
        t = _transform(8, scale=2.0)
        round_trip = t.compose(t.inverse())
        np.testing.assert_allclose(round_trip.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(round_trip.translation, np.zeros(3), atol=1e-9)
        assert round_trip.scale == pytest.approx(1.0)


class TestErrorStats:
    """
    Tests the summary statistics and the cumulative error curve.
    - Median, mean and population standard deviation on hand examples.
    - The curve counts distances at or below each threshold.
    - Empty input is rejected.
    """
    def test_stats(self):
        median, mean, std = error_stats([1.0, 2.0, 3.0])
        assert (median, mean) == (2.0, 2.0)
        assert std == pytest.approx(0.816496580927726)
        assert error_stats([5.0]) == (5.0, 5.0, 0.0)
        assert error_stats([1.0, 2.0, 3.0, 4.0])[0] == 2.5

    def test_curve(self):
        np.testing.assert_allclose(cumulative_curve([1.0, 3.0], [2.0]), [0.5])
        np.testing.assert_allclose(cumulative_curve([1.0, 3.0], [0.0, 1.0, 3.0]), [0.0, 0.5, 1.0])

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            error_stats([])
        with pytest.raises(ConfigurationError):
            cumulative_curve([])

    def test_report_files(self, tmp_path):
        report = DistanceReport.from_distances([1.0, 2.0, 3.0], thresholds=[0.0, 2.0])
        paths = report.write(tmp_path)
        stats = json.loads(paths["stats"].read_text())
        assert stats["count"] == 3 and stats["median"] == 2.0
        assert paths["distances"].read_text().splitlines()[0] == "index,distance_mm"
        assert len(paths["curve"].read_text().splitlines()) == 3


class TestEvaluateReconstruction:
    """
    Tests the full scan-to-mesh protocol.
    - A sphere scan 1 mm outside a 0.1 m mesh reads about 1 mm with unit scale 1000.
    - A non-positive unit scale is rejected.
    """
    def test_offset_sphere(self):
        vertices, faces = icosphere(4)
        directions = np.random.default_rng(9).normal(size=(500, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        report = evaluate_reconstruction(0.101 * directions, 0.1 * vertices, faces, unit_scale=1000.0)
        assert report.mean == pytest.approx(1.0, abs=0.1)
        assert report.transform is None

    def test_unit_scale(self):
        vertices, faces = icosphere(1)
        with pytest.raises(ConfigurationError):
            evaluate_reconstruction(vertices, vertices, faces, unit_scale=0.0)


class TestLandmarkFilter:
    """
    Tests the landmark-consistency data filter.
    - Agreement up to the known shift keeps the image with score 0.
    - A landmark off by a fifth of the box width is discarded and reported as worst.
    - A score of exactly the threshold discards.
    """
    def _landmarks(self):
        return np.random.default_rng(10).integers(0, 200, size=(68, 2)).astype(np.float64)

    def test_agreement(self):
        k1 = self._landmarks()
        decision = landmark_consistency_filter(k1, k1 + [4.0, -2.0], 100.0, 120.0, shift=(4.0, -2.0))
        assert decision.keep and decision.score == 0.0

    def test_outlier(self):
        k1 = self._landmarks()
        k2 = k1.copy()
        k2[10, 0] += 20.0
        decision = landmark_consistency_filter(k1, k2, 100.0, 120.0)
        assert not decision.keep
        assert decision.score == pytest.approx(0.2)
        assert decision.worst == 10

    def test_threshold_boundary(self):
        k1 = self._landmarks()
        k2 = k1.copy()
        k2[3, 1] += 12.0
        assert not landmark_consistency_filter(k1, k2, 100.0, 120.0).keep

    def test_invalid_box(self):
        k1 = self._landmarks()
        with pytest.raises(ConfigurationError):
            landmark_consistency_filter(k1, k1, 0.0, 10.0)
