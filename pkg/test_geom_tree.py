"""
Tests for embedded trees, Hausdorff distance and similarity alignment
"""
import math

import numpy as np
import pytest

from errors import InputError
from geom_tree import (GeomEdge, GeomTree, Similarity, as_points, derive_rotation_system, hausdorff_distance,
                       load_geom_tree, load_points, point_diameter, sample_points, save_json, save_points,
                       similarity_align, straight_embedding)
from plane_tree import canonical_code, star


def _make_cross():
    """Star with four unit arms along the axes"""
    return straight_embedding(star(4), [0, 1, 1j, -1, -1j])


def _make_bent_path():
    vertices = [0, 2, 2 + 2j]
    edges = [GeomEdge(0, 1, [0, 1, 2]), GeomEdge(1, 2, [2, 2 + 1j, 2 + 2j])]
    return GeomTree(vertices, edges)


def _cyclic(rotation):
    """Rotation list shifted to start at its smallest entry"""
    k = rotation.index(min(rotation))
    return tuple(rotation[k:] + rotation[:k])


class TestGeomTree:
    def test_empty_tree_has_no_segments(self):
        starts, ends, owners, index = GeomTree([0]).segments()
        assert len(starts) == len(ends) == len(owners) == len(index) == 0

    def test_cross_is_valid(self):
        tree = _make_cross()
        assert tree.validate() is None
        assert list(tree.degrees()) == [4, 1, 1, 1, 1]
        assert tree.diameter() == pytest.approx(2.0)

    def test_rotation_follows_angles(self):
        tree = straight_embedding(star(3), [0, 1, -1 + 1j, -1 - 1j])
        assert _cyclic(derive_rotation_system(tree).rotations[0]) == (1, 2, 3)
        mirrored = straight_embedding(star(3), [0, 1, -1 - 1j, -1 + 1j])
        assert _cyclic(derive_rotation_system(mirrored).rotations[0]) == (1, 3, 2)

    def test_crossing_detected(self):
        vertices = [0, 2, 2 + 2j, 1 - 1j]
        edges = [GeomEdge(0, 1, [0, 2]), GeomEdge(1, 2, [2, 2 + 2j]),
                 GeomEdge(2, 3, [2 + 2j, 1 + 1j, 1 - 1j])]
        assert "intersect" in GeomTree(vertices, edges).validate()

    def test_endpoint_mismatch(self):
        tree = GeomTree([0, 1], [GeomEdge(0, 1, [0, 0.5])])
        assert "does not end" in tree.validate()

    def test_overlapping_edges_rejected(self):
        vertices = [0, 1, 2]
        edges = [GeomEdge(0, 1, [0, 1]), GeomEdge(0, 2, [0, 2])]
        assert GeomTree(vertices, edges).validate() is not None

    def test_initial_direction_skips_repeats(self):
        edge = GeomEdge(0, 1, [0, 0, 1j])
        assert edge.initial_direction(0) == pytest.approx(1j)
        assert edge.initial_direction(1) == pytest.approx(-1j)

    def test_length_and_points(self):
        tree = _make_bent_path()
        assert sum(e.length for e in tree.edges) == pytest.approx(4.0)
        assert tree.bounding_box() == (0, 0, 2, 2)
        assert tree.center() == 1 + 1j

    def test_json_round_trip(self, tmp_path):
        tree = _make_bent_path()
        target = tmp_path / "tree.json"
        save_json(str(target), tree.to_json())
        loaded = load_geom_tree(str(target))
        assert np.allclose(loaded.vertices, tree.vertices)
        assert canonical_code(loaded.plane_tree()) == canonical_code(tree.plane_tree())

    def test_malformed_json(self):
        with pytest.raises(InputError):
            GeomTree.from_json({"vertices": [[0, 0]]})


class TestDistances:
    def test_hausdorff_of_shifted_sets(self):
        a = np.array([0, 1, 2], dtype=complex)
        assert hausdorff_distance(a, a + 0.5j) == pytest.approx(0.5)

    def test_hausdorff_is_symmetric_max(self):
        a = np.array([0], dtype=complex)
        b = np.array([0, 3], dtype=complex)
        assert hausdorff_distance(a, b) == pytest.approx(3.0)
        assert hausdorff_distance(b, a) == pytest.approx(3.0)

    def test_hausdorff_empty(self):
        with pytest.raises(ValueError):
            hausdorff_distance([], [1])

    def test_sample_points_spacing(self):
        points = sample_points(_make_bent_path(), 0.1)
        gaps = np.abs(np.diff(np.sort(points[np.isclose(points.imag, 0)].real)))
        assert gaps.max() <= 0.1 + 1e-12

    def test_point_diameter_collinear(self):
        assert point_diameter([0, 1, 3]) == pytest.approx(3.0)
        assert point_diameter([1, 1]) == 0.0

    def test_as_points_accepts_pairs(self):
        assert list(as_points([[1, 2], [3, 4]])) == [1 + 2j, 3 + 4j]


class TestSimilarity:
    def test_inverse_and_compose(self):
        s = Similarity(2.0, 0.3, 1 - 1j)
        z = np.array([0.5 + 0.2j, -1.0])
        assert np.allclose(s.inverse().apply(s.apply(z)), z)
        t = Similarity(0.5, -1.1, 2j)
        assert np.allclose(s.compose(t).apply(z), s.apply(t.apply(z)))

    def test_json_round_trip(self):
        s = Similarity(1.5, 0.25, 0.5 + 2j)
        assert Similarity.from_json(s.to_json()) == s

    def test_align_recovers_known_similarity(self):
        tree = _make_cross()
        truth = Similarity(3.0, 0.4, 2 - 1j)
        target = sample_points(truth.apply_tree(tree), 0.01)
        similarity, distance = similarity_align(tree, target)
        assert distance < 0.05
        assert similarity.scale == pytest.approx(3.0, rel=0.03)

    def test_align_rejects_single_point(self):
        with pytest.raises(ValueError):
            similarity_align(np.array([0, 1]), np.array([1 + 1j]))


class TestPointFiles:
    def test_points_round_trip(self, tmp_path):
        target = tmp_path / "K.json"
        save_points(str(target), [0, 1 + 2j])
        assert list(load_points(str(target))) == [0, 1 + 2j]

    def test_empty_points(self, tmp_path):
        target = tmp_path / "K.json"
        target.write_text("[]")
        with pytest.raises(InputError):
            load_points(str(target))
