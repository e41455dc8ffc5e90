"""
Tests for the dyadic grid approximation
"""
import logging

import networkx as nx
import numpy as np
import pytest

from errors import GridError, InputError
from geom_tree import GeomTree, hausdorff_distance, sample_points
from grid_approx import GridTree, approximate, dyadic_cover, fix_degrees, spanning_tree


def _make_segment(count=401):
    return np.linspace(0, 1, count).astype(complex)


def _make_circle(count=2000, radius=0.6):
    return radius * np.exp(2j * np.pi * np.arange(count) / count)


def _make_l_shape(count=401):
    """Polyline 0.1 -> 0.9 -> 0.9 + 0.8i"""
    leg = np.linspace(0, 0.8, count)
    return np.concatenate([0.1 + leg, 0.9 + 1j * leg[1:]]).astype(complex)


class TestDyadicCover:
    def test_interior_point_has_one_cell(self):
        cover = dyadic_cover([0.3 + 0.3j], 1)
        assert cover.squares == frozenset({(0, 0)})
        assert cover.cell_size == 0.5

    def test_boundary_point_touches_all_cells(self):
        cover = dyadic_cover([0.5 + 0.5j], 1)
        assert cover.squares == frozenset({(0, 0), (1, 0), (0, 1), (1, 1)})

    def test_empty_K(self):
        with pytest.raises(InputError):
            dyadic_cover([], 2)

    def test_sparse_samples_warn(self, caplog):
        with caplog.at_level(logging.WARNING, logger="grid_approx"):
            dyadic_cover([0.1, 0.9], 3)
        assert "refine the sampling" in caplog.text


class TestFixDegrees:
    def test_bend_gets_two_stubs(self):
        tree = fix_degrees(nx.Graph([((0, 0), (1, 0)), ((1, 0), (1, 1))]), 1)
        assert tree.edge_count == 4
        assert sorted(tree.plane_tree().degrees) == [1, 1, 1, 1, 4]
        assert sum(1 for edge in tree.edges if edge.tag == "stub") == 2
        assert tree.vertices[1] == pytest.approx(0.5)
        assert tree.validate() is None

    def test_leaves_and_crossings_untouched(self):
        graph = nx.Graph([((1, 1), (1 + dx, 1 + dy)) for dx, dy in [(1, 0), (0, 1), (-1, 0), (0, -1)]])
        tree = fix_degrees(graph, 0)
        assert all(edge.tag == "grid" for edge in tree.edges)
        assert tree.edge_count == 4


class TestSpanningTree:
    def test_single_cell_drops_top_side(self):
        tree = spanning_tree(dyadic_cover([0.25 + 0.25j], 1))
        assert sorted(tuple(sorted(e)) for e in tree.edges) == [((0, 0), (0, 1)), ((0, 0), (1, 0)),
                                                                 ((1, 0), (1, 1))]

    def test_disconnected_cover(self):
        with pytest.raises(GridError):
            spanning_tree(dyadic_cover([0.1 + 0.1j, 0.9 + 0.9j], 3))


class TestApproximate:
    def test_single_cell_tree(self):
        tree = approximate([0.25 + 0.25j], 1)
        assert tree.vertex_count == 8
        assert tree.edge_count == 7
        assert sorted(set(tree.degrees())) == [1, 4]
        assert sum(1 for e in tree.edges if e.tag == "stub") == 4
        assert tree.validate() is None

    @pytest.mark.parametrize("depth", [1, 2, 3, 4])
    def test_segment_within_bound(self, depth):
        K = _make_segment()
        tree = approximate(K, depth)
        assert tree.validate() is None
        assert set(tree.degrees()) <= {1, 4}
        distance = hausdorff_distance(K, sample_points(tree, tree.unit / 16))
        assert distance <= 2.0 ** (-depth + 1)

    @pytest.mark.parametrize("depth", [1, 2, 3, 4])
    def test_l_shape_within_bound(self, depth):
        K = _make_l_shape()
        tree = approximate(K, depth)
        assert tree.validate() is None
        assert set(tree.degrees()) <= {1, 4}
        assert hausdorff_distance(K, sample_points(tree, tree.unit / 16)) <= 2.0 ** (-depth + 1)

    def test_circle_within_bound(self):
        K = _make_circle()
        tree = approximate(K, 3)
        assert tree.validate() is None
        assert hausdorff_distance(K, sample_points(tree, tree.unit / 16)) <= 2.0 ** -2

    def test_lattice_is_integral(self):
        tree = approximate(_make_segment(), 2)
        assert np.allclose(tree.lattice * 2.0 ** -4, np.column_stack([tree.vertices.real, tree.vertices.imag]))

    def test_negative_depth(self):
        with pytest.raises(InputError):
            approximate(_make_segment(), -1)

    def test_json_keeps_depth(self):
        tree = approximate(_make_segment(), 2)
        loaded = GeomTree.from_json(tree.to_json())
        assert isinstance(loaded, GridTree)
        assert loaded.depth == 2
        assert loaded.edge_count == tree.edge_count
