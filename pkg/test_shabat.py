"""
Tests for solving the critical-point system of a plane tree
"""
import numpy as np
import pytest

from errors import ConvergenceError, InputError
from geom_tree import Similarity, straight_embedding
from plane_tree import PlaneTree, canonical_code, enumerate_plane_trees, is_equivalent, mirror, path, spider, star
from polynomial import ShabatPolynomial, chebyshev, star as star_polynomial
from shabat import (SolveOptions, _continue, compare_up_to_similarity, continuation_leaf, initial_guess, jacobian,
                    newton_solve, normalize, planted_layout, remove_leaf, residual, solve, solve_coloring, verify)
from tracer import trace_tree


def _make_two_arm_pair():
    return spider([1, 1, 2, 2]), spider([1, 2, 1, 2])


class TestColoring:
    def test_center_of_star_gets_minus_one(self):
        coloring = solve_coloring(star(4))
        assert coloring[0] == -1
        assert all(coloring[v] == 1 for v in range(1, 5))

    def test_tie_goes_to_smallest_id(self):
        coloring = solve_coloring(path(3))
        assert coloring[1] == -1
        assert coloring[2] == 1


class TestSystem:
    def test_jacobian_matches_finite_differences(self):
        tree = path(4)
        coloring = solve_coloring(tree)
        state = np.array([0.7 + 0.1j, 0.05 - 0.2j, -0.6 + 0.15j])
        c0 = 0.2 + 0.1j
        J = jacobian(tree, state)
        h = 1e-6
        for j in range(len(state)):
            step = np.zeros(len(state), dtype=complex)
            step[j] = h
            numeric = (residual(tree, coloring, state + step, c0) - residual(tree, coloring, state - step, c0)) / (2 * h)
            assert J[:, j] == pytest.approx(numeric, rel=1e-6, abs=1e-8)
        numeric = (residual(tree, coloring, state, c0 + h) - residual(tree, coloring, state, c0 - h)) / (2 * h)
        assert J[:, -1] == pytest.approx(numeric, rel=1e-6, abs=1e-8)

    def test_residual_vanishes_at_star(self):
        tree = star(5)
        assert residual(tree, solve_coloring(tree), [0j], -1) == pytest.approx([0, 0])

    def test_initial_guess_is_centered(self):
        tree = spider([1, 2, 3])
        state, _ = initial_guess(tree, solve_coloring(tree), planted_layout(tree).vertices)
        mults = np.array([tree.degree(v) - 1 for v in tree.internal_vertices])
        assert abs(np.dot(mults, state)) < 1e-12

    def test_newton_iteration_limit(self):
        tree = path(3)
        with pytest.raises(ConvergenceError) as info:
            newton_solve(tree, solve_coloring(tree), [1.0, 2.0], 5.0, SolveOptions(max_iter=0))
        assert info.value.reason == "max iterations"

    def test_newton_rejects_coincident_points(self):
        tree = path(3)
        with pytest.raises(ConvergenceError) as info:
            newton_solve(tree, solve_coloring(tree), [0.5, 0.5], 0.0)
        assert info.value.reason == "coincident critical points"


class TestPlantedLayout:
    @pytest.mark.parametrize("tree", [path(5), star(6), spider([1, 2, 3]), spider([2, 1, 1, 2]),
                                      PlaneTree(7, [[1], [0, 2, 4], [1, 3], [2], [1, 5, 6], [4], [4]])])
    def test_layout_realizes_tree(self, tree):
        layout = planted_layout(tree)
        assert layout.validate() is None
        assert is_equivalent(layout.plane_tree(), tree)


class TestSolve:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
    def test_star_solves_to_power(self, n):
        p = solve(star(n))
        expected = np.zeros(n + 1)
        expected[0], expected[n] = -1, 1
        assert p.coefficients == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
    def test_path_matches_chebyshev(self, n):
        p = solve(path(n))
        assert p.certify() == []
        assert compare_up_to_similarity(p, chebyshev(n)) < 1e-8

    def test_single_edge(self):
        p = solve(path(1))
        assert p.degree == 1

    @pytest.mark.parametrize("tree", [spider([1, 2, 3]), spider([2, 2, 2]), spider([1, 1, 2, 2]),
                                      spider([1, 2, 1, 2])])
    def test_solution_traces_back(self, tree):
        p = solve(tree)
        assert p.certify() == []
        assert p.residual < 1e-9
        assert sum(cp.multiplicity for cp in p.critical_points) == tree.edge_count - 1
        assert verify(tree, p) is None

    def test_chiral_pair_gives_different_polynomials(self):
        left = solve(spider([1, 2, 3]))
        right = solve(mirror(spider([1, 2, 3])))
        assert compare_up_to_similarity(left, right) > 1e-6
        assert verify(mirror(spider([1, 2, 3])), right) is None

    def test_same_graph_different_embedding(self):
        a, b = _make_two_arm_pair()
        assert compare_up_to_similarity(solve(a), solve(b)) > 1e-6

    def test_hint_must_match(self):
        hint = straight_embedding(path(3), [0, 1, 2, 3])
        with pytest.raises(InputError):
            solve(star(3), hint)

    def test_hint_is_used(self):
        tree = path(3)
        hint = straight_embedding(tree, [0, 1, 2, 3])
        assert compare_up_to_similarity(solve(tree, hint), chebyshev(3)) < 1e-8

    def test_invalid_tree(self):
        with pytest.raises(InputError):
            solve(PlaneTree(3, [[1], [0, 2], []]))
        with pytest.raises(InputError):
            solve(PlaneTree(1, [[]]))


class TestContinuation:
    def test_leaf_choice_keeps_diameter(self):
        tree = spider([2, 2, 1])
        leaf = continuation_leaf(tree)
        assert tree.degree(leaf) == 1
        assert tree.rotations[leaf][0] == 0

    def test_leaf_choice_ties_by_edge_id(self):
        assert continuation_leaf(path(4)) == 0

    def test_remove_leaf(self):
        smaller, mapping = remove_leaf(star(3), 2)
        assert canonical_code(smaller) == canonical_code(path(2))
        assert mapping == {0: 0, 1: 1, 3: 2}

    @pytest.mark.parametrize("tree", [path(3), star(3), spider([1, 1, 2])])
    def test_continue_solves(self, tree):
        p = _continue(tree, solve_coloring(tree), SolveOptions(), None)
        assert verify(tree, p) is None


class TestNormalize:
    def test_star_normal_form(self):
        q, similarity = normalize(star_polynomial(4))
        assert q.coefficients == pytest.approx([-1, 0, 0, 0, 1], abs=1e-12)
        assert similarity.translation == pytest.approx(0)

    def test_normal_form_is_monic_and_centered(self):
        q, _ = normalize(chebyshev(5))
        assert q.leading == pytest.approx(1.0)
        assert np.dot(q.multiplicities, q.positions) == pytest.approx(0, abs=1e-12)
        assert q.certify() == []

    def test_similarity_maps_back(self):
        p = chebyshev(4)
        q, similarity = normalize(p)
        z = np.array([0.1 + 0.2j, -0.7])
        assert q.evaluate(z) == pytest.approx(p.evaluate(similarity.apply(z)))

    def test_without_critical_points(self):
        bare = ShabatPolynomial(chebyshev(3).coefficients)
        assert normalize(bare)[0].coefficients == pytest.approx(normalize(chebyshev(3))[0].coefficients, abs=1e-9)

    def test_linear(self):
        q, similarity = normalize(ShabatPolynomial(np.array([1.0, 3.0])))
        assert q.coefficients == pytest.approx([0, 1])
        assert similarity.apply(0.5) == pytest.approx(0.5 / 3 - 1 / 3)

    def test_trace_of_normal_form(self):
        q, _ = normalize(solve(spider([1, 2, 3])))
        assert is_equivalent(trace_tree(q).plane_tree(), spider([1, 2, 3]))


class TestCompare:
    def test_rotated_copy(self):
        p = chebyshev(5)
        assert compare_up_to_similarity(p, p) < 1e-12

    def test_different_trees(self):
        assert compare_up_to_similarity(star_polynomial(3), chebyshev(3)) >= 1.0

    def test_degree_mismatch(self):
        with pytest.raises(ValueError):
            compare_up_to_similarity(chebyshev(3), chebyshev(4))


class TestSmallTrees:
    @pytest.mark.parametrize("edges", [2, 3, 4, 5, 6])
    def test_jacobian_on_random_states(self, edges):
        rng = np.random.default_rng(edges)
        h = 1e-6
        for tree in enumerate_plane_trees(edges):
            coloring = solve_coloring(tree)
            k = len(tree.internal_vertices)
            state = rng.standard_normal(k) + 1j * rng.standard_normal(k)
            c0 = complex(rng.standard_normal())
            J = jacobian(tree, state)
            for j in range(k):
                step = np.zeros(k, dtype=complex)
                step[j] = h
                numeric = (residual(tree, coloring, state + step, c0)
                           - residual(tree, coloring, state - step, c0)) / (2 * h)
                scale = max(1.0, float(np.abs(numeric).max()))
                assert J[:, j] == pytest.approx(numeric, rel=1e-5, abs=1e-7 * scale)

    @pytest.mark.slow
    @pytest.mark.parametrize("edges", [1, 2, 3, 4, 5, 6])
    def test_every_tree_round_trips(self, edges):
        moved = Similarity(2.0, 0.7, 1 + 1j)
        for tree in enumerate_plane_trees(edges):
            p = solve(tree)
            assert verify(tree, p) is None
            if edges > 1:
                other = solve(tree, moved.apply_tree(planted_layout(tree)), SolveOptions(seed=5))
                assert compare_up_to_similarity(p, other) < 1e-8
