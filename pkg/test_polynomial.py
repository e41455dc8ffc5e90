"""
Tests for Shabat polynomial arithmetic, evaluation and root finding
"""
import json
import math

import numpy as np
import pytest
from numpy.polynomial import chebyshev as C

from errors import InputError
from polynomial import (CriticalPoint, ShabatPolynomial, aberth, chebyshev, cluster_roots, derivative_product,
                        expand, from_coefficients, gauss_rule, load_polynomial, segment_integral, star)


class TestOracles:
    @pytest.mark.parametrize("n", range(1, 13))
    def test_chebyshev_is_shabat(self, n):
        p = chebyshev(n)
        assert p.degree == n
        assert p.certify() == []

    @pytest.mark.parametrize("n", [25, 40])
    def test_large_chebyshev_certifies_by_integration(self, n):
        assert chebyshev(n).certify() == []

    @pytest.mark.parametrize("n", range(1, 9))
    def test_star_is_shabat(self, n):
        p = star(n)
        assert p.certify() == []
        assert p.evaluate(np.exp(1j * math.pi / n)) == pytest.approx(-3)

    def test_degree_zero_rejected(self):
        with pytest.raises(InputError):
            chebyshev(0)
        with pytest.raises(InputError):
            star(0)


class TestDerivative:
    def test_gauss_rule_is_exact(self):
        nodes, weights = gauss_rule(7)
        assert weights @ nodes ** 6 == pytest.approx(2 / 7)

    def test_derivative_matches_coefficients(self):
        p = chebyshev(6)
        z = np.array([0.3 + 0.1j, -0.8, 1.2j])
        expected = np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(p.coefficients))
        assert p.derivative(z) == pytest.approx(expected)

    def test_constant_derivative(self):
        assert derivative_product(np.array([1, 2]), [], [], 3.0) == pytest.approx([3, 3])

    def test_segment_integral_of_power(self):
        # int_0^1 3 z^2 dz = 1
        assert segment_integral(0, 1, [0j], [2], 3.0, 2) == pytest.approx(1.0)

    def test_taylor_coefficient(self):
        p = chebyshev(4)
        index = int(np.argmin(np.abs(p.positions)))
        assert p.taylor_coefficient(index) == pytest.approx(-8.0)

    def test_taylor_coefficient_at_multiple_point(self):
        p = star(5)
        assert p.taylor_coefficient(0) == pytest.approx(2.0)


class TestExpand:
    def test_cube(self):
        assert expand([(0, 2)], -1) == pytest.approx([-1, 0, 0, 1])

    def test_matches_chebyshev_up_to_scale(self):
        p = chebyshev(5)
        q = expand(p.critical_points, p.coefficients[0])
        assert q[1:] * p.leading == pytest.approx(p.coefficients[1:])

    def test_multiplicity_mismatch(self):
        with pytest.raises(InputError):
            expand([CriticalPoint(0j, 2, -1)], 0, n=5)

    def test_linear(self):
        assert expand([], 0.5, n=1) == pytest.approx([0.5, 1])


class TestEvaluate:
    @pytest.mark.parametrize("z", [0.3, -0.95, 0.5 + 0.5j, 1.1 - 0.2j])
    def test_high_degree_matches_clenshaw(self, z):
        n = 30
        expected = C.chebval(z, [0] * n + [1])
        assert chebyshev(n).evaluate(z) == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_array_shape_kept(self):
        z = np.zeros((2, 3), dtype=complex)
        assert chebyshev(25).evaluate(z).shape == (2, 3)

    def test_critical_values(self):
        p = chebyshev(5)
        assert p.critical_values() == pytest.approx([cp.target for cp in p.critical_points])


class TestRoots:
    def test_aberth_cubic(self):
        coefficients = np.polynomial.polynomial.polyfromroots([1, 2, -3])
        roots = np.sort_complex(aberth(coefficients))
        assert roots == pytest.approx([-3, 1, 2])

    def test_aberth_roots_at_origin(self):
        roots = aberth([0, 0, 1, 1])
        assert sorted(np.abs(roots)) == pytest.approx([0, 0, 1])

    def test_aberth_high_degree(self):
        n = 20
        roots = aberth(np.polynomial.chebyshev.cheb2poly([0] * n + [1]))
        expected = np.cos((2 * np.arange(n) + 1) * np.pi / (2 * n))
        assert np.sort(roots.real) == pytest.approx(np.sort(expected), abs=1e-6)

    def test_aberth_zero_polynomial(self):
        with pytest.raises(InputError):
            aberth([0, 0])

    def test_cluster_roots(self):
        clusters = cluster_roots([1, 1 + 1e-9, 2])
        assert [m for _, m in clusters] == [2, 1]
        assert clusters[0][0] == pytest.approx(1.0)

    def test_from_coefficients_star(self):
        p = from_coefficients(star(4).coefficients)
        assert len(p.critical_points) == 1
        assert p.critical_points[0].multiplicity == 3
        assert p.critical_points[0].target == -1

    def test_from_coefficients_chebyshev(self):
        p = from_coefficients(chebyshev(5).coefficients)
        assert sorted(cp.target for cp in p.critical_points) == [-1, -1, 1, 1]

    def test_from_coefficients_not_shabat(self):
        with pytest.raises(InputError):
            from_coefficients([0, 0, 1])


class TestJson:
    def test_round_trip_is_exact(self, tmp_path):
        p = chebyshev(7)
        target = tmp_path / "poly.json"
        target.write_text(json.dumps(p.to_json()))
        loaded = load_polynomial(str(target))
        assert np.array_equal(loaded.coefficients, p.coefficients)
        assert loaded.critical_points == p.critical_points

    def test_degree_mismatch(self):
        data = chebyshev(3).to_json()
        data["degree"] = 4
        with pytest.raises(InputError):
            ShabatPolynomial.from_json(data)

    def test_malformed(self):
        with pytest.raises(InputError):
            ShabatPolynomial.from_json({"coefficients": [["x", "0"]]})
