"""
Shabat polynomials: product-form derivative, stable evaluation and root finding
"""
import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.cluster.hierarchy import fcluster, linkage

from errors import InputError, RootFindingError
from geom_tree import Similarity

logger = logging.getLogger(__name__)

# Horner on expanded coefficients is trusted up to this degree
HORNER_MAX_DEGREE = 20
CLUSTER_RADIUS = 1e-6


@dataclass(frozen=True)
class CriticalPoint:
    """Zero of p' with multiplicity m; p(position) should equal target"""

    position: complex
    multiplicity: int
    target: int
    vertex: int = -1

    @property
    def degree(self):
        return self.multiplicity + 1


@lru_cache(maxsize=None)
def gauss_rule(degree):
    """Gauss-Legendre nodes and weights exact for polynomials of the given degree"""
    return np.polynomial.legendre.leggauss(degree // 2 + 1)


def derivative_product(zeta, positions, multiplicities, scale):
    """scale * prod (zeta - a)^m, vectorized over zeta"""
    zeta = np.asarray(zeta, dtype=complex)
    if len(positions) == 0:
        return np.full(zeta.shape, scale, dtype=complex)
    diff = zeta[..., None] - np.asarray(positions, dtype=complex)
    return scale * np.prod(diff ** np.asarray(multiplicities), axis=-1)


def segment_integral(z0, z1, positions, multiplicities, scale, degree):
    """Integral of the product-form derivative along the segment z0 -> z1"""
    nodes, weights = gauss_rule(max(degree, 1))
    half = (z1 - z0) / 2
    zeta = (z0 + z1) / 2 + half * nodes
    return half * (weights @ derivative_product(zeta, positions, multiplicities, scale))


def expand(critical, c0, n=None):
    """Coefficients (constant first) of c0 + n * int_0^z prod (w - a)^m dw; monic"""
    points = [(cp.position, cp.multiplicity) if isinstance(cp, CriticalPoint) else (complex(cp[0]), int(cp[1]))
              for cp in critical]
    total = sum(m for _, m in points)
    if n is None:
        n = total + 1
    if total != n - 1:
        raise InputError(f"multiplicities sum to {total}, expected {n - 1}")
    roots = [a for a, m in points for _ in range(m)]
    derivative = n * P.polyfromroots(roots) if roots else np.array([float(n)])
    coefficients = P.polyint(np.asarray(derivative, dtype=complex))
    coefficients[0] = c0
    return coefficients


def aberth(coefficients, tol=1e-14, max_iter=500):
    """All roots of a polynomial (constant first) by Aberth-Ehrlich simultaneous iteration"""
    c = np.asarray(coefficients, dtype=complex)
    nonzero = np.flatnonzero(c)
    if len(nonzero) == 0:
        raise InputError("the zero polynomial has no isolated roots")
    c = c[:nonzero[-1] + 1]
    at_origin = int(nonzero[0])
    c = c[at_origin:] / c[nonzero[-1]]
    degree = len(c) - 1
    if degree == 0:
        return np.zeros(at_origin, dtype=complex)
    if degree == 1:
        return np.concatenate([np.zeros(at_origin, dtype=complex), [-c[0]]])

    dc = P.polyder(c)
    radius = abs(c[0]) ** (1.0 / degree) or 1.0
    z = radius * np.exp(1j * (2 * np.pi * np.arange(degree) / degree + 0.4))
    magnitudes = np.abs(c)
    for iteration in range(max_iter):
        value = P.polyval(z, c)
        slope = P.polyval(z, dc)
        slope = np.where(slope == 0, 1e-300, slope)
        ratio = value / slope
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        repulsion = (1.0 / diff).sum(axis=1)
        step = ratio / (1.0 - ratio * repulsion)
        z = z - step
        small_step = np.abs(step) <= tol * (1.0 + np.abs(z))
        backward = np.abs(P.polyval(z, c)) <= 64 * np.finfo(float).eps * P.polyval(np.abs(z), magnitudes)
        if np.all(small_step | backward):
            logger.debug("aberth converged in %d iterations (degree %d)", iteration + 1, degree)
            return np.concatenate([np.zeros(at_origin, dtype=complex), z])
    raise RootFindingError(f"simultaneous iteration did not converge for degree {degree} in {max_iter} steps")


def cluster_roots(roots, radius=CLUSTER_RADIUS):
    """Merge roots closer than radius * scale; returns [(centroid, multiplicity)]"""
    roots = np.asarray(roots, dtype=complex)
    if len(roots) == 0:
        return []
    if len(roots) == 1:
        return [(complex(roots[0]), 1)]
    scale = max(1.0, float(np.abs(roots).max()))
    labels = fcluster(linkage(np.column_stack([roots.real, roots.imag]), method="single"),
                      t=radius * scale, criterion="distance")
    out = []
    for label in sorted(set(labels), key=lambda lab: np.flatnonzero(labels == lab)[0]):
        members = roots[labels == label]
        out.append((complex(members.mean()), len(members)))
    return out


@dataclass
class ShabatPolynomial:
    """Polynomial with critical values in {+1, -1}; coefficients are stored constant first"""

    coefficients: np.ndarray
    critical_points: List[CriticalPoint] = field(default_factory=list)
    residual: float = 0.0
    similarity: Similarity = field(default_factory=Similarity)
    iterations: int = 0

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)

    @property
    def degree(self):
        return len(self.coefficients) - 1

    @property
    def leading(self):
        return complex(self.coefficients[-1])

    @property
    def positions(self):
        return np.array([cp.position for cp in self.critical_points], dtype=complex)

    @property
    def multiplicities(self):
        return np.array([cp.multiplicity for cp in self.critical_points], dtype=int)

    def derivative(self, z):
        return derivative_product(z, self.positions, self.multiplicities, self.degree * self.leading)

    def taylor_coefficient(self, index):
        """Leading coefficient c_d of p(a + h) - p(a) at critical point index"""
        cp = self.critical_points[index]
        others = [k for k in range(len(self.critical_points)) if k != index]
        value = derivative_product(cp.position, self.positions[others], self.multiplicities[others],
                                   self.degree * self.leading)
        return complex(value) / cp.degree

    def evaluate(self, z):
        """p(z); integrates the product form from the nearest critical point above Horner's range"""
        z = np.asarray(z, dtype=complex)
        if self.degree <= HORNER_MAX_DEGREE or not self.critical_points:
            return P.polyval(z, self.coefficients)
        flat = z.ravel()
        out = np.empty(flat.shape, dtype=complex)
        positions, mults = self.positions, self.multiplicities
        scale = self.degree * self.leading
        for i, point in enumerate(flat):
            k = int(np.argmin(np.abs(positions - point)))
            out[i] = self.critical_points[k].target + segment_integral(
                positions[k], point, positions, mults, scale, self.degree - 1)
        return out.reshape(z.shape)

    def critical_values(self):
        return self.evaluate(self.positions) if self.critical_points else np.array([], dtype=complex)

    def certify(self, tol=1e-8) -> List[str]:
        """Violated Shabat invariants (empty when all hold)"""
        problems = []
        if sum(cp.multiplicity for cp in self.critical_points) != self.degree - 1:
            problems.append("critical multiplicities do not sum to n - 1")
        values = P.polyval(self.positions, self.coefficients) if self.degree <= HORNER_MAX_DEGREE \
            else self._chained_values()
        for cp, value in zip(self.critical_points, values):
            if abs(value - cp.target) > tol:
                problems.append(f"critical value at {cp.position:.6g} is {value:.6g}, expected {cp.target}")
        return problems

    def _chained_values(self):
        # values from the constant term, so targets are not assumed
        c0 = self.coefficients[0]
        positions, mults = self.positions, self.multiplicities
        scale = self.degree * self.leading
        return np.array([c0 + segment_integral(0j, a, positions, mults, scale, self.degree - 1) for a in positions])

    def to_json(self):
        return {
            "degree": self.degree,
            "coefficients": [[repr(float(c.real)), repr(float(c.imag))] for c in self.coefficients],
            "critical_points": [
                {"position": [float(cp.position.real), float(cp.position.imag)],
                 "multiplicity": cp.multiplicity, "target": cp.target, "vertex": cp.vertex}
                for cp in self.critical_points
            ],
            "residual": float(self.residual),
            "iterations": self.iterations,
            "similarity": self.similarity.to_json(),
        }

    @classmethod
    def from_json(cls, data):
        try:
            coefficients = np.array([complex(float(re), float(im)) for re, im in data["coefficients"]])
            critical = [CriticalPoint(complex(*c["position"]), int(c["multiplicity"]), int(c["target"]),
                                      int(c.get("vertex", -1))) for c in data["critical_points"]]
            similarity = Similarity.from_json(data["similarity"]) if "similarity" in data else Similarity()
            poly = cls(coefficients, critical, float(data.get("residual", 0.0)), similarity,
                       int(data.get("iterations", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed polynomial JSON: {exc}") from exc
        if int(data.get("degree", poly.degree)) != poly.degree:
            raise InputError("polynomial degree does not match its coefficients")
        return poly


def from_coefficients(coefficients, radius=CLUSTER_RADIUS, tol=1e-8) -> ShabatPolynomial:
    """Find and cluster the critical points of raw coefficients (constant first)"""
    c = np.asarray(coefficients, dtype=complex)
    if len(c) < 2 or c[-1] == 0:
        raise InputError("need a nonconstant polynomial with nonzero leading coefficient")
    critical = []
    for position, multiplicity in cluster_roots(aberth(P.polyder(c)), radius):
        value = P.polyval(position, c)
        target = 1 if value.real >= 0 else -1
        if abs(value - target) > tol:
            raise InputError(f"critical value {value:.6g} at {position:.6g} is not +1 or -1")
        critical.append(CriticalPoint(position, multiplicity, target))
    return ShabatPolynomial(c, critical)


def chebyshev(n: int) -> ShabatPolynomial:
    """T_n(z) = cos(n arccos z); the true form of the path with n edges"""
    if n < 1:
        raise InputError("degree must be at least 1")
    coefficients = np.polynomial.chebyshev.cheb2poly([0] * n + [1]).astype(complex)
    critical = [CriticalPoint(complex(math.cos(k * math.pi / n)), 1, (-1) ** k) for k in range(1, n)]
    return ShabatPolynomial(coefficients, critical)


def star(n: int) -> ShabatPolynomial:
    """2 z^n - 1; the true form of the star with n edges"""
    if n < 1:
        raise InputError("degree must be at least 1")
    coefficients = np.zeros(n + 1, dtype=complex)
    coefficients[0], coefficients[n] = -1, 2
    critical = [CriticalPoint(0j, n - 1, -1)] if n > 1 else []
    return ShabatPolynomial(coefficients, critical)


def load_polynomial(path) -> ShabatPolynomial:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read polynomial {path}: {exc}") from exc
    return ShabatPolynomial.from_json(data)
