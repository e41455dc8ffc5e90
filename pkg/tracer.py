"""
Trace the tree p^-1([-1, 1]) of a Shabat polynomial by predictor-corrector continuation
"""
import cmath
import logging
import math
from dataclasses import dataclass, field, fields
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from config import section
from errors import InputError, TraceError
from geom_tree import GeomEdge, GeomTree
from plane_tree import PlaneTree
from polynomial import ShabatPolynomial, aberth

logger = logging.getLogger(__name__)

# First step leaves a vertex by this much in t, using the local model
START_STEP = 1e-6
MAX_DT = 1.0 / 16
CORRECTOR_ITERATIONS = 2
CAPTURE_FRACTION = 0.25
MODEL_SAMPLES = 8
AGREEMENT_TOL = 1e-8
MAX_REFINE_PASSES = 12


@dataclass
class TraceOptions:
    tol: float = 1e-12
    snap: float = 1e-7
    min_points: int = 32
    max_turn_deg: float = 10.0
    max_steps: int = 20000

    def __post_init__(self):
        if self.tol <= 0 or self.snap <= 0:
            raise InputError("trace tolerances must be positive")

    @classmethod
    def from_config(cls, cfg=None, **overrides):
        values = dict(section(cfg, "trace"))
        values.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})


class Vertex(NamedTuple):
    """Root of p - value of multiplicity degree"""

    position: complex
    value: int
    degree: int
    critical: int = -1  # index into p.critical_points, -1 for leaves


@dataclass
class TracedTree:
    """Traced geometry with per-vertex values and degrees and per-edge parameter samples"""

    geom: GeomTree
    values: List[int]
    degrees: List[int]
    params: List[np.ndarray] = field(default_factory=list)

    def plane_tree(self) -> PlaneTree:
        return self.geom.plane_tree()

    def to_json(self):
        data = self.geom.to_json()
        data["values"] = list(self.values)
        data["degrees"] = list(self.degrees)
        return data


def _value(p: ShabatPolynomial, z):
    return complex(p.evaluate(z))


def _slope(p: ShabatPolynomial, z):
    return complex(p.derivative(z))


def _newton(p, z, t, tol, iterations):
    """Complex Newton on p(z) = t; returns (z, converged, steps used)"""
    for step in range(1, iterations + 1):
        slope = _slope(p, z)
        if slope == 0:
            return z, False, step
        step_size = (_value(p, z) - t) / slope
        z = z - step_size
        if abs(_value(p, z) - t) <= tol * max(1.0, abs(t)) or abs(step_size) <= 1e-14 * (1.0 + abs(z)):
            return z, True, step
    return z, False, iterations


def _taylor(p: ShabatPolynomial, vertex: Vertex):
    if vertex.critical >= 0:
        return p.taylor_coefficient(vertex.critical)
    return _slope(p, vertex.position)


def vertices(p: ShabatPolynomial) -> List[Vertex]:
    """Critical points plus the simple roots of p - 1 and p + 1"""
    out = [Vertex(cp.position, cp.target, cp.degree, k) for k, cp in enumerate(p.critical_points)]
    for value in (1, -1):
        shifted = p.coefficients.copy()
        shifted[0] -= value
        divisor = np.array([1.0 + 0j])
        for cp in p.critical_points:
            if cp.target == value:
                divisor = P.polymul(divisor, P.polyfromroots([cp.position] * cp.degree))
        quotient, _ = P.polydiv(shifted, divisor)
        if len(quotient) < 2:
            continue
        for root in aberth(quotient):
            root, _, _ = _newton(p, complex(root), value, 1e-14, 4)
            out.append(Vertex(root, value, 1))
    total = sum(v.degree for v in out)
    if total != 2 * p.degree:
        raise TraceError(f"found vertex degrees summing to {total}, expected {2 * p.degree}")
    return out


def local_directions(p: ShabatPolynomial, vertex: Vertex) -> List[complex]:
    """Unit directions in which p - value is real with sign -value, sorted by angle"""
    c = _taylor(p, vertex)
    goal = math.pi if vertex.value > 0 else 0.0
    base = (goal - cmath.phase(c)) / vertex.degree
    angles = sorted((base + 2 * math.pi * k / vertex.degree) % (2 * math.pi) for k in range(vertex.degree))
    return [cmath.exp(1j * a) for a in angles]


def _model_branch(c, degree, t_offset, near):
    """Branch of a + (t_offset / c)^(1/d) closest in angle to the direction near"""
    base = (cmath.phase(t_offset) - cmath.phase(c)) / degree
    options = [base + 2 * math.pi * k / degree for k in range(degree)]
    return min(options, key=lambda a: abs(math.remainder(a - cmath.phase(near), 2 * math.pi)))


def _capture_radii(ends: Sequence[Vertex], known: Sequence[Vertex], start: complex):
    """Disks around each possible end where the local model stays accurate"""
    radii = []
    for v in ends:
        others = [abs(v.position - w.position) for w in known if w.position != v.position]
        radii.append(CAPTURE_FRACTION * min(others + [abs(v.position - start)]))
    return radii


def trace_edge(p: ShabatPolynomial, vertex: Vertex, direction: complex, known: Sequence[Vertex],
               options: Optional[TraceOptions] = None):
    """Follow the edge leaving vertex in direction until t = p(z) reaches -value

    Returns (polyline, parameters, index into known of the end vertex or None for a new leaf).
    """
    options = options or TraceOptions()
    value, target = vertex.value, -vertex.value
    n = p.degree
    c = _taylor(p, vertex)

    t = value * (1.0 - START_STEP)
    z = vertex.position + (START_STEP / abs(c)) ** (1.0 / vertex.degree) * direction
    z, _, _ = _newton(p, z, t, options.tol, 4)
    points, params = [vertex.position, z], [float(value), t]

    ends = [(k, w) for k, w in enumerate(known) if w.value == target and w.degree > 1]
    radii = _capture_radii([w for _, w in ends], known, vertex.position)
    coeffs = [_taylor(p, w) for _, w in ends]
    dt = 1.0 / (8 * n)
    for _ in range(options.max_steps):
        remaining = target - t
        for (k, w), radius, cw in zip(ends, radii, coeffs):
            dist = abs(z - w.position)
            if dist >= radius:
                continue
            rho = (abs(remaining) / abs(cw)) ** (1.0 / w.degree)
            if abs(dist - rho) < 0.5 * rho:
                _finish_with_model(p, w, cw, z, t, points, params, options)
                return np.array(points), np.array(params), k

        final = abs(remaining) <= dt
        h = remaining if final else math.copysign(dt, remaining)
        slope = _slope(p, z)
        if slope == 0:
            raise TraceError(f"derivative vanished at {z:.6g} inside an edge")
        predicted = z + h / slope
        corrected, ok, used = _newton(p, predicted, t + h, options.tol, CORRECTOR_ITERATIONS)
        if ok and abs(corrected - predicted) <= 0.25 * abs(predicted - z) + 1e-15:
            z, t = corrected, (target if final else t + h)
            points.append(z)
            params.append(t)
            if final:
                z, _, _ = _newton(p, z, target, options.tol, 4)
                points[-1] = z
                return np.array(points), np.array(params), None
            if used <= 1:
                dt = min(2 * dt, MAX_DT)
        else:
            dt /= 2
            if dt < 1e-14:
                raise TraceError(f"step collapse at t={t:.6g}, z={z:.6g}; unexpected critical point nearby")
    raise TraceError(f"edge from {vertex.position:.6g} not finished in {options.max_steps} steps")


def _finish_with_model(p, w: Vertex, cw, z, t, points, params, options):
    """Approach a multiple vertex along its local model z = a + ((t - value)/c)^(1/d)"""
    dist = abs(z - w.position)
    angle = _model_branch(cw, w.degree, complex(t - w.value), z - w.position)
    for i in range(1, MODEL_SAMPLES):
        rho = dist * (MODEL_SAMPLES - i) / MODEL_SAMPLES
        ti = w.value + (t - w.value) * (rho / dist) ** w.degree
        guess = w.position + rho * cmath.exp(1j * angle)
        polished, ok, _ = _newton(p, guess, ti, options.tol, 3)
        points.append(polished if ok and abs(polished - guess) < 0.25 * rho else guess)
        params.append(ti)
    points.append(w.position)
    params.append(float(w.value))


def _insert_midpoint(p, za, ta, zb, tb, anchor, options):
    tm = (ta + tb) / 2
    guess = (za + zb) / 2
    if anchor is not None:
        a, value, c, degree, other = anchor
        rho = (abs(tm - value) / abs(c)) ** (1.0 / degree)
        angle = _model_branch(c, degree, complex(tm - value), other - a)
        guess = a + rho * cmath.exp(1j * angle)
    z, _, _ = _newton(p, guess, tm, options.tol, 8)
    return z, tm


def refine(p: ShabatPolynomial, points, params, start: Vertex, end: Optional[Vertex], options=None):
    """Insert parameter midpoints until the polyline is dense enough and turns less than max_turn_deg"""
    options = options or TraceOptions()
    points, params = list(points), list(params)
    limit = math.radians(options.max_turn_deg)
    for _ in range(MAX_REFINE_PASSES):
        marked = set()
        for i in range(1, len(points) - 1):
            v1, v2 = points[i] - points[i - 1], points[i + 1] - points[i]
            if v1 != 0 and v2 != 0 and abs(cmath.phase(v2 / v1)) > limit:
                marked.update((i - 1, i))
        if len(points) < options.min_points:
            gaps = np.argsort(-np.abs(np.diff(params)))
            marked.update(int(g) for g in gaps[:options.min_points - len(points)])
        if not marked:
            break
        new_points, new_params = [points[0]], [params[0]]
        last = len(points) - 2
        for i in range(len(points) - 1):
            if i in marked:
                anchor = None
                if i == 0 and start.degree > 1:
                    anchor = (start.position, start.value, _taylor(p, start), start.degree, points[1])
                elif i == last and end is not None and end.degree > 1:
                    anchor = (end.position, end.value, _taylor(p, end), end.degree, points[i])
                z, t = _insert_midpoint(p, points[i], params[i], points[i + 1], params[i + 1], anchor, options)
                new_points.append(z)
                new_params.append(t)
            new_points.append(points[i + 1])
            new_params.append(params[i + 1])
        points, params = new_points, new_params
    return np.array(points), np.array(params)


def _agreement(p, line_a, params_a, line_b, params_b, options):
    """Largest gap between two traces of one edge at equal parameters"""
    order = np.argsort(params_a)
    ta, za = np.asarray(params_a)[order], np.asarray(line_a)[order]
    ends = (line_b[0], line_b[-1])
    reach = CAPTURE_FRACTION * abs(ends[1] - ends[0])
    worst = 0.0
    for z, t in zip(line_b[2:-2], params_b[2:-2]):
        if min(abs(z - ends[0]), abs(z - ends[1])) < reach:
            continue
        guess = complex(np.interp(t, ta, za.real), np.interp(t, ta, za.imag))
        onto, _, _ = _newton(p, guess, t, options.tol, 8)
        worst = max(worst, abs(onto - z))
    return worst


def _trace_linear(p: ShabatPolynomial, options: TraceOptions) -> TracedTree:
    c0, c1 = p.coefficients
    low, high = (-1 - c0) / c1, (1 - c0) / c1
    params = np.linspace(-1.0, 1.0, options.min_points)
    line = (params - c0) / c1
    geom = GeomTree(np.array([low, high]), [GeomEdge(0, 1, line)])
    return TracedTree(geom, [-1, 1], [1, 1], [params])


def trace_tree(p: ShabatPolynomial, options: Optional[TraceOptions] = None) -> TracedTree:
    """All edges traced from the critical points, leaves traced back and cross-checked"""
    options = options or TraceOptions()
    n = p.degree
    if n == 1:
        return _trace_linear(p, options)
    if not p.critical_points:
        raise TraceError("polynomial of degree > 1 without critical points")

    known = [Vertex(cp.position, cp.target, cp.degree, k) for k, cp in enumerate(p.critical_points)]
    verts = list(known)
    scale = max(1.0, float(np.abs(p.positions).max()))
    halves = {}

    def record(u, w, line, params):
        halves.setdefault((min(u, w), max(u, w)), []).append((u, w, line, params))

    for k, vertex in enumerate(known):
        for direction in local_directions(p, vertex):
            line, params, end = trace_edge(p, vertex, direction, known, options)
            if end is None:
                leaf = line[-1]
                matches = [j for j in range(len(known), len(verts)) if abs(verts[j].position - leaf) <= options.snap * scale]
                if matches:
                    end = matches[0]
                    line[-1] = verts[end].position
                else:
                    verts.append(Vertex(complex(leaf), -vertex.value, 1))
                    end = len(verts) - 1
            record(k, end, line, params)

    for j in range(len(known), len(verts)):
        leaf = verts[j]
        line, params, end = trace_edge(p, leaf, local_directions(p, leaf)[0], known, options)
        if end is None:
            raise TraceError(f"leaf at {leaf.position:.6g} does not trace back to a critical point")
        record(j, end, line, params)

    edges, edge_params = [], []
    for key in sorted(halves):
        group = halves[key]
        if len(group) != 2:
            raise TraceError(f"edge {key} traced {len(group)} times; unmatched half-edges")
        (u, w, line, params), (_, _, back, back_params) = group
        gap = _agreement(p, line, params, back, back_params, options)
        if gap > AGREEMENT_TOL * scale:
            raise TraceError(f"traces of edge {key} from both ends differ by {gap:.3g}")
        line, params = refine(p, line, params, verts[u], verts[w], options)
        edges.append(GeomEdge(u, w, line))
        edge_params.append(params)

    if len(edges) != n:
        raise TraceError(f"traced {len(edges)} edges, polynomial has degree {n}")
    geom = GeomTree(np.array([v.position for v in verts]), edges)
    problem = geom.validate()
    if problem is not None:
        raise TraceError(f"traced tree is invalid: {problem}")
    logger.debug("traced %d edges, %d vertices", n, len(verts))
    return TracedTree(geom, [v.value for v in verts], [v.degree for v in verts], edge_params)


def check_polyline(p: ShabatPolynomial, line, tol=1e-9):
    """Largest violation of Im p = 0 and Re p in [-1, 1] along a polyline"""
    values = np.asarray(p.evaluate(np.asarray(line)))
    scale = 1.0 + np.abs(values)
    off_axis = np.abs(values.imag) / scale
    outside = np.maximum(np.abs(values.real) - 1.0, 0.0)
    return float(max(off_axis.max(), outside.max()))
