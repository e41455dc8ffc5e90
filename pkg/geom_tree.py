"""
Embedded planar trees, Hausdorff distance and similarity alignment
"""
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from errors import InputError
from plane_tree import PlaneTree, validate as validate_plane_tree

logger = logging.getLogger(__name__)

ENDPOINT_TOLERANCE = 1e-9  # relative to the tree diameter
CROSSING_TOLERANCE = 1e-12  # relative to the tree diameter
ANGLE_TOLERANCE = 1e-12
ALIGN_ROTATIONS = 256

# side labels used by harmonic, balancer and the teeth
LEFT = 0
RIGHT = 1
NO_SIDE = -1


def as_points(data):
    """Complex 1-D array from complex values, (N, 2) arrays or a GeomTree"""
    if isinstance(data, GeomTree):
        return data.all_points()
    arr = np.asarray(data)
    if arr.ndim == 2 and arr.shape[1] == 2 and not np.iscomplexobj(arr):
        return arr[:, 0].astype(float) + 1j * arr[:, 1].astype(float)
    return arr.astype(complex).ravel()


def to_xy(points):
    points = np.asarray(points, dtype=complex).ravel()
    return np.column_stack([points.real, points.imag])


def point_diameter(points):
    """Largest pairwise distance of a finite set"""
    xy = np.unique(to_xy(points), axis=0)
    if len(xy) < 2:
        return 0.0
    try:
        xy = xy[ConvexHull(xy).vertices]
    except (RuntimeError, ValueError):
        # Collinear: the farthest point from any point is an extreme one
        far = xy[np.argmax(np.hypot(*(xy - xy[0]).T))]
        return float(np.max(np.hypot(*(xy - far).T)))
    diff = xy[:, None, :] - xy[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


@dataclass
class GeomEdge:
    """Polyline from vertex u to vertex v; origin/side record decorated-tree provenance"""

    u: int
    v: int
    polyline: np.ndarray
    tag: str = "edge"
    origin: int = -1
    side: int = NO_SIDE

    def __post_init__(self):
        self.polyline = np.asarray(self.polyline, dtype=complex).ravel()

    @property
    def length(self):
        return float(np.abs(np.diff(self.polyline)).sum())

    def initial_direction(self, vertex):
        """Direction leaving vertex along this edge (first non-degenerate step)"""
        line = self.polyline if vertex == self.u else self.polyline[::-1]
        for point in line[1:]:
            step = point - line[0]
            if abs(step) > 0:
                return step / abs(step)
        raise InputError(f"edge {self.u}-{self.v} has zero length")


@dataclass
class GeomTree:
    """Vertex positions plus polyline edges"""

    vertices: np.ndarray
    edges: List[GeomEdge] = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=complex).ravel()

    @property
    def vertex_count(self):
        return len(self.vertices)

    @property
    def edge_count(self):
        return len(self.edges)

    def degrees(self):
        degree = np.zeros(self.vertex_count, dtype=int)
        for edge in self.edges:
            degree[edge.u] += 1
            degree[edge.v] += 1
        return degree

    def incident(self, vertex):
        return [idx for idx, edge in enumerate(self.edges) if vertex in (edge.u, edge.v)]

    def all_points(self):
        if not self.edges:
            return self.vertices.copy()
        return np.concatenate([self.vertices] + [edge.polyline for edge in self.edges])

    def diameter(self):
        return point_diameter(self.all_points())

    def bounding_box(self):
        points = self.all_points()
        return points.real.min(), points.imag.min(), points.real.max(), points.imag.max()

    def center(self):
        x0, y0, x1, y1 = self.bounding_box()
        return complex((x0 + x1) / 2, (y0 + y1) / 2)

    def circumradius(self, center=None):
        center = self.center() if center is None else center
        return float(np.abs(self.all_points() - center).max())

    def segments(self):
        """(start, end, edge id, index within polyline) for every polyline segment"""
        starts, ends, owners, index = [], [], [], []
        for idx, edge in enumerate(self.edges):
            line = edge.polyline
            starts.append(line[:-1])
            ends.append(line[1:])
            owners.append(np.full(len(line) - 1, idx))
            index.append(np.arange(len(line) - 1))
        if not starts:
            empty = np.zeros(0, dtype=complex)
            return empty, empty.copy(), np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        return (np.concatenate(starts), np.concatenate(ends),
                np.concatenate(owners), np.concatenate(index))

    def plane_tree(self):
        return derive_rotation_system(self)

    def validate(self, endpoint_tol=ENDPOINT_TOLERANCE, crossing_tol=CROSSING_TOLERANCE) -> Optional[str]:
        """Return None for a valid embedded tree, else the first violation found"""
        if self.vertex_count == 0:
            return "no vertices"
        scale = max(self.diameter(), 1e-300)
        for idx, edge in enumerate(self.edges):
            if not (0 <= edge.u < self.vertex_count and 0 <= edge.v < self.vertex_count):
                return f"edge {idx} references a missing vertex"
            if len(edge.polyline) < 2:
                return f"edge {idx} has fewer than two points"
            if abs(edge.polyline[0] - self.vertices[edge.u]) > endpoint_tol * scale:
                return f"edge {idx} does not start at vertex {edge.u}"
            if abs(edge.polyline[-1] - self.vertices[edge.v]) > endpoint_tol * scale:
                return f"edge {idx} does not end at vertex {edge.v}"
        try:
            tree = derive_rotation_system(self)
        except InputError as exc:
            return str(exc)
        problem = validate_plane_tree(tree)
        if problem is not None:
            return problem
        return _find_crossing(self, crossing_tol * scale)

    def to_json(self):
        return {
            "vertices": [[float(z.real), float(z.imag)] for z in self.vertices],
            "edges": [
                {
                    "from": int(edge.u),
                    "to": int(edge.v),
                    "polyline": [[float(z.real), float(z.imag)] for z in edge.polyline],
                    "tag": edge.tag,
                    "origin": int(edge.origin),
                    "side": int(edge.side),
                }
                for edge in self.edges
            ],
        }

    @classmethod
    def from_json(cls, data):
        if "depth" in data and cls is GeomTree:
            from grid_approx import GridTree
            return GridTree.from_json(data)
        try:
            vertices = as_points(np.asarray(data["vertices"], dtype=float).reshape(-1, 2))
            edges = [
                GeomEdge(int(e["from"]), int(e["to"]),
                         as_points(np.asarray(e["polyline"], dtype=float).reshape(-1, 2)),
                         e.get("tag", "edge"), int(e.get("origin", -1)), int(e.get("side", NO_SIDE)))
                for e in data["edges"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed geometric tree JSON: {exc}") from exc
        return cls(vertices, edges)


def _segment_distance(p1, p2, q1, q2):
    """Euclidean distance between segments p1p2 and q1q2 (0 if they cross)"""
    def cross(a, b):
        return a.real * b.imag - a.imag * b.real

    d1 = cross(p2 - p1, q1 - p1)
    d2 = cross(p2 - p1, q2 - p1)
    d3 = cross(q2 - q1, p1 - q1)
    d4 = cross(q2 - q1, p2 - q1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return 0.0
    return min(_point_segment_distance(p1, q1, q2), _point_segment_distance(p2, q1, q2),
               _point_segment_distance(q1, p1, p2), _point_segment_distance(q2, p1, p2))


def _point_segment_distance(z, a, b):
    ab = b - a
    denom = (ab * ab.conjugate()).real
    if denom == 0:
        return abs(z - a)
    t = min(1.0, max(0.0, ((z - a) * ab.conjugate()).real / denom))
    return abs(z - (a + t * ab))


def _find_crossing(tree: GeomTree, tol):
    """Bucket segments on a uniform grid and test nearby pairs"""
    starts, ends, owners, index = tree.segments()
    count = len(starts)
    if count < 2:
        return None
    lengths = np.abs(ends - starts)
    cell = max(float(np.median(lengths)) * 2.0, tree.diameter() / 4096.0, 1e-300)
    last = {idx: len(edge.polyline) - 2 for idx, edge in enumerate(tree.edges)}

    def endpoint_keys(k):
        e, i = int(owners[k]), int(index[k])
        edge = tree.edges[e]
        first = ("v", edge.u) if i == 0 else ("p", e, i)
        second = ("v", edge.v) if i == last[e] else ("p", e, i + 1)
        return first, second

    buckets = defaultdict(list)
    lo_x = np.floor((np.minimum(starts.real, ends.real) - tol) / cell).astype(int)
    hi_x = np.floor((np.maximum(starts.real, ends.real) + tol) / cell).astype(int)
    lo_y = np.floor((np.minimum(starts.imag, ends.imag) - tol) / cell).astype(int)
    hi_y = np.floor((np.maximum(starts.imag, ends.imag) + tol) / cell).astype(int)
    for k in range(count):
        for i in range(lo_x[k], hi_x[k] + 1):
            for j in range(lo_y[k], hi_y[k] + 1):
                buckets[(i, j)].append(k)

    checked = set()
    for members in buckets.values():
        for a_pos in range(len(members)):
            for b_pos in range(a_pos + 1, len(members)):
                a, b = members[a_pos], members[b_pos]
                pair = (a, b) if a < b else (b, a)
                if pair in checked:
                    continue
                checked.add(pair)
                dist = _segment_distance(starts[a], ends[a], starts[b], ends[b])
                if dist > tol:
                    continue
                shared = set(endpoint_keys(a)) & set(endpoint_keys(b))
                if shared and not _overlapping(starts[a], ends[a], starts[b], ends[b], shared,
                                               endpoint_keys(a), endpoint_keys(b), tol):
                    continue
                return (f"edges {int(owners[a])} and {int(owners[b])} intersect "
                        f"near {complex(starts[a]):.6g}")
    return None


def _overlapping(p1, p2, q1, q2, shared, keys_p, keys_q, tol):
    """Segments meeting at a shared endpoint overlap if they leave it in the same direction"""
    key = next(iter(shared))
    apex = p1 if keys_p[0] == key else p2
    far_p = p2 if keys_p[0] == key else p1
    far_q = q2 if keys_q[0] == key else q1
    u, w = far_p - apex, far_q - apex
    cross = u.real * w.imag - u.imag * w.real
    dot = (u * w.conjugate()).real
    return abs(cross) <= tol * max(abs(u), abs(w)) and dot > 0


def derive_rotation_system(tree: GeomTree) -> PlaneTree:
    """Counterclockwise order of incident edges by the angle of their initial direction"""
    incident = defaultdict(list)
    for edge in tree.edges:
        incident[edge.u].append((np.angle(edge.initial_direction(edge.u)), edge.v))
        incident[edge.v].append((np.angle(edge.initial_direction(edge.v)), edge.u))
    rotations = []
    for vertex in range(tree.vertex_count):
        entries = sorted(incident[vertex])
        for (a1, w1), (a2, w2) in zip(entries, entries[1:] + entries[:1]):
            if w1 != w2 and abs(math.remainder(a2 - a1, 2 * math.pi)) <= ANGLE_TOLERANCE:
                raise InputError(f"degenerate embedding: edges to {w1} and {w2} leave vertex {vertex} at the same angle")
        rotations.append([w for _, w in entries])
    return PlaneTree(tree.vertex_count, rotations)


def straight_embedding(tree: PlaneTree, positions) -> GeomTree:
    """Straight-line drawing of a plane tree at the given vertex positions"""
    positions = np.asarray(positions, dtype=complex)
    edges = [GeomEdge(u, v, [positions[u], positions[v]]) for u, v in tree.edges]
    return GeomTree(positions, edges)


def hausdorff_distance(a, b) -> float:
    """Symmetric Hausdorff distance between two finite point sets"""
    a_xy, b_xy = to_xy(as_points(a)), to_xy(as_points(b))
    if len(a_xy) == 0 or len(b_xy) == 0:
        raise ValueError("Hausdorff distance of an empty set")
    forward = cKDTree(b_xy).query(a_xy)[0].max()
    backward = cKDTree(a_xy).query(b_xy)[0].max()
    return float(max(forward, backward))


def sample_points(tree: GeomTree, spacing: float) -> np.ndarray:
    """Points along all polylines with gaps at most spacing, vertices included"""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    chunks = [tree.vertices]
    for edge in tree.edges:
        line = edge.polyline
        for a, b in zip(line[:-1], line[1:]):
            parts = max(1, int(math.ceil(abs(b - a) / spacing)))
            chunks.append(a + (b - a) * np.arange(parts + 1) / parts)
    return np.concatenate(chunks)


@dataclass(frozen=True)
class Similarity:
    """z -> scale * exp(i * rotation) * z + translation"""

    scale: float = 1.0
    rotation: float = 0.0
    translation: complex = 0j

    @property
    def factor(self):
        return self.scale * complex(math.cos(self.rotation), math.sin(self.rotation))

    def apply(self, z):
        return self.factor * np.asarray(z) + self.translation

    def apply_tree(self, tree: GeomTree) -> GeomTree:
        edges = [GeomEdge(e.u, e.v, self.apply(e.polyline), e.tag, e.origin, e.side) for e in tree.edges]
        return GeomTree(self.apply(tree.vertices), edges)

    def inverse(self):
        inv = 1.0 / self.factor
        return Similarity(1.0 / self.scale, -self.rotation, -inv * self.translation)

    def compose(self, other):
        """self after other"""
        factor = self.factor * other.factor
        return Similarity(abs(factor), math.atan2(factor.imag, factor.real),
                          self.factor * other.translation + self.translation)

    def to_json(self):
        return {"scale": self.scale, "rotation": self.rotation,
                "translation": [float(self.translation.real), float(self.translation.imag)]}

    @classmethod
    def from_json(cls, data):
        return cls(float(data["scale"]), float(data["rotation"]),
                   complex(data["translation"][0], data["translation"][1]))


def similarity_align(movable, target, spacing=None, rounds=80):
    """Best similarity found by moment matching, a rotation grid and coordinate descent

    Returns (Similarity, aligned Hausdorff distance). The distance is an upper
    bound on the optimum over all similarities.
    """
    target = as_points(target)
    if isinstance(movable, GeomTree):
        if spacing is None:
            spacing = max(movable.diameter(), 1e-300) / 256.0
        points = sample_points(movable, spacing)
    else:
        points = as_points(movable)
    if len(points) == 0 or len(target) == 0:
        raise ValueError("alignment needs nonempty point sets")

    target_center = target.mean()
    target_radius = math.sqrt(np.mean(np.abs(target - target_center) ** 2))
    center = points.mean()
    radius = math.sqrt(np.mean(np.abs(points - center) ** 2))
    if target_radius == 0:
        raise ValueError("degenerate target: a single point has no scale")
    if radius == 0:
        raise ValueError("degenerate movable set: a single point has no scale")

    target_index = cKDTree(to_xy(target))

    def distance(log_scale, rotation, tx, ty):
        factor = math.exp(log_scale) * complex(math.cos(rotation), math.sin(rotation))
        moved = factor * (points - center) + complex(tx, ty)
        moved_xy = to_xy(moved)
        forward = target_index.query(moved_xy)[0].max()
        backward = cKDTree(moved_xy).query(to_xy(target))[0].max()
        return max(forward, backward)

    params = [math.log(target_radius / radius), 0.0, target_center.real, target_center.imag]
    best = None
    for k in range(ALIGN_ROTATIONS):
        rotation = 2 * math.pi * k / ALIGN_ROTATIONS
        value = distance(params[0], rotation, params[2], params[3])
        if best is None or value < best[0]:
            best = (value, rotation)
    value, params[1] = best

    steps = [0.05, 2 * math.pi / ALIGN_ROTATIONS, 0.05 * target_radius, 0.05 * target_radius]
    for _ in range(rounds):
        improved = False
        for i in range(4):
            for sign in (1.0, -1.0):
                trial = list(params)
                trial[i] += sign * steps[i]
                trial_value = distance(*trial)
                if trial_value < value:
                    params, value, improved = trial, trial_value, True
                    break
        if not improved:
            steps = [s / 2 for s in steps]
            if steps[1] < 1e-12:
                break

    factor = math.exp(params[0]) * complex(math.cos(params[1]), math.sin(params[1]))
    similarity = Similarity(math.exp(params[0]), math.remainder(params[1], 2 * math.pi),
                            complex(params[2], params[3]) - factor * center)
    logger.debug("aligned distance %.3e (scale %.4g, rotation %.4g)", value, similarity.scale, similarity.rotation)
    return similarity, float(value)


def load_points(path):
    """Point set JSON: [[re, im], ...]"""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        points = as_points(np.asarray(data, dtype=float).reshape(-1, 2))
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
        raise InputError(f"cannot read points {path}: {exc}") from exc
    if len(points) == 0:
        raise InputError(f"{path} contains no points")
    return points


def save_points(path, points):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump([[float(z.real), float(z.imag)] for z in as_points(points)], handle)


def load_geom_tree(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read tree {path}: {exc}") from exc
    return GeomTree.from_json(data)


def save_json(path, data):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(data, handle, indent=1)
