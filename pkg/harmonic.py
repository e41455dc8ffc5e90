"""
Walk-on-spheres estimation of harmonic measure from infinity on an embedded tree
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from tqdm import tqdm

from config import section
from errors import InputError, StatisticsError
from geom_tree import LEFT, RIGHT, GeomTree, to_xy

logger = logging.getLogger(__name__)

SIDE_NAMES = {LEFT: "left", RIGHT: "right"}
NEAREST_CANDIDATES = 8
PIECES_PER_DIAMETER = 256


@dataclass
class WalkConfig:
    """Walk-on-spheres parameters; distances are fractions of the tree diameter

    Chunk c draws from the substream (seed, c), so results depend on seed and chunk_size
    but not on the number of workers.
    """

    launch_factor: float = 64.0
    stop_factor: float = 1e-6
    vertex_factor: float = 10.0
    escalations: int = 3
    max_steps: int = 100000
    bins: int = 64
    seed: int = 0
    chunk_size: int = 16384
    workers: int = 1
    progress: bool = False

    def __post_init__(self):
        if self.launch_factor <= 1:
            raise InputError("launch radius factor must exceed 1")
        if self.stop_factor <= 0:
            raise InputError("stop distance must be positive")
        if self.vertex_factor < 0:
            raise InputError("vertex tolerance must be nonnegative")
        if self.bins < 1 or self.chunk_size < 1:
            raise InputError("bins and chunk size must be positive")

    @classmethod
    def from_config(cls, cfg=None, **overrides):
        values = dict(section(cfg, "walk"))
        values.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})


class SegmentIndex:
    """Nearest-segment queries on a tree's polylines through a k-d tree of piece midpoints"""

    def __init__(self, tree: GeomTree, max_piece: Optional[float] = None):
        starts, ends, owners, _ = tree.segments()
        lengths = np.abs(ends - starts)
        # arclength at the start of every segment, measured within its edge
        offsets = np.zeros(len(starts))
        edge_length = np.zeros(tree.edge_count)
        for e in range(tree.edge_count):
            mask = owners == e
            seg = lengths[mask]
            offsets[mask] = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
            edge_length[e] = seg.sum()

        diameter = max(tree.diameter(), 1e-300)
        max_piece = diameter / PIECES_PER_DIAMETER if max_piece is None else max_piece
        parts = np.maximum(1, np.ceil(lengths / max_piece).astype(int))
        seg_of_piece = np.repeat(np.arange(len(starts)), parts)
        first = np.concatenate([[0], np.cumsum(parts)[:-1]])
        j = np.arange(parts.sum()) - np.repeat(first, parts)
        frac0 = j / parts[seg_of_piece]
        frac1 = (j + 1) / parts[seg_of_piece]
        direction = ends - starts

        self.a = starts[seg_of_piece] + direction[seg_of_piece] * frac0
        self.b = starts[seg_of_piece] + direction[seg_of_piece] * frac1
        self.edge = owners[seg_of_piece]
        self.arc0 = offsets[seg_of_piece] + lengths[seg_of_piece] * frac0
        self.length = np.abs(self.b - self.a)
        self.edge_length = edge_length
        self.half = float(self.length.max()) / 2.0
        self.kdtree = cKDTree(to_xy((self.a + self.b) / 2))
        self.k = min(NEAREST_CANDIDATES, len(self.a))
        self.vertices = tree.vertices
        self.vertex_tree = cKDTree(to_xy(tree.vertices))
        self.diameter = diameter

    def _candidates(self, z):
        dist, idx = self.kdtree.query(to_xy(z), k=self.k)
        return np.atleast_2d(dist.reshape(len(z), -1)), np.atleast_2d(idx.reshape(len(z), -1))

    def _exact(self, z, idx):
        """Distances from z[:, None] to pieces idx, with nearest points and fractions"""
        a, b = self.a[idx], self.b[idx]
        ab = b - a
        denom = np.maximum((ab * ab.conj()).real, 1e-300)
        t = np.clip(((z[:, None] - a) * ab.conj()).real / denom, 0.0, 1.0)
        point = a + t * ab
        return np.abs(z[:, None] - point), point, t

    def lower_bound(self, z):
        """Vectorized lower bound on the distance from z to the tree"""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        mid_dist, idx = self._candidates(z)
        exact, _, _ = self._exact(z, idx)
        return np.minimum(exact.min(axis=1), mid_dist[:, -1] - self.half)

    def query(self, z):
        """Exact (distance, edge id, arclength fraction, nearest point, piece id) for each z"""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        mid_dist, idx = self._candidates(z)
        exact, point, t = self._exact(z, idx)
        best = exact.argmin(axis=1)
        rows = np.arange(len(z))
        dist = exact[rows, best]
        piece = idx[rows, best]
        nearest = point[rows, best]
        frac = t[rows, best]
        if self.k < len(self.a):
            for r in np.nonzero(mid_dist[:, -1] - self.half < dist)[0]:
                ball = self.kdtree.query_ball_point(to_xy(z[r:r + 1])[0], dist[r] + self.half)
                cand = np.asarray(ball, dtype=int)
                d, p, tt = self._exact(z[r:r + 1], cand[None, :])
                k = int(d[0].argmin())
                dist[r], piece[r], nearest[r], frac[r] = d[0, k], cand[k], p[0, k], tt[0, k]
        edge = self.edge[piece]
        arc = self.arc0[piece] + frac * self.length[piece]
        param = np.where(self.edge_length[edge] > 0, arc / np.maximum(self.edge_length[edge], 1e-300), 0.0)
        return dist, edge, np.clip(param, 0.0, 1.0), nearest, piece

    def vertex_distance(self, z):
        return self.vertex_tree.query(to_xy(np.atleast_1d(z)))[0]


def build_index(tree: GeomTree) -> SegmentIndex:
    return SegmentIndex(tree)


def _walk_chunk(index: SegmentIndex, center, radius, eps_stop, config: WalkConfig, chunk, count, edges):
    """Run one chunk of walkers on its own random substream"""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, chunk]))
    counts = np.zeros((edges, 2), dtype=np.int64)
    hist = np.zeros((edges, 2, config.bins), dtype=np.int64)

    z = center + radius * np.exp(2j * math.pi * rng.random(count))
    eps = np.full(count, eps_stop)
    escalated = np.zeros(count, dtype=int)
    steps = np.zeros(count, dtype=int)
    active = np.arange(count)
    discarded = 0

    while active.size:
        here = z[active]
        step = index.lower_bound(here)
        near = step < eps[active]
        done = np.zeros(active.size, dtype=bool)

        if near.any():
            ids = active[near]
            dist, edge, param, nearest, piece = index.query(z[ids])
            hit = dist < eps[ids]
            tangent = index.b[piece] - index.a[piece]
            cross = (tangent.conj() * (z[ids] - nearest)).imag
            at_vertex = index.vertex_distance(nearest) < config.vertex_factor * eps[ids]
            unsure = hit & (at_vertex | (cross == 0)) & (escalated[ids] < config.escalations)
            record = hit & ~unsure

            eps[ids[unsure]] /= 10.0
            escalated[ids[unsure]] += 1
            side = np.where(cross[record] > 0, LEFT, RIGHT)
            bins = np.minimum((param[record] * config.bins).astype(int), config.bins - 1)
            np.add.at(counts, (edge[record], side), 1)
            np.add.at(hist, (edge[record], side, bins), 1)

            near_pos = np.nonzero(near)[0]
            done[near_pos[record]] = True
            step[near_pos] = np.where(record, 0.0, dist)

        moving = active[~done]
        jump = step[~done]
        z[moving] += jump * np.exp(2j * math.pi * rng.random(moving.size))
        steps[moving] += 1

        # Leaving the launch circle: re-enter by the exterior Poisson kernel
        outside = moving[np.abs(z[moving] - center) > radius]
        if outside.size:
            alpha = radius / np.conj(z[outside] - center)
            zeta = np.exp(2j * math.pi * rng.random(outside.size))
            z[outside] = center + radius * (zeta + alpha) / (1 + np.conj(alpha) * zeta)

        lost = moving[steps[moving] >= config.max_steps]
        discarded += lost.size
        keep = np.ones(count, dtype=bool)
        keep[active[done]] = False
        keep[lost] = False
        active = active[keep[active]]

    return counts, hist, discarded


@dataclass
class MeasureTable:
    """Per (edge, side) hit counts and positional histograms"""

    counts: np.ndarray
    hist: np.ndarray
    discarded: int
    seed: int
    edge_lengths: np.ndarray
    origins: Optional[np.ndarray] = None
    sides: Optional[np.ndarray] = None

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def edge_count(self):
        return self.counts.shape[0]

    @property
    def bins(self):
        return self.hist.shape[2]

    @property
    def measure(self):
        return self.counts / max(self.total, 1)

    @property
    def stderr(self):
        p = self.measure
        return np.sqrt(p * (1 - p) / max(self.total, 1))

    def side_measure(self, edge, side):
        return float(self.measure[edge, side])

    def summary(self):
        return summarize(self.measure)

    def to_json(self):
        entries = []
        for e in range(self.edge_count):
            for s in (LEFT, RIGHT):
                entries.append({
                    "edge": e,
                    "side": SIDE_NAMES[s],
                    "hits": int(self.counts[e, s]),
                    "measure": float(self.measure[e, s]),
                    "stderr": float(self.stderr[e, s]),
                    "histogram": [int(x) for x in self.hist[e, s]],
                })
        data = {
            "total": self.total,
            "discarded": int(self.discarded),
            "seed": int(self.seed),
            "bins": self.bins,
            "edge_lengths": [float(x) for x in self.edge_lengths],
            "entries": entries,
            "summary": self.summary(),
        }
        if self.origins is not None:
            data["origins"] = [int(x) for x in self.origins]
            data["sides"] = [int(x) for x in self.sides]
        return data

    @classmethod
    def from_json(cls, data):
        try:
            edges = len(data["edge_lengths"])
            bins = int(data["bins"])
            counts = np.zeros((edges, 2), dtype=np.int64)
            hist = np.zeros((edges, 2, bins), dtype=np.int64)
            for entry in data["entries"]:
                s = LEFT if entry["side"] == "left" else RIGHT
                counts[entry["edge"], s] = entry["hits"]
                hist[entry["edge"], s] = entry["histogram"]
            origins = np.asarray(data["origins"]) if "origins" in data else None
            sides = np.asarray(data["sides"]) if "sides" in data else None
            return cls(counts, hist, int(data["discarded"]), int(data["seed"]),
                       np.asarray(data["edge_lengths"], dtype=float), origins, sides)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InputError(f"malformed measure report: {exc}") from exc


def summarize(measure):
    """Side ratios and edge-measure spread for an (E, 2) array of measures"""
    left, right = measure[:, LEFT], measure[:, RIGHT]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(right > 0, left / right, np.inf)
    edge = left + right
    mean = edge.mean() if len(edge) else 0.0
    deviation = np.abs(ratio - 1.0)
    return {
        "edges": int(len(edge)),
        "total_measure": float(measure.sum()),
        "max_side_ratio": float(ratio.max()) if len(edge) else 1.0,
        "min_side_ratio": float(ratio.min()) if len(edge) else 1.0,
        "max_side_deviation": float(deviation.max()) if len(edge) else 0.0,
        "max_edge_measure": float(edge.max()) if len(edge) else 0.0,
        "min_edge_measure": float(edge.min()) if len(edge) else 0.0,
        "edge_measure_cv": float(edge.std() / mean) if mean > 0 else 0.0,
    }


def side_ratios(table: MeasureTable):
    """Empirical left/right measure ratio of every edge"""
    left, right = table.measure[:, LEFT], table.measure[:, RIGHT]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(right > 0, left / right, np.inf)


def estimate_measures(tree: GeomTree, config: Optional[WalkConfig] = None, walkers: int = 100000) -> MeasureTable:
    """Harmonic measure from infinity of every (edge, side) by walk on spheres"""
    config = config or WalkConfig()
    if walkers < 1:
        raise InputError("need at least one walker")
    index = SegmentIndex(tree)
    center = tree.center()
    radius = config.launch_factor * max(tree.circumradius(center), index.diameter / 2)
    eps_stop = config.stop_factor * index.diameter
    chunks = [(c, min(config.chunk_size, walkers - c * config.chunk_size))
              for c in range(math.ceil(walkers / config.chunk_size))]
    logger.info("walking %d walkers on %d edges (%d chunks)", walkers, tree.edge_count, len(chunks))

    args = [(index, center, radius, eps_stop, config, c, n, tree.edge_count) for c, n in chunks]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(tqdm(pool.map(_walk_chunk_star, args), total=len(args), disable=not config.progress))
    else:
        results = [_walk_chunk(*a) for a in tqdm(args, disable=not config.progress)]

    counts = sum(r[0] for r in results)
    hist = sum(r[1] for r in results)
    discarded = sum(r[2] for r in results)
    if discarded:
        logger.warning("%d of %d walkers exceeded %d steps and were discarded", discarded, walkers, config.max_steps)
    origins = np.array([e.origin for e in tree.edges])
    sides = np.array([e.side for e in tree.edges])
    has_origin = bool((origins >= 0).any())
    return MeasureTable(counts, hist, int(discarded), config.seed, index.edge_length.copy(),
                        origins if has_origin else None, sides if has_origin else None)


def _walk_chunk_star(args):
    return _walk_chunk(*args)


class CumulativeMeasure:
    """Piecewise-linear CDF of one edge side over arclength fraction in [0, 1]"""

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)

    @property
    def total(self):
        return float(self.values[-1])

    def __call__(self, t):
        return np.interp(t, self.knots, self.values)

    def inverse(self, q):
        """Arclength fraction where the CDF reaches fraction q of the side total"""
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        target = q * self.total
        k = np.clip(np.searchsorted(self.values, target, side="left"), 1, len(self.values) - 1)
        lo, hi = self.values[k - 1], self.values[k]
        width = np.where(hi > lo, hi - lo, 1.0)
        frac = np.where(hi > lo, (target - lo) / width, 0.0)
        return self.knots[k - 1] + frac * (self.knots[k] - self.knots[k - 1])

    @classmethod
    def uniform(cls, total=1.0):
        return cls([0.0, 1.0], [0.0, total])


def _side_index(side):
    if side in (LEFT, RIGHT):
        return side
    names = {"left": LEFT, "right": RIGHT}
    if side not in names:
        raise InputError(f"unknown side {side!r}")
    return names[side]


def estimate_cumulative(table: MeasureTable, edge: int, side, min_hits: int = 100) -> CumulativeMeasure:
    """CDF of the hit position along an edge side, normalized to that side's measure"""
    s = _side_index(side)
    hits = int(table.counts[edge, s])
    if hits < min_hits:
        raise StatisticsError(f"edge {edge} {SIDE_NAMES[s]} side has {hits} hits, need {min_hits}")
    knots = np.linspace(0.0, 1.0, table.bins + 1)
    values = np.concatenate([[0.0], np.cumsum(table.hist[edge, s])]) / hits * table.measure[edge, s]
    return CumulativeMeasure(knots, values)


def joukowsky(w):
    """g(w) = (w + 1/w) / 2, exterior of the unit disk onto the complement of [-1, 1]"""
    w = np.asarray(w, dtype=complex)
    return (w + 1.0 / w) / 2.0


def arcsine_cdf(x):
    """Harmonic measure from infinity of [-1, x] on one side of the slit [-1, 1], normalized"""
    return np.arcsin(np.clip(x, -1.0, 1.0)) / math.pi + 0.5


def true_tree_side_measure(n, t_from, t_to):
    """Measure on one side of a true-tree edge between parameters t = p(z)"""
    return np.abs(np.arccos(np.clip(t_from, -1, 1)) - np.arccos(np.clip(t_to, -1, 1))) / (2 * math.pi * n)


def dkw_band(samples, alpha=1e-4):
    """Dvoretzky-Kiefer-Wolfowitz half-width for an empirical CDF"""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * samples))
