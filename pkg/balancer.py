"""
Circle subdivision, heights and the decorated tree that evens out harmonic measure
"""
import json
import logging
import math
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import section
from errors import HeightError, InputError, ResourceGuardError, StatisticsError, SubdivisionError
from geom_tree import LEFT, NO_SIDE, RIGHT, GeomEdge, GeomTree, derive_rotation_system, hausdorff_distance, sample_points
from grid_approx import GridTree
from harmonic import CumulativeMeasure, MeasureTable, estimate_cumulative, summarize
from plane_tree import dart_walk

logger = logging.getLogger(__name__)

# Finest dyadic level the subdivision may reach
MAX_LEVEL = 60


@dataclass
class BalanceOptions:
    """Knobs for subdivision, heights and teeth"""

    delta_exp: int = 4
    group_size: int = 16
    min_hits: int = 100
    max_teeth: int = 200000
    faithful_segments: bool = False

    @classmethod
    def from_config(cls, cfg=None, **overrides):
        values = dict(section(cfg, "balance"))
        values.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})


def boundary_walk(tree: GeomTree) -> List[Tuple[int, int]]:
    """(edge id, side) in boundary-walk order; each edge appears once per side

    A dart x -> y keeps the unbounded face on its right, so traversing an edge
    from its u end covers the right side and from its v end the left side.
    """
    if tree.edge_count == 0:
        return []
    plane = derive_rotation_system(tree)
    lookup = {}
    for idx, edge in enumerate(tree.edges):
        lookup[(edge.u, edge.v)] = (idx, RIGHT)
        lookup[(edge.v, edge.u)] = (idx, LEFT)
    start = next(v for v in range(plane.vertex_count) if plane.rotations[v])
    return [lookup[dart] for dart in dart_walk(plane, start, plane.rotations[start][0])]


# == Initial partition ========================================================


@dataclass
class CircleLayout:
    """Initial partition E: consecutive circle intervals, one per (edge, side)"""

    lengths: List[Fraction]
    tags: List[Tuple[int, int]]
    marks: List[bool]  # mark at the start of each interval (a vertex preimage)

    @property
    def bounds(self):
        out = [Fraction(0)]
        for length in self.lengths:
            out.append(out[-1] + length)
        return out

    @classmethod
    def from_lengths(cls, lengths, marks=None):
        lengths = [Fraction(x).limit_denominator(2 ** 40) if not isinstance(x, Fraction) else x for x in lengths]
        total = sum(lengths)
        lengths = [x / total for x in lengths]
        tags = [(i, LEFT) for i in range(len(lengths))]
        return cls(lengths, tags, list(marks) if marks is not None else [True] * len(lengths))


def circle_layout(table: MeasureTable, tree: GeomTree, floor: Optional[float] = None) -> CircleLayout:
    """Intervals in boundary-walk order with lengths equal to the estimated side measures"""
    walk = boundary_walk(tree)
    if table.edge_count != tree.edge_count:
        raise InputError(f"measure table has {table.edge_count} edges, tree has {tree.edge_count}")
    total = table.total
    hits = []
    for edge, side in walk:
        count = Fraction(int(table.counts[edge, side]))
        if count == 0:
            if floor is None:
                raise StatisticsError(f"edge {edge} side {side} received no walkers; increase the walker count")
            logger.warning("edge %d side %d has no hits; using floor %.3g", edge, side, floor)
            count = Fraction(floor).limit_denominator(2 ** 20) * total
        hits.append(count)
    norm = sum(hits)
    return CircleLayout([h / norm for h in hits], list(walk), [True] * len(walk))


# == Dyadic subdivision =======================================================


@dataclass
class DyadicInterval:
    """[k 2^-j, (k+1) 2^-j) carrying its (edge, side) tag"""

    k: int
    j: int
    edge: int
    side: int
    mark: bool = False  # mark at the start

    @property
    def start(self):
        return Fraction(self.k, 2 ** self.j)

    @property
    def length(self):
        return Fraction(1, 2 ** self.j)

    def halves(self):
        return [DyadicInterval(2 * self.k, self.j + 1, self.edge, self.side, self.mark),
                DyadicInterval(2 * self.k + 1, self.j + 1, self.edge, self.side, False)]

    def quarters(self):
        return [DyadicInterval(4 * self.k + q, self.j + 2, self.edge, self.side, self.mark and q == 0)
                for q in range(4)]


@dataclass
class IntervalSet:
    """Dyadic circle intervals in order; see certify() for the guaranteed properties"""

    intervals: List[DyadicInterval]

    def __len__(self):
        return len(self.intervals)

    @property
    def levels(self):
        return [iv.j for iv in self.intervals]

    def groups(self) -> Dict[Tuple[int, int], List[int]]:
        out = {}
        for idx, iv in enumerate(self.intervals):
            out.setdefault((iv.edge, iv.side), []).append(idx)
        return out

    def certify(self) -> List[str]:
        """Violated invariants (empty when all hold)"""
        problems = []
        ivs = self.intervals
        count = len(ivs)
        if sum((iv.length for iv in ivs), Fraction(0)) != 1:
            problems.append("lengths do not sum to 1")
        position = Fraction(0)
        for iv in ivs:
            if iv.start != position:
                problems.append(f"gap or overlap at {position}")
                break
            position += iv.length
        for i in range(count):
            here, after = ivs[i].j, ivs[(i + 1) % count].j
            before = ivs[i - 1].j
            if abs(here - after) > 1:
                problems.append(f"intervals {i} and {(i + 1) % count} differ by more than a factor 2")
            if count > 1 and here != after and here != before:
                problems.append(f"interval {i} has no equal-length neighbor")
            if ivs[i].mark and here != before:
                problems.append(f"intervals flanking the mark at {ivs[i].start} differ in length")
        return problems


def _split_larger_neighbors(items, level, make_halves):
    """Split any item more than twice as long as a cyclic neighbor until none is"""
    while True:
        count = len(items)
        split = [count > 1 and (level(items[i]) < level(items[i - 1]) - 1 or
                                level(items[i]) < level(items[(i + 1) % count]) - 1) for i in range(count)]
        if not any(split):
            return items
        out = []
        for item, flag in zip(items, split):
            out.extend(make_halves(item) if flag else [item])
        items = out


def _presplit(layout: CircleLayout):
    """Split-larger-neighbor on E itself; returns (length, tag, mark) triples"""
    items = list(zip(layout.lengths, layout.tags, layout.marks))
    while True:
        count = len(items)
        split = [count > 1 and (items[i][0] > 2 * items[i - 1][0] or items[i][0] > 2 * items[(i + 1) % count][0])
                 for i in range(count)]
        if not any(split):
            return items
        out = []
        for item, flag in zip(items, split):
            if flag:
                half = item[0] / 2
                out.extend([(half, item[1], item[2]), (half, item[1], False)])
            else:
                out.append(item)
        items = out


def _maximal_cover(bounds, lengths):
    """Maximal dyadic intervals at most 1/4 as long as every collection interval they meet"""
    out = []
    last = len(lengths)

    def qualifies(k, j):
        a, b = Fraction(k, 2 ** j), Fraction(k + 1, 2 ** j)
        limit = 4 * (b - a)
        i = bisect_right(bounds, a) - 1
        while i < last and bounds[i] < b:
            if lengths[i] < limit:
                return False
            i += 1
        return True

    stack = [(0, 0)]
    while stack:
        k, j = stack.pop()
        if j > MAX_LEVEL:
            raise SubdivisionError(f"an interval is shorter than 2^-{MAX_LEVEL}; coarsen the partition")
        if qualifies(k, j):
            out.append((k, j))
        else:
            stack.append((2 * k + 1, j + 1))
            stack.append((2 * k, j + 1))
    return out


def subdivide(layout: CircleLayout, group_size: int = 16) -> IntervalSet:
    """Dyadic refinement of E with comparable neighbors and equal flanks at vertex marks"""
    items = _presplit(layout)
    lengths = [item[0] for item in items]
    bounds = [Fraction(0)]
    for length in lengths:
        bounds.append(bounds[-1] + length)
    if bounds[-1] != 1:
        raise SubdivisionError("partition lengths must sum to 1")

    # (a) maximal dyadic cover with the quarter rule
    cover = _maximal_cover(bounds, lengths)

    # (b) each collection interval takes the dyadics inside it or over its left end
    groups = [[] for _ in items]
    for k, j in cover:
        end = Fraction(k + 1, 2 ** j)
        groups[bisect_left(bounds, end) - 1].append((k, j))
    intervals = []
    for (length, (edge, side), mark), group in zip(items, groups):
        if not group:
            raise SubdivisionError(f"edge {edge} side {side} lost all its dyadic intervals")
        while len(group) < group_size:
            widest = min(range(len(group)), key=lambda g: (group[g][1], g))
            k, j = group[widest]
            group[widest:widest + 1] = [(2 * k, j + 1), (2 * k + 1, j + 1)]
        for pos, (k, j) in enumerate(group):
            intervals.append(DyadicInterval(k, j, edge, side, mark and pos == 0))

    # (c) comparable neighbors
    intervals = _split_larger_neighbors(intervals, lambda iv: iv.j, DyadicInterval.halves)

    # (d) quadrisect, so every interval has an equal neighbor
    intervals = [quarter for iv in intervals for quarter in iv.quarters()]

    # (e) equal flanks at marks: split the longer flank and its equal neighbor
    count = len(intervals)
    to_split = set()
    for i, iv in enumerate(intervals):
        if not iv.mark:
            continue
        before = (i - 1) % count
        if intervals[before].j == iv.j:
            continue
        if intervals[before].j < iv.j:
            longer, partner = before, (before - 1) % count
        else:
            longer, partner = i, (i + 1) % count
        if intervals[partner].j != intervals[longer].j:
            raise SubdivisionError(f"no equal neighbor beside the flank at {iv.start}")
        to_split.update((longer, partner))
    intervals = [half for i, iv in enumerate(intervals) for half in (iv.halves() if i in to_split else [iv])]

    result = IntervalSet(intervals)
    problems = result.certify()
    if problems:
        raise SubdivisionError("subdivision failed certification: " + "; ".join(problems[:3]))
    levels = result.levels
    logger.info("subdivided %d intervals into %d dyadic pieces (levels %d..%d)",
                len(layout.lengths), len(result), min(levels), max(levels))
    return result


# == Heights ==================================================================


@dataclass
class SideSegments:
    """K-segments on one side of one edge, ordered from the edge's u end"""

    start: float  # arclength where the first segment begins
    step: float  # segment length
    heights: List[int]

    def anchor(self, i):
        return self.start + i * self.step


@dataclass
class ToothPlan:
    """Heights on K-segments; tooth lengths are heights times the segment length"""

    n: int
    N: int
    segment_exp: int
    delta_exp: int
    unit: float
    sides: Dict[Tuple[int, int], SideSegments]
    walk: List[Tuple[int, int, int]]  # (edge, side, segment) in boundary order
    tip_zones: List[List[int]] = field(default_factory=list)  # walk positions
    corners: List[Tuple[int, int, int, int]] = field(default_factory=list)
    repairs: Dict[str, int] = field(default_factory=dict)
    leaves: Dict[int, Tuple[bool, bool]] = field(default_factory=dict)  # edge -> (u is leaf, v is leaf)

    @property
    def delta(self):
        return self.unit * 2.0 ** -self.delta_exp

    @property
    def segment_length(self):
        return self.unit * 2.0 ** -self.segment_exp

    def height_at(self, position):
        edge, side, seg = self.walk[position]
        return self.sides[(edge, side)].heights[seg]

    def sequence(self):
        return [self.height_at(p) for p in range(len(self.walk))]

    def certify(self) -> List[str]:
        """Violated height facts (empty when all hold)"""
        problems = []
        seq = self.sequence()
        count = len(seq)
        for p in range(count):
            here, after, before = seq[p], seq[(p + 1) % count], seq[p - 1]
            if abs(here - after) > 1:
                problems.append(f"adjacent heights jump at walk position {p}")
            if count > 1 and here != after and here != before:
                problems.append(f"walk position {p} shares its height with no neighbor")
            if not self.N <= here <= 2 * self.N:
                problems.append(f"height {here} outside [{self.N}, {2 * self.N}]")
        for zone in self.tip_zones:
            if len({seq[p] for p in zone}) > 1:
                problems.append(f"tip zone at walk position {zone[0]} is not constant")
        for quad in self.corners:
            if len({seq[p] for p in quad}) > 1:
                problems.append(f"corner at walk position {quad[1]} has unequal flanks")
        return problems

    def to_json(self):
        return {
            "n": self.n, "N": self.N, "segment_exp": self.segment_exp, "delta_exp": self.delta_exp,
            "unit": self.unit,
            "sides": [{"edge": e, "side": s, "start": seg.start, "step": seg.step, "heights": seg.heights}
                      for (e, s), seg in sorted(self.sides.items())],
            "repairs": self.repairs,
        }


def _unit_of(tree: GeomTree):
    if isinstance(tree, GridTree):
        return tree.unit
    longest = max(edge.length for edge in tree.edges)
    return 2.0 ** math.ceil(math.log2(longest))


def _segment_exponent(n, N, delta_exp, faithful):
    """(N, s) with 2N 2^-s < 2^-delta_exp"""
    if faithful:
        while 2 * N * 2.0 ** -(n + N) >= 2.0 ** -delta_exp or n + N < delta_exp:
            N += 1
        return N, n + N
    s = delta_exp + int(math.floor(math.log2(2 * N))) + 1
    return N, s


def _side_cdf(table, edge, side, min_hits):
    try:
        return estimate_cumulative(table, edge, side, min_hits)
    except StatisticsError as exc:
        logger.warning("%s; using a uniform profile", exc)
        return CumulativeMeasure.uniform(max(table.side_measure(edge, side), 1e-300))


def assign_heights(intervals: IntervalSet, tree: GeomTree, table: MeasureTable,
                   delta_exp: int = 4, options: Optional[BalanceOptions] = None) -> ToothPlan:
    """Per-side heights on K-segments from the dyadic intervals, repaired to satisfy the height facts"""
    options = options or BalanceOptions(delta_exp=delta_exp)
    levels = intervals.levels
    n = max(levels)
    N = max(n - min(levels), 1)
    N, seg_exp = _segment_exponent(n, N, delta_exp, options.faithful_segments)
    unit = _unit_of(tree)
    delta = unit * 2.0 ** -delta_exp
    seg_len = unit * 2.0 ** -seg_exp
    degrees = tree.degrees()

    # K-segments along every edge: the part J away from delta-ends at branch vertices
    layout = {}
    total_segments = 0
    for idx, edge in enumerate(tree.edges):
        length = edge.length
        cut_u = delta if degrees[edge.u] > 1 else 0.0
        cut_v = delta if degrees[edge.v] > 1 else 0.0
        usable = length - cut_u - cut_v
        if usable <= 0:
            raise InputError(f"edge {idx} is shorter than 2 delta; raise the delta exponent")
        count = max(1, int(round(usable / seg_len)))
        layout[idx] = (cut_u, usable / count, count)
        total_segments += 2 * count
    if total_segments > options.max_teeth:
        raise ResourceGuardError(f"{total_segments} K-segments exceed the guard of {options.max_teeth}")

    # heights from the interval images along each side
    sides = {}
    groups = intervals.groups()
    for (edge, side), members in groups.items():
        start, step, count = layout[edge]
        length = tree.edges[edge].length
        cdf = _side_cdf(table, edge, side, options.min_hits)
        first = intervals.intervals[members[0]].start
        span = sum((intervals.intervals[m].length for m in members), Fraction(0))
        cuts = [float((intervals.intervals[m].start - first) / span) for m in members] + [1.0]
        heights_of = [n + N - intervals.intervals[m].j for m in members]
        # walk direction: right side runs from u, left side from v
        images = cdf.inverse(np.asarray(cuts)) if side == RIGHT else cdf.inverse(1.0 - np.asarray(cuts))
        mids = (start + (np.arange(count) + 0.5) * step) / length
        heights = []
        for t in mids:
            if side == RIGHT:
                pos = int(np.searchsorted(images, t, side="right")) - 1
            else:
                pos = int(np.searchsorted(-images, -t, side="right")) - 1
            heights.append(heights_of[min(max(pos, 0), len(members) - 1)])
        sides[(edge, side)] = SideSegments(start, step, heights)

    walk = []
    for edge, side in boundary_walk(tree):
        count = layout[edge][2]
        order = range(count) if side == RIGHT else range(count - 1, -1, -1)
        walk.extend((edge, side, seg) for seg in order)

    leaves = {idx: (degrees[e.u] == 1, degrees[e.v] == 1) for idx, e in enumerate(tree.edges)}
    plan = ToothPlan(n, N, seg_exp, delta_exp, unit, sides, walk, leaves=leaves)
    plan.tip_zones = _tip_zones(plan, tree, delta)
    plan.corners = _corner_groups(plan, tree)
    _repair(plan)
    problems = plan.certify()
    if problems:
        raise HeightError("height facts violated after repair: " + "; ".join(problems[:3]),
                          edge=plan.walk[0][0])
    logger.info("heights assigned: n=%d N=%d |K|=2^-%d units, %d segments per side walk",
                n, N, seg_exp, len(walk))
    return plan


def _tip_zones(plan: ToothPlan, tree: GeomTree, delta):
    """Walk positions of segments within delta of each leaf (both sides)"""
    zones = {}
    for pos, (edge, side, seg) in enumerate(plan.walk):
        e = tree.edges[edge]
        segs = plan.sides[(edge, side)]
        lo, hi = segs.anchor(seg), segs.anchor(seg + 1)
        at_u, at_v = plan.leaves[edge]
        tol = 1e-9 * segs.step
        if at_u and hi <= delta + tol:
            zones.setdefault(e.u, []).append(pos)
        if at_v and e.length - lo <= delta + tol:
            zones.setdefault(e.v, []).append(pos)
    return [sorted(z) for _, z in sorted(zones.items())]


def _corner_groups(plan: ToothPlan, tree: GeomTree):
    """At each turn of the walk through a branch vertex: two flanks and their outward neighbors"""
    count = len(plan.walk)
    corners = []
    for pos in range(count):
        edge_here, side_here, _ = plan.walk[pos]
        edge_next, side_next, _ = plan.walk[(pos + 1) % count]
        if (edge_here, side_here) == (edge_next, side_next):
            continue
        # a turn at a leaf goes around the tip; tip zones cover it
        if edge_here == edge_next:
            continue
        corners.append(((pos - 1) % count, pos, (pos + 1) % count, (pos + 2) % count))
    return corners


def _repair(plan: ToothPlan):
    """Raise heights until all facts hold; every rule only raises, so this terminates"""
    seq = plan.sequence()
    count = len(seq)
    repairs = Counter()
    changed = True
    while changed:
        changed = False
        # (1) Lipschitz envelope along the cyclic walk
        for _ in range(count):
            moved = False
            for p in range(count):
                best = max(seq[p - 1], seq[(p + 1) % count]) - 1
                if seq[p] < best:
                    seq[p] = best
                    repairs["jump"] += 1
                    moved = changed = True
            if not moved:
                break
        # (3) tip zones share the zone maximum
        for zone in plan.tip_zones:
            top = max(seq[p] for p in zone)
            for p in zone:
                if seq[p] < top:
                    seq[p] = top
                    repairs["tip"] += 1
                    changed = True
        # (4) corner flanks and their outward neighbors tie
        for quad in plan.corners:
            top = max(seq[p] for p in quad)
            for p in quad:
                if seq[p] < top:
                    seq[p] = top
                    repairs["corner"] += 1
                    changed = True
        # (2) isolated heights
        for p in range(count):
            before, after = seq[p - 1], seq[(p + 1) % count]
            if count > 1 and seq[p] != before and seq[p] != after:
                if max(before, after) > seq[p]:
                    seq[p] = max(before, after)
                else:
                    seq[(p + 1) % count] = seq[p]
                repairs["isolated"] += 1
                changed = True
    for pos, value in enumerate(seq):
        edge, side, seg = plan.walk[pos]
        plan.sides[(edge, side)].heights[seg] = value
    plan.repairs = dict(repairs)
    for kind, number in sorted(repairs.items()):
        logger.info("height repair '%s' applied %d times", kind, number)


# == Teeth ====================================================================


class DecoratedTree(GeomTree):
    """T plus perpendicular teeth; every edge keeps the id and side of its base edge"""

    def __init__(self, vertices, edges, delta):
        super().__init__(vertices, edges)
        self.delta = delta

    def to_json(self):
        data = super().to_json()
        data["delta"] = self.delta
        return data


def _point_on(polyline, arclength):
    """Position and unit tangent at an arclength along a polyline"""
    steps = np.abs(np.diff(polyline))
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    k = int(np.clip(np.searchsorted(cum, arclength, side="right") - 1, 0, len(steps) - 1))
    while steps[k] == 0 and k + 1 < len(steps):
        k += 1
    tangent = (polyline[k + 1] - polyline[k]) / steps[k]
    return polyline[k] + tangent * (arclength - cum[k]), tangent


def _cut(polyline, positions):
    """Split a polyline at increasing interior arclengths; returns len(positions) + 1 pieces"""
    cum = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(polyline)))])
    last = len(polyline) - 1
    pieces = []
    current = [polyline[0]]
    k = 1
    for s in positions:
        while k < last and cum[k] < s:
            current.append(polyline[k])
            k += 1
        point, _ = _point_on(polyline, s)
        current.append(point)
        pieces.append(np.array(current))
        current = [point]
        if k < last and cum[k] == s:
            k += 1
    current.extend(polyline[k:])
    pieces.append(np.array(current))
    return pieces


def build_teeth(plan: ToothPlan, tree: GeomTree) -> DecoratedTree:
    """Walls between adjacent rectangles as perpendicular teeth; tapered near leaves"""
    vertices = list(tree.vertices)
    edges = []
    teeth = 0
    for idx, edge in enumerate(tree.edges):
        right, left = plan.sides[(idx, RIGHT)], plan.sides[(idx, LEFT)]
        count = len(right.heights)
        anchors = [right.anchor(i) for i in range(1, count)]
        ids = []
        for s in anchors:
            point, _ = _point_on(edge.polyline, s)
            vertices.append(point)
            ids.append(len(vertices) - 1)
        chain = [edge.u] + ids + [edge.v]
        for piece, (a, b) in zip(_cut(edge.polyline, anchors), zip(chain[:-1], chain[1:])):
            edges.append(GeomEdge(a, b, piece, edge.tag, idx, NO_SIDE))

        at_u, at_v = plan.leaves[idx]
        length = edge.length
        for i, s in enumerate(anchors, start=1):
            point, tangent = _point_on(edge.polyline, s)
            tip_gap = min(s if at_u else math.inf, length - s if at_v else math.inf)
            in_tip = tip_gap < plan.delta - 1e-12 * plan.unit
            for side, segs, normal in ((LEFT, left, 1j * tangent), (RIGHT, right, -1j * tangent)):
                height = min(segs.heights[i - 1], segs.heights[i]) * plan.segment_length
                if in_tip:
                    height = min(height, tip_gap)
                if height <= 0:
                    continue
                vertices.append(point + height * normal)
                edges.append(GeomEdge(ids[i - 1], len(vertices) - 1, [point, point + height * normal],
                                      "tip-tooth" if in_tip else "tooth", idx, side))
                teeth += 1

    decorated = DecoratedTree(np.array(vertices), edges, plan.delta)
    problem = decorated.validate()
    if problem is not None:
        if isinstance(tree, GridTree):
            raise AssertionError(f"tooth crossing in a grid tree: {problem}")
        raise SubdivisionError(f"decorated tree is not a plane tree ({problem}); raise the delta exponent")
    logger.info("decorated tree: %d edges (%d teeth)", decorated.edge_count, teeth)
    return decorated


def decoration_distance(tree: GeomTree, decorated: GeomTree):
    spacing = max(tree.diameter(), 1e-300) / 512
    return hausdorff_distance(sample_points(tree, spacing), sample_points(decorated, spacing))


def balance_report(before: MeasureTable, after: MeasureTable):
    """Per-edge balance statistics of T and of T' folded back onto T's edges"""
    before_measure = before.measure
    if after.origins is None:
        after_measure = after.measure
    else:
        folded = np.zeros((int(after.origins.max()) + 1, 2))
        for f in range(after.edge_count):
            origin, side = int(after.origins[f]), int(after.sides[f])
            if side == NO_SIDE:
                folded[origin] += after.counts[f]
            else:
                folded[origin, side] += after.counts[f].sum()
        after_measure = folded / max(after.total, 1)
    report = {"before": summarize(before_measure), "after": summarize(after_measure)}
    report["improved"] = report["after"]["max_side_deviation"] < report["before"]["max_side_deviation"]
    return report


def save_plan(path, plan: ToothPlan):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(plan.to_json(), handle, indent=1)
