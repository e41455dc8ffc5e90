"""
Shabat polynomial of a plane tree: damped Newton on the critical-point system,
retries, leaf-by-leaf continuation and similarity normal form
"""
import cmath
import logging
import math
from collections import deque
from dataclasses import dataclass, fields, replace
from typing import Dict, Optional, Tuple

import networkx as nx
import numpy as np

from config import section
from errors import ConvergenceError, InputError, NumericalError, SolveError
from geom_tree import GeomTree, Similarity, straight_embedding
from plane_tree import BipartiteColoring, PlaneTree, bipartite_coloring, canonical_code, is_equivalent, plane_isomorphism
from plane_tree import validate as validate_plane_tree
from polynomial import CriticalPoint, ShabatPolynomial, expand, from_coefficients, gauss_rule, segment_integral
from tracer import TraceOptions, trace_tree

logger = logging.getLogger(__name__)

# Critical points closer than this (relative) make the Jacobian meaningless
COINCIDENCE_TOL = 1e-12
# New leaf offset as a fraction of the shortest incident edge
LEAF_OFFSET = 0.3


@dataclass
class SolveOptions:
    """Newton, retry and continuation settings"""

    tol: float = 1e-12
    max_iter: int = 200
    backtrack: float = 0.5
    min_step: float = 2.0 ** -20
    perturbation: float = 0.05
    max_retries: int = 4
    seed: int = 0
    continuation: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise InputError("solve tolerance must be positive")
        if not 0 < self.backtrack < 1:
            raise InputError("backtracking factor must lie in (0, 1)")

    @classmethod
    def from_config(cls, cfg=None, **overrides):
        values = dict(section(cfg, "solve"))
        values.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})


def _multiplicities(tree: PlaneTree):
    return np.array([tree.degree(v) - 1 for v in tree.internal_vertices], dtype=int)


def _root(tree: PlaneTree):
    """Highest-degree vertex, smallest id on ties"""
    degrees = tree.degrees
    return max(range(tree.vertex_count), key=lambda v: (degrees[v], -v))


def solve_coloring(tree: PlaneTree) -> BipartiteColoring:
    """Coloring that sends the highest-degree vertex to -1, so stars solve to z^n - 1"""
    return bipartite_coloring(tree, _root(tree)).flipped()


def column_integrals(z0, z1, positions, multiplicities, n):
    """Integrals along z0 -> z1 of the derivative of the product form in each critical point"""
    positions = np.asarray(positions, dtype=complex)
    mults = np.asarray(multiplicities)
    nodes, weights = gauss_rule(max(n - 1, 1))
    half = (z1 - z0) / 2
    zeta = (z0 + z1) / 2 + half * nodes
    diff = zeta[:, None] - positions[None, :]
    powers = diff ** mults
    ones = np.ones((len(zeta), 1), dtype=complex)
    before = np.cumprod(np.hstack([ones, powers[:, :-1]]), axis=1)
    after = np.cumprod(np.hstack([ones, powers[:, :0:-1]]), axis=1)[:, ::-1]
    columns = -mults * n * before * after * diff ** (mults - 1)
    return half * (weights @ columns)


def expand_tree(tree: PlaneTree, state, c0):
    """Coefficients of the polynomial whose critical points are state at the internal vertices"""
    return expand(list(zip(np.asarray(state, dtype=complex), _multiplicities(tree))), c0, tree.edge_count)


def residual(tree: PlaneTree, coloring: BipartiteColoring, state, c0) -> np.ndarray:
    """p(a_v) - eps_v for every internal v, then the centering sum"""
    internal = tree.internal_vertices
    n = tree.edge_count
    if not internal:
        return np.array([c0], dtype=complex)
    a = np.asarray(state, dtype=complex)
    mults = _multiplicities(tree)
    values = [c0 + segment_integral(0j, point, a, mults, n, n - 1) - coloring[v] for v, point in zip(internal, a)]
    return np.array(values + [np.dot(mults, a)], dtype=complex)


def jacobian(tree: PlaneTree, state) -> np.ndarray:
    """Derivatives of residual in (a, c0)"""
    internal = tree.internal_vertices
    n = tree.edge_count
    if not internal:
        return np.ones((1, 1), dtype=complex)
    a = np.asarray(state, dtype=complex)
    mults = _multiplicities(tree)
    k = len(internal)
    matrix = np.zeros((k + 1, k + 1), dtype=complex)
    for row, point in enumerate(a):
        matrix[row, :k] = column_integrals(0j, point, a, mults, n)
    matrix[:k, k] = 1.0
    matrix[k, :k] = mults
    return matrix


def _coincident(a):
    if len(a) < 2:
        return False
    diff = np.abs(a[:, None] - a[None, :])
    np.fill_diagonal(diff, np.inf)
    return diff.min() < COINCIDENCE_TOL * max(1.0, float(np.abs(a).max()))


class _ChainedSystem:
    """Newton system in (a, C) with C = p(a_r); values chained along internal tree edges from r"""

    def __init__(self, tree: PlaneTree, coloring: BipartiteColoring):
        self.internal = tree.internal_vertices
        self.slot = {v: i for i, v in enumerate(self.internal)}
        self.mults = _multiplicities(tree)
        self.targets = np.array([coloring[v] for v in self.internal], dtype=float)
        self.n = tree.edge_count
        self.anchor = self.slot[_root(tree)]
        # breadth-first parent links inside the subtree of internal vertices
        self.order = []
        seen = {self.anchor}
        queue = deque([_root(tree)])
        while queue:
            v = queue.popleft()
            for w in tree.rotations[v]:
                if w in self.slot and self.slot[w] not in seen:
                    seen.add(self.slot[w])
                    self.order.append((self.slot[w], self.slot[v]))
                    queue.append(w)

    @property
    def size(self):
        return len(self.internal)

    def offset(self, a):
        """int_0^{a_r} of the product form; converts between C and c0"""
        return segment_integral(0j, a[self.anchor], a, self.mults, self.n, self.n - 1)

    def evaluate(self, x, with_jacobian=True):
        k = self.size
        a, anchor_value = x[:k], x[k]
        values = np.zeros(k, dtype=complex)
        values[self.anchor] = anchor_value
        chain = np.zeros((k, k), dtype=complex) if with_jacobian else None
        for child, parent in self.order:
            values[child] = values[parent] + segment_integral(a[parent], a[child], a, self.mults, self.n, self.n - 1)
            if with_jacobian:
                chain[child] = chain[parent] + column_integrals(a[parent], a[child], a, self.mults, self.n)
        F = np.concatenate([values - self.targets, [np.dot(self.mults, a)]])
        if not with_jacobian:
            return F, None
        J = np.zeros((k + 1, k + 1), dtype=complex)
        J[:k, :k] = chain
        J[:k, k] = 1.0
        J[k, :k] = self.mults
        return F, J


def _linear(iterations=0):
    return ShabatPolynomial(np.array([0j, 1 + 0j]), [], 0.0, Similarity(), iterations)


def newton_solve(tree: PlaneTree, coloring: BipartiteColoring, state, c0,
                 options: Optional[SolveOptions] = None) -> ShabatPolynomial:
    """Damped Newton from (state, c0) until the residual sup-norm is within tol"""
    options = options or SolveOptions()
    n = tree.edge_count
    if n == 1:
        return _linear(0 if c0 == 0 else 1)

    system = _ChainedSystem(tree, coloring)
    k = system.size
    a = np.asarray(state, dtype=complex)
    x = np.concatenate([a, [c0 + system.offset(a)]])
    F, J = system.evaluate(x)
    res = float(np.abs(F).max())
    iterations = 0
    while res > options.tol:
        if iterations >= options.max_iter:
            raise ConvergenceError("max iterations", res, iterations)
        if _coincident(x[:k]):
            raise ConvergenceError("coincident critical points", res, iterations)
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular Jacobian", res, iterations) from None
        if not np.all(np.isfinite(dx)):
            raise ConvergenceError("singular Jacobian", res, iterations)
        step = 1.0
        while True:
            trial = x + step * dx
            if not _coincident(trial[:k]):
                trial_res = float(np.abs(system.evaluate(trial, with_jacobian=False)[0]).max())
                if trial_res < res:
                    break
            step *= options.backtrack
            if step < options.min_step:
                raise ConvergenceError("step underflow", res, iterations)
        x = trial
        F, J = system.evaluate(x)
        res = float(np.abs(F).max())
        iterations += 1
        logger.debug("newton iteration %d: residual %.3e, step %.3g", iterations, res, step)

    a = x[:k]
    c0 = x[k] - system.offset(a)
    critical = [CriticalPoint(complex(point), int(m), int(eps), v)
                for point, m, eps, v in zip(a, system.mults, system.targets, system.internal)]
    public = float(np.abs(residual(tree, coloring, a, c0)).max())
    return ShabatPolynomial(expand(critical, c0, n), critical, public, Similarity(), iterations)


def planted_layout(tree: PlaneTree) -> GeomTree:
    """Radial drawing: depth as radius, nested wedges, children in rotation order after the parent"""
    root = _root(tree)
    graph = tree.to_graph()
    positions = np.zeros(tree.vertex_count, dtype=complex)
    leaves_below = {}
    for v in reversed(list(nx.dfs_preorder_nodes(graph, root))):
        children = [w for w in graph.neighbors(v) if w in leaves_below]
        leaves_below[v] = max(1, sum(leaves_below[w] for w in children))

    stack = [(root, None, 0.0, 2 * math.pi, 0)]
    while stack:
        v, parent, lo, hi, depth = stack.pop()
        rot = list(tree.rotations[v])
        if parent is None:
            children = rot
            weights = [1.0] * len(children)
        else:
            i = rot.index(parent)
            children = rot[i + 1:] + rot[:i]
            weights = [float(leaves_below[c]) for c in children]
        total = sum(weights)
        start = lo
        for child, weight in zip(children, weights):
            width = (hi - lo) * weight / total
            a, b = start, start + width
            start = b
            if b - a > math.pi:
                mid = (a + b) / 2
                a, b = mid - math.pi / 2, mid + math.pi / 2
            positions[child] = (depth + 1) * cmath.exp(1j * (a + b) / 2)
            stack.append((child, v, a, b, depth + 1))
    return straight_embedding(tree, positions)


def initial_guess(tree: PlaneTree, coloring: BipartiteColoring, positions):
    """Centered internal positions scaled so chained values best fit the critical values"""
    positions = np.asarray(positions, dtype=complex)
    n = tree.edge_count
    internal = tree.internal_vertices
    if not internal:
        return np.zeros(0, dtype=complex), 0j
    mults = _multiplicities(tree)
    shape = positions[internal]
    shape = shape - np.dot(mults, shape) / mults.sum()
    system = _ChainedSystem(tree, coloring)
    targets = system.targets
    anchor = system.anchor
    sigma = 1.0
    if len(internal) > 1:
        drop, _ = system.evaluate(np.concatenate([shape, [0j]]), with_jacobian=False)
        chained = drop[:-1] + targets
        wanted = targets - targets[anchor]
        denom = float(np.sum(np.abs(chained) ** 2))
        if denom > 0:
            sigma = complex(np.sum(np.conj(chained) * wanted) / denom)
    scale = abs(sigma) ** (1.0 / n) * cmath.exp(1j * cmath.phase(sigma) / n) if sigma != 0 else 1.0
    state = scale * shape
    c0 = targets[anchor] - system.offset(state)
    return state, c0


def _hint_positions(tree: PlaneTree, hint: GeomTree):
    mapping = plane_isomorphism(tree, hint.plane_tree())
    if mapping is None:
        raise InputError("hint geometry does not realize the requested plane tree")
    return np.array([hint.vertices[mapping[v]] for v in range(tree.vertex_count)])


def verify(tree: PlaneTree, p: ShabatPolynomial, trace_options: Optional[TraceOptions] = None) -> Optional[str]:
    """None when p traces back to tree, else a diagnosis"""
    try:
        traced = trace_tree(p, trace_options).plane_tree()
    except (NumericalError, InputError) as exc:
        return f"trace failed: {exc}"
    if not is_equivalent(traced, tree):
        return f"combinatorics mismatch: traced {canonical_code(traced)}, expected {canonical_code(tree)}"
    return None


def solve(tree: PlaneTree, hint: Optional[GeomTree] = None, options: Optional[SolveOptions] = None,
          trace_options: Optional[TraceOptions] = None) -> ShabatPolynomial:
    """Shabat polynomial of tree, verified by tracing its true form"""
    options = options or SolveOptions()
    problem = validate_plane_tree(tree)
    if problem is not None:
        raise InputError(f"invalid plane tree: {problem}")
    n = tree.edge_count
    if n == 0:
        raise InputError("a single vertex has no Shabat polynomial")
    if n == 1:
        return _linear()

    coloring = solve_coloring(tree)
    positions = _hint_positions(tree, hint) if hint is not None else planted_layout(tree).vertices
    spread = max(float(np.abs(positions - positions.mean()).max()), 1e-12)
    rng = np.random.default_rng(options.seed)
    best = (math.inf, "no attempt")
    for attempt in range(options.max_retries + 1):
        trial = positions
        if attempt:
            noise = rng.standard_normal(len(positions)) + 1j * rng.standard_normal(len(positions))
            trial = positions + options.perturbation * spread * noise
        try:
            state, c0 = initial_guess(tree, coloring, trial)
            p = newton_solve(tree, coloring, state, c0, options)
        except ConvergenceError as exc:
            logger.warning("attempt %d on %d edges: %s (residual %.3g)", attempt, n, exc.reason, exc.residual)
            best = min(best, (exc.residual, exc.reason))
            continue
        diagnosis = verify(tree, p, trace_options)
        if diagnosis is None:
            logger.info("solved %d edges in %d iterations (residual %.2e)", n, p.iterations, p.residual)
            return p
        logger.warning("attempt %d on %d edges: %s", attempt, n, diagnosis)
        best = min(best, (p.residual, diagnosis))

    if options.continuation:
        try:
            return _continue(tree, coloring, options, trace_options)
        except (SolveError, ConvergenceError) as exc:
            logger.warning("continuation failed on %d edges: %s", n, exc)
            if isinstance(exc, SolveError):
                best = min(best, (exc.best_residual, exc.diagnosis or str(exc)))
    raise SolveError(f"no Shabat polynomial found for the tree with {n} edges", best[0], best[1])


def remove_leaf(tree: PlaneTree, leaf: int) -> Tuple[PlaneTree, Dict[int, int]]:
    """Tree without leaf; mapping from old to new vertex ids"""
    mapping = {v: (v if v < leaf else v - 1) for v in range(tree.vertex_count) if v != leaf}
    rotations = [[mapping[w] for w in rot if w != leaf] for v, rot in enumerate(tree.rotations) if v != leaf]
    return PlaneTree(tree.vertex_count - 1, rotations), mapping


def continuation_leaf(tree: PlaneTree) -> int:
    """Leaf whose removal keeps the diameter largest; ties by edge id"""
    graph = tree.to_graph()
    best = None
    for leaf in tree.leaves:
        rest = graph.copy()
        rest.remove_node(leaf)
        diameter = nx.diameter(rest) if rest.number_of_nodes() > 1 else 0
        key = (-diameter, tree.edge_id(leaf, tree.rotations[leaf][0]))
        if best is None or key < best[0]:
            best = (key, leaf)
    return best[1]


def _continue(tree: PlaneTree, coloring, options: SolveOptions, trace_options):
    leaf = continuation_leaf(tree)
    attach = tree.rotations[leaf][0]
    smaller, mapping = remove_leaf(tree, leaf)
    logger.info("continuation: solving without leaf %d (attached at %d)", leaf, attach)
    p_small = solve(smaller, None, options, trace_options)
    traced = trace_tree(p_small, trace_options)
    iso = plane_isomorphism(smaller, traced.plane_tree())
    if iso is None:
        raise SolveError("continuation lost the combinatorics of the smaller tree")

    positions = np.zeros(tree.vertex_count, dtype=complex)
    for old, new in mapping.items():
        positions[old] = traced.geom.vertices[iso[new]]
    # leaf goes into its rotational gap at the attachment vertex
    directions = {}
    at = iso[mapping[attach]]
    for edge in traced.geom.edges:
        if at in (edge.u, edge.v):
            other = edge.v if edge.u == at else edge.u
            directions[other] = cmath.phase(edge.initial_direction(at))
    inverse = {iso[new]: old for old, new in mapping.items()}
    angles = {inverse[w]: angle for w, angle in directions.items()}
    others = [w for w in tree.rotations[attach] if w != leaf]
    if len(others) == 1:
        bisector = angles[others[0]] + math.pi
    else:
        before, after = tree.predecessor(attach, leaf), tree.successor(attach, leaf)
        gap = (angles[after] - angles[before]) % (2 * math.pi)
        bisector = angles[before] + gap / 2
    reach = min(abs(positions[w] - positions[attach]) for w in others)
    positions[leaf] = positions[attach] + LEAF_OFFSET * reach * cmath.exp(1j * bisector)

    state, c0 = initial_guess(tree, coloring, positions)
    p = newton_solve(tree, coloring, state, c0, options)
    diagnosis = verify(tree, p, trace_options)
    if diagnosis is not None:
        raise SolveError(f"continuation step re-adding leaf {leaf} failed", p.residual, diagnosis)
    logger.info("continuation re-added leaf %d (%d edges, residual %.2e)", leaf, tree.edge_count, p.residual)
    return p


def normalize(p: ShabatPolynomial) -> Tuple[ShabatPolynomial, Similarity]:
    """q(z) = p(lam z + mu), monic with centered critical points; returns (q, z -> lam z + mu)"""
    n = p.degree
    lam = p.leading ** (-1.0 / n)
    if n == 1:
        mu = -p.coefficients[0] / p.coefficients[1]
        similarity = Similarity(abs(lam), cmath.phase(lam), complex(mu))
        return ShabatPolynomial(np.array([0j, 1 + 0j]), [], p.residual, similarity, p.iterations), similarity
    if not p.critical_points:
        p = replace(from_coefficients(p.coefficients), residual=p.residual, iterations=p.iterations)
    mults = p.multiplicities
    mu = complex(np.dot(mults, p.positions) / mults.sum())
    critical = [CriticalPoint((cp.position - mu) / lam, cp.multiplicity, cp.target, cp.vertex)
                for cp in p.critical_points]
    value = complex(p.evaluate(mu))
    similarity = Similarity(abs(lam), cmath.phase(lam), mu)
    q = ShabatPolynomial(expand(critical, value, n), critical, p.residual, similarity, p.iterations)
    return q, similarity


def compare_up_to_similarity(p: ShabatPolynomial, q: ShabatPolynomial) -> float:
    """Coefficient sup-distance of the normal forms, minimized over rotations and the sign flip"""
    if p.degree != q.degree:
        raise ValueError(f"degree mismatch: {p.degree} vs {q.degree}")
    n = p.degree
    ours = normalize(p)[0].coefficients
    theirs = normalize(q)[0].coefficients
    powers = np.arange(n + 1)
    best = math.inf
    for j in range(n):
        turn = cmath.exp(2j * math.pi * j / n)
        flip = cmath.exp(1j * math.pi * (2 * j + 1) / n)
        best = min(best,
                   float(np.abs(ours - theirs * turn ** powers).max()),
                   float(np.abs(ours + theirs * flip ** powers).max()))
    return best
