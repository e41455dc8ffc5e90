"""
Combinatorial plane trees: rotation systems, canonical codes and enumeration
"""
import json
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from errors import InputError, ResourceGuardError

logger = logging.getLogger(__name__)

# Exhaustive enumeration walks all Dyck words; Catalan(9) = 4862
MAX_ENUMERATION_EDGES = 9


@dataclass(frozen=True)
class PlaneTree:
    """A tree together with a counterclockwise cyclic order of neighbors at every vertex"""

    vertex_count: int
    rotations: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        # Accept lists from callers, store tuples so the tree stays hashable
        object.__setattr__(self, "rotations", tuple(tuple(int(w) for w in rot) for rot in self.rotations))

    @property
    def edge_count(self):
        return sum(len(rot) for rot in self.rotations) // 2

    @property
    def edges(self):
        """Unordered edges (u < v) in canonical order; list index is the edge id"""
        return sorted((u, v) for u, rot in enumerate(self.rotations) for v in rot if u < v)

    @property
    def edge_ids(self):
        return {edge: idx for idx, edge in enumerate(self.edges)}

    def edge_id(self, u, v):
        return self.edge_ids[(min(u, v), max(u, v))]

    def degree(self, v):
        return len(self.rotations[v])

    @property
    def degrees(self):
        return [len(rot) for rot in self.rotations]

    @property
    def internal_vertices(self):
        return [v for v, rot in enumerate(self.rotations) if len(rot) > 1]

    @property
    def leaves(self):
        return [v for v, rot in enumerate(self.rotations) if len(rot) == 1]

    def successor(self, v, w):
        """Neighbor following w in the rotation at v"""
        rot = self.rotations[v]
        return rot[(rot.index(w) + 1) % len(rot)]

    def predecessor(self, v, w):
        rot = self.rotations[v]
        return rot[(rot.index(w) - 1) % len(rot)]

    def to_graph(self):
        graph = nx.Graph()
        graph.add_nodes_from(range(self.vertex_count))
        graph.add_edges_from(self.edges)
        return graph

    def to_json(self):
        return {"vertices": self.vertex_count, "rotations": [list(rot) for rot in self.rotations]}

    @classmethod
    def from_json(cls, data):
        try:
            tree = cls(int(data["vertices"]), data["rotations"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed plane tree JSON: {exc}") from exc
        problem = validate(tree)
        if problem is not None:
            raise InputError(f"invalid plane tree: {problem}")
        return tree


@dataclass(frozen=True)
class BipartiteColoring:
    """Alternating +1/-1 labels; the target critical value of each vertex"""

    color: Tuple[int, ...]

    def flipped(self):
        return BipartiteColoring(tuple(-c for c in self.color))

    def __getitem__(self, v):
        return self.color[v]


def validate(tree: PlaneTree) -> Optional[str]:
    """Return None when tree is a valid plane tree, else a description of the first violation"""
    n = tree.vertex_count
    if n < 1:
        return "no vertices"
    if len(tree.rotations) != n:
        return f"expected {n} rotation lists, got {len(tree.rotations)}"
    for v, rot in enumerate(tree.rotations):
        for w in rot:
            if not 0 <= w < n:
                return f"vertex {v} lists unknown neighbor {w}"
            if w == v:
                return f"loop at vertex {v}"
        if len(set(rot)) != len(rot):
            return f"rotation at vertex {v} repeats a neighbor"
    for v, rot in enumerate(tree.rotations):
        for w in rot:
            if v not in tree.rotations[w]:
                return f"edge {v}-{w} missing from the rotation at {w}"
    edges = tree.edge_count
    if edges > n - 1:
        return "cycle"
    if edges < n - 1:
        return "disconnected"
    if not nx.is_connected(tree.to_graph()):
        return "cycle"
    return None


def bipartite_coloring(tree: PlaneTree, root: int = 0) -> BipartiteColoring:
    """Color root +1 and alternate with graph distance"""
    color = [0] * tree.vertex_count
    color[root] = 1
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for w in tree.rotations[v]:
            if color[w] == 0:
                color[w] = -color[v]
                queue.append(w)
    return BipartiteColoring(tuple(color))


def dart_walk(tree: PlaneTree, u: int, w: int) -> List[Tuple[int, int]]:
    """Boundary walk starting with the directed edge u -> w; visits all 2n darts"""
    darts = []
    start = (u, w)
    dart = start
    while True:
        darts.append(dart)
        x, y = dart
        dart = (y, tree.successor(y, x))
        if dart == start:
            return darts


def _code_of_walk(darts):
    seen = set()
    letters = []
    for x, y in darts:
        key = (min(x, y), max(x, y))
        if key in seen:
            letters.append("u")
        else:
            seen.add(key)
            letters.append("d")
    return "".join(letters)


def _starts(tree: PlaneTree):
    for u, rot in enumerate(tree.rotations):
        for w in rot:
            yield u, w


def canonical_code(tree: PlaneTree) -> str:
    """Lexicographically least boundary-walk word over all 2n starting corners"""
    if tree.edge_count == 0:
        return ""
    # One walk covers every dart; each start is a cyclic shift of it
    darts = dart_walk(tree, 0, tree.rotations[0][0])
    best = None
    for shift in range(len(darts)):
        code = _code_of_walk(darts[shift:] + darts[:shift])
        if best is None or code < best:
            best = code
    return best


def from_code(code: str) -> PlaneTree:
    """Build the tree whose walk from vertex 0 spells code (a Dyck word over d/u)"""
    rotations = [[]]
    stack = [0]
    for letter in code:
        if letter == "d":
            child = len(rotations)
            rotations[stack[-1]].append(child)
            rotations.append([stack[-1]])
            stack.append(child)
        elif letter == "u":
            if len(stack) < 2:
                raise InputError(f"code {code!r} is not a balanced d/u word")
            stack.pop()
        else:
            raise InputError(f"code {code!r} contains {letter!r}")
    if len(stack) != 1:
        raise InputError(f"code {code!r} is not a balanced d/u word")
    return PlaneTree(len(rotations), rotations)


def mirror(tree: PlaneTree) -> PlaneTree:
    """Reflection: every rotation list reversed"""
    return PlaneTree(tree.vertex_count, [tuple(reversed(rot)) for rot in tree.rotations])


def is_equivalent(a: PlaneTree, b: PlaneTree, mirror_ok: bool = False) -> bool:
    """Orientation-preserving plane equivalence; mirror_ok also accepts reflections"""
    if a.vertex_count != b.vertex_count:
        return False
    code_a = canonical_code(a)
    if code_a == canonical_code(b):
        return True
    return mirror_ok and code_a == canonical_code(mirror(b))


def plane_isomorphism(a: PlaneTree, b: PlaneTree) -> Optional[Dict[int, int]]:
    """Vertex map a -> b carrying rotations onto rotations, or None if inequivalent"""
    if a.vertex_count != b.vertex_count:
        return None
    if a.edge_count == 0:
        return {0: 0}
    code_a = canonical_code(a)
    walk_a = next(dart_walk(a, u, w) for u, w in _starts(a) if _code_of_walk(dart_walk(a, u, w)) == code_a)
    for u, w in _starts(b):
        walk_b = dart_walk(b, u, w)
        if _code_of_walk(walk_b) != code_a:
            continue
        mapping = {}
        for (x, _), (x2, _) in zip(walk_a, walk_b):
            if mapping.setdefault(x, x2) != x2:
                break
        else:
            return mapping
    return None


def _dyck_words(n):
    """All balanced d/u words with n pairs"""
    def extend(prefix, opened, closed):
        if opened == n and closed == n:
            yield prefix
            return
        if opened < n:
            yield from extend(prefix + "d", opened + 1, closed)
        if closed < opened:
            yield from extend(prefix + "u", opened, closed + 1)
    yield from extend("", 0, 0)


def enumerate_plane_trees(n: int) -> List[PlaneTree]:
    """One tree per plane-equivalence class with n edges, ordered by canonical code"""
    if n < 1:
        raise InputError("enumeration needs at least one edge")
    if n > MAX_ENUMERATION_EDGES:
        raise ResourceGuardError(f"exhaustive enumeration is limited to {MAX_ENUMERATION_EDGES} edges, got {n}")
    codes = {canonical_code(from_code(word)) for word in _dyck_words(n)}
    logger.debug("%d plane trees with %d edges", len(codes), n)
    return [from_code(code) for code in sorted(codes)]


def path(n: int) -> PlaneTree:
    """Path with n edges, vertices 0..n in order"""
    rotations = [[v - 1, v + 1] for v in range(n + 1)]
    rotations[0] = [1]
    rotations[n] = [n - 1]
    return PlaneTree(n + 1, rotations)


def star(n: int) -> PlaneTree:
    """Star with center 0 and leaves 1..n in counterclockwise order"""
    return PlaneTree(n + 1, [list(range(1, n + 1))] + [[0]] * n)


def spider(arms: Sequence[int]) -> PlaneTree:
    """Center 0 with legs of the given lengths, legs in counterclockwise order"""
    rotations = [[]]
    for length in arms:
        previous = 0
        for _ in range(length):
            v = len(rotations)
            rotations[previous].append(v)
            rotations.append([previous])
            previous = v
    return PlaneTree(len(rotations), rotations)


def random_plane_tree(n: int, seed=None) -> PlaneTree:
    """Uniform random labeled tree with n edges and shuffled rotations"""
    rng = np.random.default_rng(seed)
    if n == 1:
        graph = nx.Graph([(0, 1)])
    else:
        graph = nx.from_prufer_sequence([int(x) for x in rng.integers(0, n + 1, size=n - 1)])
    rotations = []
    for v in range(n + 1):
        neighbors = sorted(graph.neighbors(v))
        rotations.append([neighbors[i] for i in rng.permutation(len(neighbors))])
    return PlaneTree(n + 1, rotations)


def relabel(tree: PlaneTree, permutation: Sequence[int], shifts: Optional[Sequence[int]] = None) -> PlaneTree:
    """Rename vertex v to permutation[v]; optionally rotate each list's starting point"""
    n = tree.vertex_count
    rotations = [None] * n
    for v, rot in enumerate(tree.rotations):
        rot = [permutation[w] for w in rot]
        if shifts is not None and rot:
            k = shifts[v] % len(rot)
            rot = rot[k:] + rot[:k]
        rotations[permutation[v]] = rot
    return PlaneTree(n, rotations)


def load_plane_tree(path_name):
    try:
        with open(path_name, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read plane tree {path_name}: {exc}") from exc
    return PlaneTree.from_json(data)
