"""
Dyadic grid approximation of a planar continuum by a tree with degrees 1 or 4
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import FrozenSet, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from errors import GridError, InputError
from geom_tree import GeomEdge, GeomTree, as_points, to_xy

logger = logging.getLogger(__name__)

# Neighbor order for the spanning tree and the stub preference: E, N, W, S
DIRECTIONS = [(1, 0), (0, 1), (-1, 0), (0, -1)]
DIRECTION_NAMES = ["E", "N", "W", "S"]

# Internal lattice unit is a quarter of the cell size
QUARTERS = 4


@dataclass(frozen=True)
class DyadicCover:
    """Closed cells [i, i+1] x [j, j+1] (in units of 2^-depth) that meet K"""

    depth: int
    squares: FrozenSet[Tuple[int, int]]

    @property
    def cell_size(self):
        return 2.0 ** -self.depth

    def corners(self):
        corners = set()
        for i, j in self.squares:
            corners.update({(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)})
        return corners

    def grid_graph(self):
        """Corner/edge graph of the cover, cell sides as edges"""
        graph = nx.Graph()
        for i, j in self.squares:
            graph.add_edge((i, j), (i + 1, j))
            graph.add_edge((i, j + 1), (i + 1, j + 1))
            graph.add_edge((i, j), (i, j + 1))
            graph.add_edge((i + 1, j), (i + 1, j + 1))
        return graph


class GridTree(GeomTree):
    """Tree on grid corners and stub tips; vertices sit on the 2^(-depth-2) lattice"""

    def __init__(self, vertices, edges, depth):
        super().__init__(vertices, edges)
        self.depth = int(depth)

    @property
    def unit(self):
        """Grid edge length 2^-depth"""
        return 2.0 ** -self.depth

    @property
    def lattice(self):
        """Integer vertex coordinates in quarter units"""
        scale = 2.0 ** (self.depth + 2)
        return np.column_stack([np.rint(self.vertices.real * scale), np.rint(self.vertices.imag * scale)]).astype(int)

    def to_json(self):
        data = super().to_json()
        data["depth"] = self.depth
        return data

    @classmethod
    def from_json(cls, data):
        plain = GeomTree.from_json({key: value for key, value in data.items() if key != "depth"})
        try:
            depth = int(data["depth"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed grid tree JSON: {exc}") from exc
        return cls(plain.vertices, plain.edges, depth)


def _cells_of(value):
    """Indices of the closed unit intervals containing value"""
    base = int(np.floor(value))
    if value == base:
        return (base - 1, base)
    return (base,)


def dyadic_cover(K, depth: int) -> DyadicCover:
    """All closed dyadic cells of size 2^-depth containing at least one sample of K"""
    points = as_points(K)
    if len(points) == 0:
        raise InputError("K has no points")
    scale = 2.0 ** depth  # exact for binary floating point
    squares = set()
    for z in points:
        for i in _cells_of(z.real * scale):
            for j in _cells_of(z.imag * scale):
                squares.add((i, j))
    _warn_if_sparse(points, 2.0 ** -depth)
    logger.debug("dyadic cover at depth %d: %d cells", depth, len(squares))
    return DyadicCover(depth, frozenset(squares))


def _warn_if_sparse(points, spacing):
    """Samples that fall apart at the cell size cannot represent a continuum"""
    if len(points) < 2:
        return
    pairs = cKDTree(to_xy(points)).query_pairs(r=spacing)
    graph = nx.Graph()
    graph.add_nodes_from(range(len(points)))
    graph.add_edges_from(pairs)
    parts = nx.number_connected_components(graph)
    if parts > 1:
        logger.warning("K samples split into %d groups at spacing %.3g; refine the sampling", parts, spacing)


def spanning_tree(cover: DyadicCover) -> nx.Graph:
    """Breadth-first spanning tree of the cover's grid graph from the least corner"""
    grid = cover.grid_graph()
    start = min(grid.nodes)
    tree = nx.Graph()
    tree.add_node(start)
    queue = deque([start])
    while queue:
        corner = queue.popleft()
        for dx, dy in DIRECTIONS:
            neighbor = (corner[0] + dx, corner[1] + dy)
            if grid.has_edge(corner, neighbor) and neighbor not in tree:
                tree.add_edge(corner, neighbor)
                queue.append(neighbor)
    if tree.number_of_nodes() != grid.number_of_nodes():
        raise GridError(f"dyadic cover is disconnected: reached {tree.number_of_nodes()} "
                        f"of {grid.number_of_nodes()} corners; K is not connected or undersampled")
    return tree


def fix_degrees(tree: nx.Graph, depth: int) -> GridTree:
    """Add quarter-length stubs until every vertex of degree 2 or 3 has degree 4"""
    corners = sorted(tree.nodes)
    index = {corner: k for k, corner in enumerate(corners)}
    lattice = [(QUARTERS * i, QUARTERS * j) for i, j in corners]
    occupied = set(lattice)
    edges = []
    for u, v in sorted(tuple(sorted(edge)) for edge in tree.edges):
        edges.append((index[u], index[v], "grid"))

    for corner in corners:
        degree = tree.degree[corner]
        if degree not in (2, 3):
            continue
        for dx, dy in DIRECTIONS:
            if degree == 4:
                break
            if tree.has_edge(corner, (corner[0] + dx, corner[1] + dy)):
                continue
            tip = (QUARTERS * corner[0] + dx, QUARTERS * corner[1] + dy)
            assert tip not in occupied, f"stub collision at lattice point {tip}"
            occupied.add(tip)
            lattice.append(tip)
            edges.append((index[corner], len(lattice) - 1, "stub"))
            degree += 1

    unit = 2.0 ** (-depth - 2)
    positions = np.array([complex(x * unit, y * unit) for x, y in lattice])
    geom_edges = [GeomEdge(u, v, [positions[u], positions[v]], tag) for u, v, tag in edges]
    result = GridTree(positions, geom_edges, depth)
    logger.info("grid tree at depth %d: %d vertices, %d edges (%d stubs)", depth, result.vertex_count,
                result.edge_count, sum(1 for e in geom_edges if e.tag == "stub"))
    return result


def approximate(K, depth: int) -> GridTree:
    """Grid tree within 2^(-depth+1) of K in the Hausdorff metric"""
    if depth < 0:
        raise InputError("depth must be nonnegative")
    return fix_degrees(spanning_tree(dyadic_cover(K, depth)), depth)
