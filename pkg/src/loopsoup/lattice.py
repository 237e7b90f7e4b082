"""Finite graph geometry: tori, extended tori, reflections and the dual torus.

Vertices are flat integer indices.  On a torus of side ``L`` in dimension
``d`` a vertex index is the C-order ravel of the per-axis residues
``x_i mod L``, and coordinates are reported in the window ``(-L/2, L/2]``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LatticeGraph",
    "ExtendedTorus",
    "ReflectionPlane",
    "DualTorus",
    "build_graph",
    "build_torus",
    "two_vertex_graph",
    "extend_torus",
    "reflect",
    "reflection_planes",
    "torus_distance",
    "odd_sublattice",
    "dual_torus",
]


@dataclass(frozen=True)
class LatticeGraph:
    """Simple undirected finite graph.

    Attributes
    ----------
    n_vertices : int
        Number of vertices, labelled ``0 .. n_vertices - 1``.
    edges : tuple of (int, int)
        Edges as sorted pairs ``(a, b)`` with ``a < b``, sorted lexicographically.
    kind : str
        ``"torus"`` or ``"arbitrary"``.
    L, d : int or None
        Side length and dimension for tori.
    edge_axes : tuple of int or None
        For tori, the axis (0-based) each edge points along.
    """

    n_vertices: int
    edges: tuple
    kind: str = "arbitrary"
    L: int | None = None
    d: int | None = None
    edge_axes: tuple | None = None
    adjacency: tuple = field(init=False, repr=False, compare=False)
    incident: tuple = field(init=False, repr=False, compare=False)
    edge_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj = [[] for _ in range(self.n_vertices)]
        inc = [[] for _ in range(self.n_vertices)]
        index = {}
        for k, (a, b) in enumerate(self.edges):
            if not (0 <= a < b < self.n_vertices):
                raise ValueError(f"edge {(a, b)} is not a sorted pair of distinct vertices")
            if (a, b) in index:
                raise ValueError(f"duplicate edge {(a, b)}")
            index[(a, b)] = k
            adj[a].append(b)
            adj[b].append(a)
            inc[a].append(k)
            inc[b].append(k)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(n)) for n in adj))
        object.__setattr__(self, "incident", tuple(tuple(i) for i in inc))
        object.__setattr__(self, "edge_index", index)

    @property
    def vertices(self) -> range:
        return range(self.n_vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    def has_edge(self, x: int, y: int) -> bool:
        return (min(x, y), max(x, y)) in self.edge_index

    def edge_id(self, x: int, y: int) -> int:
        """Index of the edge ``{x, y}``; raises ``KeyError`` if absent."""
        return self.edge_index[(min(x, y), max(x, y))]

    def other_end(self, e: int, x: int) -> int:
        a, b = self.edges[e]
        return b if x == a else a

    def is_bipartite(self) -> bool:
        colour = [-1] * self.n_vertices
        for s in range(self.n_vertices):
            if colour[s] >= 0:
                continue
            colour[s] = 0
            stack = [s]
            while stack:
                x = stack.pop()
                for y in self.adjacency[x]:
                    if colour[y] < 0:
                        colour[y] = 1 - colour[x]
                        stack.append(y)
                    elif colour[y] == colour[x]:
                        return False
        return True

    # torus helpers -------------------------------------------------------
    def _require_torus(self):
        if self.kind != "torus":
            raise ValueError("operation needs a torus graph")

    @property
    def shape(self) -> tuple:
        self._require_torus()
        return (self.L,) * self.d

    def coord(self, x: int) -> tuple:
        """Coordinates of vertex ``x`` in ``(-L/2, L/2]^d``."""
        self._require_torus()
        digits = np.unravel_index(x, self.shape)
        L = self.L
        return tuple(int(c) if c <= L // 2 else int(c) - L for c in digits)

    def index(self, coords: Sequence[int]) -> int:
        """Vertex index of integer coordinates (taken modulo ``L``)."""
        self._require_torus()
        if len(coords) != self.d:
            raise ValueError(f"expected {self.d} coordinates, got {len(coords)}")
        return int(np.ravel_multi_index(tuple(int(c) % self.L for c in coords), self.shape))

    def translate(self, x: int, shift: Sequence[int]) -> int:
        c = self.coord(x)
        return self.index([a + b for a, b in zip(c, shift)])

    def unit(self, axis: int, n: int = 1) -> int:
        """Vertex ``n * e_axis``."""
        c = [0] * self.d
        c[axis] = n
        return self.index(c)

    @property
    def origin(self) -> int:
        return 0

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "L": self.L,
            "d": self.d,
            "vertices": list(range(self.n_vertices)),
            "edges": [list(e) for e in self.edges],
        }

    @staticmethod
    def from_descriptor(desc: dict) -> "LatticeGraph":
        if desc.get("kind") == "torus":
            return build_torus(int(desc["L"]), int(desc["d"]))
        n = len(desc["vertices"])
        return build_graph(n, [tuple(e) for e in desc["edges"]])


def build_graph(n_vertices: int, edges: Iterable[tuple]) -> LatticeGraph:
    """Simple graph from an edge list; duplicate and reversed pairs are merged."""
    canon = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            raise ValueError(f"self-edge at vertex {a}")
        canon.add((min(a, b), max(a, b)))
    return LatticeGraph(n_vertices, tuple(sorted(canon)))


def build_torus(L: int, d: int) -> LatticeGraph:
    """Nearest-neighbour torus of even side ``L`` in dimension ``d``.

    For ``L = 2`` the two wrap-around edges between a vertex and its neighbour
    coincide and are collapsed to one, so vertices have degree ``d``.
    """
    if not isinstance(L, (int, np.integer)) or L <= 1:
        raise ValueError(f"side length must be an integer >= 2, got {L!r}")
    if L % 2:
        raise ValueError(f"side length must be even, got {L}")
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    L, d = int(L), int(d)
    shape = (L,) * d
    edges = {}
    for x in range(L**d):
        digits = np.unravel_index(x, shape)
        for axis in range(d):
            nb = list(digits)
            nb[axis] = (nb[axis] + 1) % L
            y = int(np.ravel_multi_index(tuple(nb), shape))
            edges.setdefault((min(x, y), max(x, y)), axis)
    ordered = sorted(edges)
    return LatticeGraph(L**d, tuple(ordered), kind="torus", L=L, d=d,
                        edge_axes=tuple(edges[e] for e in ordered))


def two_vertex_graph() -> LatticeGraph:
    """Single edge between two vertices (the ``L = 2``, ``d = 1`` torus)."""
    return build_torus(2, 1)


@dataclass(frozen=True)
class ExtendedTorus:
    """Torus with a virtual copy of every vertex joined by a vertical edge.

    Original vertices keep their indices ``0 .. n-1``; the virtual copy of
    ``x`` is ``x + n``.  ``graph`` carries all ``2n`` vertices and both the
    torus edges and the ``n`` vertical edges ``(x, x + n)``.
    """

    base: LatticeGraph
    graph: LatticeGraph

    @property
    def n(self) -> int:
        return self.base.n_vertices

    @property
    def original_vertices(self) -> range:
        return range(self.n)

    @property
    def virtual_vertices(self) -> range:
        return range(self.n, 2 * self.n)

    @property
    def vertical_edges(self) -> tuple:
        return tuple((x, x + self.n) for x in range(self.n))

    def up(self, x: int) -> int:
        """Virtual partner of an original vertex."""
        if not 0 <= x < self.n:
            raise ValueError(f"{x} is not an original vertex")
        return x + self.n

    def project(self, x: int) -> int:
        return x % self.n

    def is_virtual(self, x: int) -> bool:
        return x >= self.n

    def coord(self, x: int) -> tuple:
        """Coordinates with the extra layer coordinate 1 (original) or 2 (virtual)."""
        return self.base.coord(x % self.n) + (1 if x < self.n else 2,)

    def is_vertical_edge(self, e: int) -> bool:
        a, b = self.graph.edges[e]
        return b - a == self.n and a < self.n <= b


def extend_torus(g: LatticeGraph) -> ExtendedTorus:
    if g.kind != "torus":
        raise ValueError("extend_torus needs a torus graph")
    n = g.n_vertices
    edges = list(g.edges) + [(x, x + n) for x in range(n)]
    ext = LatticeGraph(2 * n, tuple(sorted(edges)))
    return ExtendedTorus(base=g, graph=ext)


@dataclass(frozen=True)
class ReflectionPlane:
    """Plane orthogonal to ``e_axis`` through the midpoints of edges.

    ``axis`` is 0-based and ``offset`` is the half-integer ``u``; the plane
    passes through the edge ``{x, x + e_axis}`` with ``x_axis = u - 1/2``.
    """

    axis: int
    offset: Fraction

    def __post_init__(self):
        u = Fraction(self.offset)
        if (2 * u).denominator != 1 or (2 * u).numerator % 2 == 0:
            raise ValueError(f"offset must be a half-integer, got {self.offset}")
        object.__setattr__(self, "offset", u)

    @property
    def twice_offset(self) -> int:
        return int(2 * self.offset)

    def validate(self, g: LatticeGraph) -> None:
        g._require_torus()
        if not 0 <= self.axis < g.d:
            raise ValueError(f"axis {self.axis} out of range for d={g.d}")
        k = self.offset - Fraction(1, 2)
        if not (-Fraction(g.L, 2) < k <= Fraction(g.L, 2)):
            raise ValueError(f"offset {self.offset} outside the admissible window for L={g.L}")

    def reflect(self, g: LatticeGraph, x: int) -> int:
        c = list(g.coord(x))
        c[self.axis] = self.twice_offset - c[self.axis]
        return g.index(c)

    def in_plus(self, g: LatticeGraph, x: int) -> bool:
        """Whether ``x`` lies on the positive side of the plane."""
        c = g.coord(x)[self.axis]
        r = (2 * c - self.twice_offset) % (2 * g.L)
        return 0 < r < g.L

    def plus_half(self, g: LatticeGraph) -> frozenset:
        return frozenset(x for x in g.vertices if self.in_plus(g, x))

    def minus_half(self, g: LatticeGraph) -> frozenset:
        return frozenset(x for x in g.vertices if not self.in_plus(g, x))

    def crossing_edges(self, g: LatticeGraph) -> tuple:
        """Indices of edges with one endpoint on each side."""
        return tuple(k for k, (a, b) in enumerate(g.edges)
                     if self.in_plus(g, a) != self.in_plus(g, b))

    # extended-torus versions: the layer coordinate is never reflected
    def reflect_ext(self, ext: ExtendedTorus, x: int) -> int:
        layer = x // ext.n
        return self.reflect(ext.base, x % ext.n) + layer * ext.n

    def in_plus_ext(self, ext: ExtendedTorus, x: int) -> bool:
        return self.in_plus(ext.base, x % ext.n)

    def edge_map(self, g: LatticeGraph, reflect_vertex) -> list:
        """Permutation of edge indices induced by a vertex reflection."""
        return [g.edge_id(reflect_vertex(a), reflect_vertex(b)) for a, b in g.edges]


def reflect(plane: ReflectionPlane, g: LatticeGraph, x: int) -> int:
    plane.validate(g)
    return plane.reflect(g, x)


def reflection_planes(g: LatticeGraph) -> list:
    """All distinct edge-planes of a torus, one per axis and offset."""
    g._require_torus()
    planes = []
    for axis in range(g.d):
        for k in range(-g.L // 2 + 1, g.L // 2 + 1):
            planes.append(ReflectionPlane(axis, Fraction(2 * k + 1, 2)))
    return planes


def torus_distance(g: LatticeGraph, x: int, y: int) -> int:
    g._require_torus()
    L = g.L
    total = 0
    for a, b in zip(g.coord(x), g.coord(y)):
        r = (a - b) % L
        total += min(r, L - r)
    return total


def odd_sublattice(g: LatticeGraph) -> frozenset:
    """Vertices all of whose coordinates are odd."""
    g._require_torus()
    return frozenset(x for x in g.vertices if all(c % 2 == 1 for c in g.coord(x)))


@dataclass(frozen=True)
class DualTorus:
    """Momenta ``k = 2 pi n / L`` with ``n`` in ``(-L/2, L/2]^d``.

    ``momenta[j]`` corresponds to the integer vector ``n`` whose residues
    ravel to ``j``, matching the vertex ordering of the torus.
    """

    L: int
    d: int
    momenta: np.ndarray

    @property
    def origin(self) -> int:
        return 0

    def epsilon(self) -> np.ndarray:
        """``2 * sum_j (1 - cos k_j)`` for every momentum."""
        return 2.0 * np.sum(1.0 - np.cos(self.momenta), axis=1)


def dual_torus(g: LatticeGraph) -> DualTorus:
    g._require_torus()
    n = np.array([g.coord(x) for x in g.vertices], dtype=float).reshape(g.n_vertices, g.d)
    return DualTorus(g.L, g.d, 2.0 * math.pi * n / g.L)


def all_coords(g: LatticeGraph) -> np.ndarray:
    g._require_torus()
    return np.array([g.coord(x) for x in g.vertices], dtype=int).reshape(g.n_vertices, g.d)


def hyperoctahedral_images(g: LatticeGraph, x: int) -> set:
    """Images of ``x`` under coordinate permutations and sign flips."""
    c = g.coord(x)
    out = set()
    for perm in itertools.permutations(range(g.d)):
        for signs in itertools.product((1, -1), repeat=g.d):
            out.add(g.index([s * c[p] for s, p in zip(signs, perm)]))
    return out
