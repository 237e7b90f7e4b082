"""Random walk loop soup: loops, loop classes, configurations and weights.

A configuration is an ordered tuple of rooted oriented loops.  Loops are
stored without the repeated closing vertex: ``Loop((x0, x1, ..., x_{k-1}))``
steps ``x_j -> x_{j+1}`` and finally ``x_{k-1} -> x0``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .lattice import LatticeGraph
from .params import WeightFn, potential_matrix

__all__ = [
    "Loop",
    "LoopClass",
    "SoupConfig",
    "ClassSignature",
    "loop_class",
    "signature",
    "config_class_size",
    "soup_weight",
    "interaction_energy",
    "local_time",
    "local_times",
    "num_loops",
    "first_loop_at",
    "ith_loop",
    "enumerate_loop_classes",
    "enumerate_soups",
    "SoupClass",
]


@dataclass(frozen=True, order=True)
class Loop:
    """Rooted oriented loop ``(l(0), ..., l(k-1))`` with ``l(k) = l(0)`` implicit."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))
        if len(self.vertices) < 2:
            raise ValueError("a loop needs at least two steps")

    @staticmethod
    def from_path(path: Sequence[int]) -> "Loop":
        """Build from the closed vertex sequence ``(l(0), ..., l(k))``."""
        path = tuple(path)
        if len(path) < 3 or path[0] != path[-1]:
            raise ValueError("path must return to its starting vertex and have k >= 2")
        return Loop(path[:-1])

    @property
    def path(self) -> tuple:
        return self.vertices + (self.vertices[0],)

    def __len__(self) -> int:
        return len(self.vertices)

    def steps(self):
        k = len(self.vertices)
        return [(self.vertices[j], self.vertices[(j + 1) % k]) for j in range(k)]

    def is_valid(self, g: LatticeGraph) -> bool:
        return all(0 <= a < g.n_vertices and g.has_edge(a, b) for a, b in self.steps())

    def shift(self, n: int) -> "Loop":
        n %= len(self.vertices)
        return Loop(self.vertices[n:] + self.vertices[:n])

    def reversed(self) -> "Loop":
        v = self.vertices
        return Loop((v[0],) + tuple(reversed(v[1:])))

    def orbit(self) -> set:
        """All cyclic shifts of the loop and of its reversal."""
        out = set()
        for base in (self, self.reversed()):
            for n in range(len(base)):
                out.add(base.shift(n))
        return out

    def visits(self, x: int) -> int:
        return self.vertices.count(x)


def _canonical(vertices: tuple) -> tuple:
    k = len(vertices)
    rev = (vertices[0],) + tuple(reversed(vertices[1:]))
    best = None
    for seq in (vertices, rev):
        for n in range(k):
            cand = seq[n:] + seq[:n]
            if best is None or cand < best:
                best = cand
    return best


def _period(vertices: tuple) -> int:
    k = len(vertices)
    for p in range(1, k + 1):
        if k % p == 0 and vertices[p:] + vertices[:p] == vertices:
            return p
    return k


@dataclass(frozen=True, order=True)
class LoopClass:
    """Equivalence class of loops under re-rooting and reversal.

    ``canonical`` is the lexicographically least member; ``length`` is the
    number of steps, ``multiplicity`` the fold count and ``stretch`` is 1 when
    the reversal is a cyclic shift of the loop and 2 otherwise.
    """

    canonical: Loop
    length: int
    multiplicity: int
    stretch: int

    @property
    def size(self) -> int:
        """Number of rooted oriented loops in the class."""
        num = self.stretch * self.length
        if num % self.multiplicity:
            raise ArithmeticError("class size is not an integer")
        return num // self.multiplicity

    def visits(self, x: int) -> int:
        return self.canonical.visits(x)


def loop_class(loop: Loop | Sequence[int], g: LatticeGraph | None = None) -> LoopClass:
    if not isinstance(loop, Loop):
        loop = Loop(tuple(loop))
    if g is not None and not loop.is_valid(g):
        raise ValueError(f"loop {loop.vertices} is not a nearest-neighbour loop on the graph")
    v = loop.vertices
    can = _canonical(v)
    k = len(v)
    J = k // _period(v)
    rev = (v[0],) + tuple(reversed(v[1:]))
    stretched = any(rev == v[n:] + v[:n] for n in range(k))
    return LoopClass(Loop(can), k, J, 1 if stretched else 2)


@dataclass(frozen=True)
class SoupConfig:
    """Ordered tuple of loops."""

    loops: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "loops", tuple(l if isinstance(l, Loop) else Loop(tuple(l))
                                                for l in self.loops))

    def __len__(self):
        return len(self.loops)

    def is_valid(self, g: LatticeGraph) -> bool:
        return all(l.is_valid(g) for l in self.loops)


@dataclass(frozen=True)
class ClassSignature:
    """Multiset of loop classes with positive counts, sorted by canonical loop."""

    entries: tuple = ()

    def __post_init__(self):
        merged = Counter()
        classes = {}
        for cls, k in self.entries:
            if k <= 0:
                raise ValueError("signature counts must be positive")
            merged[cls.canonical] += k
            classes[cls.canonical] = cls
        object.__setattr__(self, "entries",
                           tuple((classes[c], merged[c]) for c in sorted(merged)))

    @property
    def n_loops(self) -> int:
        return sum(k for _, k in self.entries)

    @property
    def total_steps(self) -> int:
        return sum(c.length * k for c, k in self.entries)

    def local_times(self, n_vertices: int) -> list:
        n = [0] * n_vertices
        for cls, k in self.entries:
            for v in cls.canonical.vertices:
                n[v] += k
        return n

    def representative(self) -> SoupConfig:
        loops = []
        for cls, k in self.entries:
            loops.extend([cls.canonical] * k)
        return SoupConfig(tuple(loops))

    def key(self) -> tuple:
        return tuple((c.canonical.vertices, k) for c, k in self.entries)

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, ClassSignature) and self.key() == other.key()


def signature(omega: SoupConfig) -> ClassSignature:
    counts = Counter(loop_class(l) for l in omega.loops)
    return ClassSignature(tuple(counts.items()))


def config_class_size(sig: ClassSignature) -> int:
    """Number of ordered configurations in the class: multinomial times class sizes."""
    k = sig.n_loops
    out = math.factorial(k)
    for cls, kj in sig.entries:
        out //= math.factorial(kj)
    for cls, kj in sig.entries:
        out *= cls.size**kj
    return out


def local_time(omega: SoupConfig, x: int) -> int:
    return sum(l.visits(x) for l in omega.loops)


def local_times(omega: SoupConfig, n_vertices: int) -> list:
    n = [0] * n_vertices
    for l in omega.loops:
        for v in l.vertices:
            n[v] += 1
    return n


def num_loops(omega: SoupConfig) -> int:
    return len(omega.loops)


def first_loop_at(omega: SoupConfig, x: int) -> Loop | None:
    for l in omega.loops:
        if x in l.vertices:
            return l
    return None


def ith_loop(omega: SoupConfig, i: int) -> Loop | None:
    """The ``i``-th loop, counting from 1."""
    if 1 <= i <= len(omega.loops):
        return omega.loops[i - 1]
    return None


def interaction_energy(omega: SoupConfig, vmat: np.ndarray | None) -> float:
    """Sum over ordered loop pairs and visit times of ``v(l_i(a), l_j(b))``."""
    if vmat is None:
        return 0.0
    total = 0.0
    for li in omega.loops:
        for lj in omega.loops:
            for a in li.vertices:
                for b in lj.vertices:
                    total += vmat[a, b]
    return total


def _is_exact(*xs) -> bool:
    return all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for x in xs)


def soup_weight(omega: SoupConfig, v, U: WeightFn, N, lam, g: LatticeGraph | None = None):
    """Weight of an ordered configuration.

    ``v`` is ``None`` (no interaction), a dense matrix, or a potential that can
    be turned into one on ``g``.  With ``v is None`` and rational ``N``,
    ``lam`` and weights, the result is an exact ``Fraction``.
    """
    n_vertices = g.n_vertices if g is not None else 1 + max(
        (max(l.vertices) for l in omega.loops), default=-1)
    vmat = potential_matrix(v, g) if (g is not None and v is not None) else (
        None if v is None else np.asarray(v, dtype=float))
    n = len(omega.loops)
    exact = vmat is None and _is_exact(N, lam)
    one = Fraction(1) if exact else 1.0
    w = one / math.factorial(n)
    half_N = Fraction(N) / 2 if exact else N / 2.0
    for l in omega.loops:
        w = w * (Fraction(lam) if exact else lam) ** len(l) / len(l) * half_N
    for x, nx in enumerate(local_times(omega, n_vertices)):
        u = U(nx)
        if u == 0:
            return 0 * one
        w = w * u
    if vmat is not None:
        w = w * math.exp(-interaction_energy(omega, vmat))
    return w


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def enumerate_loop_classes(g: LatticeGraph, max_length: int, max_visits: int | None = None,
                           even_only: bool = True) -> list:
    """All loop classes of length ``<= max_length`` whose per-vertex visits are capped."""
    seen = {}
    cap = max_visits if max_visits is not None else max_length
    adj = g.adjacency

    def dfs(path, counts):
        k = len(path)
        if k >= 2 and path[0] in adj[path[-1]] and (k % 2 == 0 or not even_only):
            can = _canonical(tuple(path))
            if can not in seen:
                seen[can] = loop_class(Loop(can))
        if k == max_length:
            return
        for y in adj[path[-1]]:
            if counts.get(y, 0) >= cap:
                continue
            # roots are minimal in the canonical form, so later vertices must not undercut
            if y < path[0]:
                continue
            counts[y] = counts.get(y, 0) + 1
            path.append(y)
            dfs(path, counts)
            path.pop()
            counts[y] -= 1

    for r in range(g.n_vertices):
        dfs([r], {r: 1})
    return sorted(seen.values())


@dataclass(frozen=True)
class SoupClass:
    signature: ClassSignature
    size: int
    weight: object  # |rho| * nu(representative)

    @property
    def representative(self) -> SoupConfig:
        return self.signature.representative()


def enumerate_soups(g: LatticeGraph, U: WeightFn, N, lam, v=None, max_total_steps: int | None = None,
                    max_classes: int = 2_000_000) -> Iterator[SoupClass]:
    """One representative per equivalence class with the class weight.

    Classes are multisets of loop classes whose local times stay inside the
    support of ``U`` and whose total number of steps is at most
    ``max_total_steps``.  ``U`` must have finite range unless the step cap is
    given.
    """
    if not U.is_finite_range and max_total_steps is None:
        raise ValueError("infinite-range weight needs max_total_steps")
    R = U.range if U.is_finite_range else max_total_steps
    if R < 0:
        return
    budget = R * g.n_vertices if max_total_steps is None else min(max_total_steps, R * g.n_vertices)
    vmat = potential_matrix(v, g) if v is not None else None
    classes = enumerate_loop_classes(g, budget, R)
    visits = [[c.canonical.visits(x) for x in range(g.n_vertices)] for c in classes]
    produced = 0
    chosen = []

    def rec(j, steps_left, n):
        nonlocal produced
        if j == len(classes):
            if any(U(nx) == 0 for nx in n):
                return
            entries = tuple((classes[i], k) for i, k in chosen)
            sig = ClassSignature(entries)
            produced += 1
            if produced > max_classes:
                raise RuntimeError(f"class count exceeded cap {max_classes}")
            rep = sig.representative()
            size = config_class_size(sig)
            w = soup_weight(rep, vmat, U, N, lam, g)
            yield SoupClass(sig, size, size * w)
            return
        yield from rec(j + 1, steps_left, n)
        c = classes[j]
        k = 0
        n = list(n)
        while True:
            k += 1
            steps_left -= c.length
            if steps_left < 0:
                break
            for x in range(g.n_vertices):
                n[x] += visits[j][x]
            if any(n[x] > R for x in range(g.n_vertices)):
                break
            chosen.append((j, k))
            yield from rec(j + 1, steps_left, n)
            chosen.pop()

    yield from rec(0, budget, [0] * g.n_vertices)


def soup_partition_function(g: LatticeGraph, U: WeightFn, N, lam, v=None,
                            max_total_steps: int | None = None):
    total = 0
    for sc in enumerate_soups(g, U, N, lam, v, max_total_steps):
        total = total + sc.weight
    return total
