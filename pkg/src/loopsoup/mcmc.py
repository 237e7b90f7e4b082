"""Metropolis-Hastings sampler on closed path configurations.

Moves
-----
``loop``
    Insert or delete an elementary loop: two same-colour links on one edge
    paired to each other at both ends, or one link on every edge of a simple
    cycle of the graph, paired consecutively.  New links go to uniformly
    chosen positions in the ordered link list of their edge.
``repair``
    Pick two pairings at a vertex and swap partners (same colour only).
``recolour``
    Pick a uniform link and give its whole cycle a uniform colour.

Pair insertion and re-pairing alone do not connect the state space when the
local time is capped: a loop around a 4-cycle with ``R = 1`` would need a
visit count of 2 on the way.  The simple-cycle loops close that gap.

Every move is described by an *action*.  ``actions`` enumerates all actions
with their proposal probabilities (used to build the exact transition
matrix) and ``draw`` samples one with the same law, so the sampler and the
exactness test share the acceptance code.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .lattice import LatticeGraph
from .params import WeightFn, potential_matrix
from .rpm import PathConfig, closed_configs, rpm_weight

__all__ = [
    "ChainState",
    "MoveSet",
    "Sampler",
    "simple_cycles",
    "plaquette_cycles",
    "elementary_loops",
    "transition_matrix",
    "exactness_test",
    "ExactnessReport",
    "integrated_autocorrelation",
    "batch_means",
    "SeriesStats",
    "series_stats",
    "run_chain",
    "McmcResult",
    "standard_observables",
]


# ---------------------------------------------------------------------------
# loop lists
# ---------------------------------------------------------------------------


def simple_cycles(g: LatticeGraph, max_len: int | None = None) -> list:
    """All simple cycles (length >= 3) as vertex tuples, each listed once."""
    out = set()
    adj = [sorted(a) for a in g.adjacency]
    for s in g.vertices:
        stack = [(s, [s])]
        while stack:
            x, path = stack.pop()
            for y in adj[x]:
                if y == s and len(path) >= 3:
                    out.add(_canonical_cycle(path))
                elif y > s and y not in path and (max_len is None or len(path) < max_len):
                    stack.append((y, path + [y]))
    return sorted(out)


def _canonical_cycle(path: Sequence[int]) -> tuple:
    k = len(path)
    best = None
    for seq in (list(path), list(reversed(path))):
        for r in range(k):
            cand = tuple(seq[r:] + seq[:r])
            if best is None or cand < best:
                best = cand
    return best


def plaquette_cycles(g: LatticeGraph) -> list:
    """Plaquettes and straight wrapping lines of a torus."""
    out = set()
    L, d = g.L, g.d
    for x in g.vertices:
        c = np.array(g.coord(x))
        for i in range(d):
            for j in range(i + 1, d):
                ei = np.eye(d, dtype=int)[i]
                ej = np.eye(d, dtype=int)[j]
                cyc = [g.index(c), g.index(c + ei), g.index(c + ei + ej), g.index(c + ej)]
                if len(set(cyc)) == 4:
                    out.add(_canonical_cycle(cyc))
        if L >= 3:
            for i in range(d):
                ei = np.eye(d, dtype=int)[i]
                out.add(_canonical_cycle([g.index(c + t * ei) for t in range(L)]))
    return sorted(out)


def elementary_loops(g: LatticeGraph, cycles: str | Sequence = "auto") -> list:
    """Backtracks on every edge followed by the chosen simple cycles.

    Entries are ``("edge", e)`` or ``("cycle", vertices, edges)``.
    """
    if cycles == "auto":
        cycles = "all" if g.n_vertices <= 12 else "plaquettes"
    if cycles == "all":
        cyc = simple_cycles(g)
    elif cycles == "plaquettes":
        cyc = plaquette_cycles(g) if g.kind == "torus" else simple_cycles(g, 4)
    elif cycles == "none":
        cyc = []
    else:
        cyc = [tuple(c) for c in cycles]
    out = [("edge", e) for e in range(g.n_edges)]
    for c in cyc:
        k = len(c)
        edges = tuple(g.edge_id(c[i], c[(i + 1) % k]) for i in range(k))
        out.append(("cycle", tuple(c), edges))
    return out


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


class ChainState:
    """Mutable closed configuration with cached local times.

    Links are integer ids; ``edge_links[e]`` is the ordered list whose order
    gives the link labels.  ``partner[x][l]`` is the link paired with ``l`` at
    ``x``.
    """

    def __init__(self, g: LatticeGraph, N: int):
        self.g = g
        self.N = N
        self.edge_links = [[] for _ in range(g.n_edges)]
        self.link_edge = {}
        self.link_col = {}
        self.partner = [dict() for _ in range(g.n_vertices)]
        self.n = np.zeros(g.n_vertices, dtype=np.int64)
        self.next_id = 0

    # conversion -----------------------------------------------------------

    @classmethod
    def from_config(cls, g: LatticeGraph, N: int, w: PathConfig) -> "ChainState":
        s = cls(g, N)
        ids = {}
        for e, cols in enumerate(w.colours):
            for p, c in enumerate(cols):
                lid = s._new_link(e, c)
                s.edge_links[e].append(lid)
                ids[(e, p)] = lid
        for x, prs in enumerate(w.pairings):
            for a, b in prs:
                s.partner[x][ids[a]] = ids[b]
                s.partner[x][ids[b]] = ids[a]
            s.n[x] = len(prs)
        if any(w.ghosts):
            raise ValueError("the sampler runs on closed configurations without ghosts")
        return s

    def to_config(self) -> PathConfig:
        pos = {}
        for e, ls in enumerate(self.edge_links):
            for p, l in enumerate(ls):
                pos[l] = (e, p)
        colours = tuple(tuple(self.link_col[l] for l in ls) for ls in self.edge_links)
        pairings = []
        for x in range(self.g.n_vertices):
            prs = set()
            for a, b in self.partner[x].items():
                pa, pb = pos[a], pos[b]
                prs.add((pa, pb) if pa < pb else (pb, pa))
            pairings.append(tuple(sorted(prs)))
        return PathConfig(colours, tuple(pairings), (0,) * self.g.n_vertices)

    def _new_link(self, e: int, c: int) -> int:
        lid = self.next_id
        self.next_id += 1
        self.link_edge[lid] = e
        self.link_col[lid] = c
        return lid

    # queries --------------------------------------------------------------

    @property
    def n_links(self) -> int:
        return len(self.link_edge)

    def edge_colour_counts(self, e: int) -> np.ndarray:
        out = np.zeros(self.N, dtype=np.int64)
        for l in self.edge_links[e]:
            out[self.link_col[l] - 1] += 1
        return out

    def pairs_at(self, x: int) -> list:
        seen = set()
        out = []
        for a, b in self.partner[x].items():
            if a not in seen:
                seen.add(a)
                seen.add(b)
                out.append((a, b))
        return out

    def other_end(self, l: int, x: int) -> int:
        a, b = self.g.edges[self.link_edge[l]]
        return b if a == x else a

    def cycle_of(self, l0: int) -> tuple:
        """Links and visited vertices (one entry per pairing) of the cycle through ``l0``."""
        a, _ = self.g.edges[self.link_edge[l0]]
        links, verts = [], []
        cur, x = l0, self.other_end(l0, a)
        while True:
            links.append(cur)
            verts.append(x)
            nxt = self.partner[x][cur]
            if nxt == l0:
                return links, verts
            x = self.other_end(nxt, x)
            cur = nxt

    def cycles(self) -> list:
        """``(colour, links, visited vertices)`` for every cycle."""
        seen = set()
        out = []
        for l0 in self.link_edge:
            if l0 in seen:
                continue
            links, verts = self.cycle_of(l0)
            seen.update(links)
            out.append((self.link_col[l0], links, verts))
        return out

    def occurrences(self, loop) -> list:
        """Link tuples forming an isolated copy of an elementary loop."""
        g = self.g
        if loop[0] == "edge":
            e = loop[1]
            a, b = g.edges[e]
            out = []
            for l in self.edge_links[e]:
                p = self.partner[a][l]
                if self.link_edge[p] == e and self.partner[b][l] == p and l < p:
                    out.append((l, p))
            return out
        _, verts, edges = loop
        k = len(verts)
        out = []
        for l0 in self.edge_links[edges[0]]:
            # orient l0 from verts[0] to verts[1]
            cur = l0
            ok = True
            for i in range(1, k + 1):
                nxt = self.partner[verts[i % k]][cur]
                if i == k:
                    ok = nxt == l0
                    break
                if self.link_edge[nxt] != edges[i]:
                    ok = False
                    break
                cur = nxt
            if ok:
                out.append(tuple(self._walk(l0, verts, edges)))
        return out

    def _walk(self, l0, verts, edges):
        k = len(verts)
        cur = l0
        out = [l0]
        for i in range(1, k):
            cur = self.partner[verts[i]][cur]
            out.append(cur)
        return out

    def check(self) -> None:
        """Recompute caches and validate pairings; raises on inconsistency."""
        for x in range(self.g.n_vertices):
            p = self.partner[x]
            ends = [l for e in self.g.incident[x] for l in self.edge_links[e]]
            if set(ends) != set(p):
                raise AssertionError(f"vertex {x}: unpaired or foreign link")
            for a, b in p.items():
                if p[b] != a or a == b or self.link_col[a] != self.link_col[b]:
                    raise AssertionError(f"vertex {x}: bad pairing {a}, {b}")
            if self.n[x] != len(p) // 2:
                raise AssertionError(f"vertex {x}: local time cache {self.n[x]} != {len(p) // 2}")

    # mutations ------------------------------------------------------------

    def insert_loop(self, loop, colour: int, slots) -> tuple:
        g = self.g
        if loop[0] == "edge":
            e = loop[1]
            a, b = g.edges[e]
            i, j = slots
            u = self._new_link(e, colour)
            v = self._new_link(e, colour)
            self.edge_links[e].insert(i, u)
            self.edge_links[e].insert(j, v)
            for x in (a, b):
                self.partner[x][u] = v
                self.partner[x][v] = u
                self.n[x] += 1
            return (u, v)
        _, verts, edges = loop
        k = len(verts)
        new = []
        for e, s in zip(edges, slots):
            l = self._new_link(e, colour)
            self.edge_links[e].insert(s, l)
            new.append(l)
        for i in range(k):
            x = verts[(i + 1) % k]
            l1, l2 = new[i], new[(i + 1) % k]
            self.partner[x][l1] = l2
            self.partner[x][l2] = l1
            self.n[x] += 1
        return tuple(new)

    def delete_links(self, links) -> None:
        for l in links:
            e = self.link_edge[l]
            for x in self.g.edges[e]:
                if l in self.partner[x]:
                    p = self.partner[x].pop(l)
                    self.partner[x].pop(p, None)
                    self.n[x] -= 1
            self.edge_links[e].remove(l)
            del self.link_edge[l]
            del self.link_col[l]

    def repair(self, x: int, pa: tuple, pb: tuple, option: int) -> None:
        a, b = pa
        c, d = pb
        new = ((a, c), (b, d)) if option == 0 else ((a, d), (b, c))
        for u, v in new:
            self.partner[x][u] = v
            self.partner[x][v] = u

    def recolour(self, links, colour: int) -> None:
        for l in links:
            self.link_col[l] = colour

    # serialisation ----------------------------------------------------------

    def serialize(self) -> dict:
        return self.to_config().serialize()


# ---------------------------------------------------------------------------
# moves
# ---------------------------------------------------------------------------


@dataclass
class MoveSet:
    """Move-kind probabilities and the elementary loop list."""

    p_loop: float = 0.4
    p_repair: float = 0.4
    p_recolour: float = 0.2
    cycles: str | Sequence = "auto"

    def __post_init__(self):
        tot = self.p_loop + self.p_repair + self.p_recolour
        if tot <= 0 or min(self.p_loop, self.p_repair, self.p_recolour) < 0:
            raise ValueError("move probabilities must be nonnegative with a positive sum")
        self.p_loop /= tot
        self.p_repair /= tot
        self.p_recolour /= tot


class Sampler:
    """Target ``mu / Z`` on closed configurations of ``g``."""

    def __init__(self, g: LatticeGraph, N: int, U: WeightFn, lam: float, v=None, moves: MoveSet | None = None):
        self.g = g
        self.N = N
        self.U = U
        self.lam = float(lam)
        self.vmat = potential_matrix(v, g)
        self.moves = moves or MoveSet()
        self.loops = elementary_loops(g, self.moves.cycles)
        # U(n) cached as floats
        self._U = {}

    def Uv(self, n: int) -> float:
        u = self._U.get(n)
        if u is None:
            u = float(self.U(int(n)))
            self._U[n] = u
        return u

    def _delta_energy(self, state: ChainState, verts, sign: int) -> float:
        if self.vmat is None:
            return 0.0
        delta = np.zeros(self.g.n_vertices)
        for x in verts:
            delta[x] += sign
        return float(2 * delta @ (self.vmat @ state.n) + delta @ self.vmat @ delta)

    def _insert_factor(self, state: ChainState, loop) -> float:
        """``mu(after) / mu(before)`` times slot count for inserting ``loop`` into ``state``."""
        verts = self.g.edges[loop[1]] if loop[0] == "edge" else loop[1]
        num = self.lam ** (2 if loop[0] == "edge" else len(verts))
        if loop[0] == "edge":
            num /= 2
        for x in verts:
            u0 = self.Uv(state.n[x])
            if u0 == 0:
                return math.inf
            num *= self.Uv(state.n[x] + 1) / u0
        if num == 0:
            return 0.0
        return num * math.exp(-self._delta_energy(state, verts, +1))

    def _delete_factor(self, state: ChainState, loop) -> float:
        """Same ratio seen from the state after deletion, computed before deleting."""
        verts = self.g.edges[loop[1]] if loop[0] == "edge" else loop[1]
        num = self.lam ** (2 if loop[0] == "edge" else len(verts))
        if loop[0] == "edge":
            num /= 2
        for x in verts:
            lo = self.Uv(state.n[x] - 1)
            if lo == 0:
                return 0.0
            num *= self.Uv(state.n[x]) / lo
        # the insertion energy change is minus the deletion energy change
        return num * math.exp(self._delta_energy(state, verts, -1))

    # actions ----------------------------------------------------------------

    def acceptance(self, state: ChainState, action) -> float:
        kind = action[0]
        if kind == "ins":
            _, li, colour, slots = action
            loop = self.loops[li]
            f = self._insert_factor(state, loop)
            K = len(state.occurrences(loop))
            return min(1.0, f * self.N / (K + 1))
        if kind == "del":
            _, li, links = action
            loop = self.loops[li]
            K = len(state.occurrences(loop))
            f = self._delete_factor(state, loop)
            if f == 0:
                return 0.0
            return min(1.0, K / (self.N * f))
        return 1.0

    def apply(self, state: ChainState, action) -> None:
        kind = action[0]
        if kind == "ins":
            _, li, colour, slots = action
            state.insert_loop(self.loops[li], colour, slots)
        elif kind == "del":
            state.delete_links(action[2])
        elif kind == "repair":
            _, x, pa, pb, opt = action
            state.repair(x, pa, pb, opt)
        elif kind == "recolour":
            _, links, colour = action
            state.recolour(links, colour)

    def actions(self, state: ChainState) -> list:
        """All ``(probability, action)``; ``None`` actions leave the state unchanged."""
        out = []
        mv = self.moves
        nl = len(self.loops)
        for li, loop in enumerate(self.loops):
            base = mv.p_loop / nl / 2
            # insertion
            for colour in range(1, self.N + 1):
                slots = self._all_slots(state, loop)
                for s in slots:
                    out.append((base / self.N / len(slots), ("ins", li, colour, s)))
            occ = state.occurrences(loop)
            if occ:
                for o in occ:
                    out.append((base / len(occ), ("del", li, o)))
            else:
                out.append((base, None))
        nv = self.g.n_vertices
        for x in range(nv):
            prs = state.pairs_at(x)
            if len(prs) < 2:
                out.append((mv.p_repair / nv, None))
                continue
            cands = list(combinations(prs, 2))
            for pa, pb in cands:
                for opt in (0, 1):
                    p = mv.p_repair / nv / len(cands) / 2
                    if state.link_col[pa[0]] != state.link_col[pb[0]]:
                        out.append((p, None))
                    else:
                        out.append((p, ("repair", x, pa, pb, opt)))
        M = state.n_links
        if M == 0:
            out.append((mv.p_recolour, None))
        else:
            for l in list(state.link_edge):
                links, _ = state.cycle_of(l)
                for c in range(1, self.N + 1):
                    out.append((mv.p_recolour / M / self.N, ("recolour", tuple(links), c)))
        return out

    def _all_slots(self, state: ChainState, loop) -> list:
        if loop[0] == "edge":
            m = len(state.edge_links[loop[1]])
            return [(i, j) for i in range(m + 2) for j in range(i + 1, m + 2)]
        ranges = [range(len(state.edge_links[e]) + 1) for e in loop[2]]
        out = [()]
        for r in ranges:
            out = [s + (i,) for s in out for i in r]
        return out

    def draw(self, state: ChainState, u: Callable[[], float]):
        """Sample an action with the law of ``actions`` (``u`` returns uniforms in [0, 1))."""
        mv = self.moves
        r = u()
        if r < mv.p_loop:
            li = int(u() * len(self.loops))
            loop = self.loops[li]
            if u() < 0.5:
                colour = 1 + int(u() * self.N)
                if loop[0] == "edge":
                    m = len(state.edge_links[loop[1]])
                    # uniform pair i < j among m + 2 slots
                    i = int(u() * (m + 2))
                    j = int(u() * (m + 1))
                    if j >= i:
                        j += 1
                    i, j = min(i, j), max(i, j)
                    slots = (i, j)
                else:
                    slots = tuple(int(u() * (len(state.edge_links[e]) + 1)) for e in loop[2])
                return ("ins", li, colour, slots)
            occ = state.occurrences(loop)
            if not occ:
                return None
            return ("del", li, occ[int(u() * len(occ))])
        if r < mv.p_loop + mv.p_repair:
            x = int(u() * self.g.n_vertices)
            prs = state.pairs_at(x)
            k = len(prs)
            if k < 2:
                return None
            i = int(u() * k)
            j = int(u() * (k - 1))
            if j >= i:
                j += 1
            pa, pb = prs[min(i, j)], prs[max(i, j)]
            opt = int(u() * 2)
            if state.link_col[pa[0]] != state.link_col[pb[0]]:
                return None
            return ("repair", x, pa, pb, opt)
        M = state.n_links
        if M == 0:
            return None
        ids = list(state.link_edge)
        l = ids[int(u() * M)]
        links, _ = state.cycle_of(l)
        return ("recolour", tuple(links), 1 + int(u() * self.N))

    def step(self, state: ChainState, u: Callable[[], float]) -> bool:
        action = self.draw(state, u)
        if action is None:
            return False
        a = self.acceptance(state, action)
        if a >= 1.0 or u() < a:
            self.apply(state, action)
            return True
        return False


# ---------------------------------------------------------------------------
# exactness
# ---------------------------------------------------------------------------


def transition_matrix(sampler: Sampler, states: list) -> np.ndarray:
    """Explicit Markov matrix over ``states`` (closed ``PathConfig`` objects)."""
    index = {w: i for i, w in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for i, w in enumerate(states):
        st = ChainState.from_config(sampler.g, sampler.N, w)
        for prob, action in sampler.actions(st):
            if action is None:
                P[i, i] += prob
                continue
            a = sampler.acceptance(st, action)
            if a > 0:
                st2 = ChainState.from_config(sampler.g, sampler.N, w)
                # actions refer to link ids, which from_config reproduces deterministically
                sampler.apply(st2, action)
                j = index.get(st2.to_config())
                if j is None:
                    raise AssertionError("move left the enumerated state space")
                P[i, j] += prob * a
            P[i, i] += prob * (1 - a)
    return P


@dataclass
class ExactnessReport:
    n_states: int
    row_sum_defect: float
    irreducible: bool
    stationary_error: float
    detailed_balance_error: float
    iterations: int
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.irreducible and self.row_sum_defect < 1e-12 and self.stationary_error <= self.tolerance

    def as_dict(self) -> dict:
        return {"check": "mcmc_exactness", "states": self.n_states, "rowSumDefect": self.row_sum_defect,
                "irreducible": self.irreducible, "stationaryError": self.stationary_error,
                "detailedBalanceError": self.detailed_balance_error, "iterations": self.iterations,
                "tolerance": self.tolerance, "pass": self.ok}


def _irreducible(P: np.ndarray) -> bool:
    from scipy.sparse.csgraph import connected_components

    n, labels = connected_components(P > 0, directed=True, connection="strong")
    return n == 1


def exactness_test(g: LatticeGraph, N: int, U: WeightFn, lam: float, v=None, moves: MoveSet | None = None,
                   tolerance: float = 1e-10, max_states: int = 5000, max_iter: int = 200000) -> ExactnessReport:
    """Stationary vector of the explicit transition matrix against ``mu / Z``."""
    sampler = Sampler(g, N, U, lam, v, moves)
    states = list(closed_configs(g, N, U))
    if len(states) > max_states:
        raise ValueError(f"{len(states)} states exceed the cap {max_states}")
    vmat = sampler.vmat
    target = np.array([float(rpm_weight(g, w, vmat, U, lam)) for w in states])
    keep = target > 0
    states = [w for w, k in zip(states, keep) if k]
    target = target[keep] / target[keep].sum()
    P = transition_matrix(sampler, states)
    rows = float(np.abs(P.sum(axis=1) - 1).max())
    irr = _irreducible(P)
    # lazy power iteration (aperiodicity not assumed)
    Q = 0.5 * (P + np.eye(len(states)))
    pi = np.full(len(states), 1.0 / len(states))
    it = 0
    for it in range(1, max_iter + 1):
        new = pi @ Q
        if np.abs(new - pi).max() < tolerance * 1e-3:
            pi = new
            break
        pi = new
    err = float(np.abs(pi / pi.sum() - target).max())
    F = target[:, None] * P
    db = float(np.abs(F - F.T).max())
    return ExactnessReport(len(states), rows, irr, err, db, it, tolerance)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def integrated_autocorrelation(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return 1.0
    y = x - x.mean()
    var = float(y @ y) / n
    if var == 0:
        return 1.0
    f = np.fft.rfft(y, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    tau = 1.0
    for M in range(1, n):
        tau = 1.0 + 2.0 * float(acf[1 : M + 1].sum())
        if M >= c * tau:
            break
    return max(tau, 1.0)


def batch_means(x: np.ndarray, n_batches: int = 32) -> float:
    """Standard error of the mean from non-overlapping batches."""
    x = np.asarray(x, dtype=float)
    n = len(x) // n_batches
    if n < 1:
        return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf
    b = x[: n * n_batches].reshape(n_batches, n).mean(axis=1)
    return float(b.std(ddof=1) / math.sqrt(n_batches))


@dataclass
class SeriesStats:
    mean: float
    stderr: float
    tau: float
    ess: float
    n: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "tau": self.tau, "ess": self.ess, "n": self.n}


def series_stats(x, n_batches: int = 32) -> SeriesStats:
    x = np.asarray(x, dtype=float)
    tau = integrated_autocorrelation(x)
    se_bm = batch_means(x, n_batches)
    se_tau = float(x.std(ddof=1) * math.sqrt(tau / len(x))) if len(x) > 1 else math.inf
    return SeriesStats(float(x.mean()), max(se_bm, se_tau), tau, len(x) / tau, len(x))


# ---------------------------------------------------------------------------
# observables and runs
# ---------------------------------------------------------------------------


def standard_observables(sampler: Sampler, x: int = 0, e: int | None = None, two_point: bool = False,
                         diagonal: str = "literal") -> dict:
    """Observables of a chain state.

    ``n_o``: local time at ``x``; ``m1m2``: product of colour-1 and colour-2
    link counts on edge ``e``; ``m_e_2``: indicator of exactly two links on
    ``e``; ``m1``: mean colour-1 link count per edge; ``gamma``: mean length
    of the cycles through ``x`` (zero if none).  With ``two_point`` the
    vector ``G`` holds translation-averaged estimates of ``G(o, y)`` (cycle
    estimator off the diagonal, reopened pairings on it).
    """
    g = sampler.g
    if e is None:
        e = g.edge_id(x, sorted(g.adjacency[x])[0])
    lam2 = sampler.lam**2
    N = sampler.N
    nv = g.n_vertices

    def n_o(s):
        return float(s.n[x])

    def m1m2(s):
        c = s.edge_colour_counts(e)
        return float(c[0] * c[1]) if N >= 2 else 0.0

    def m_e_2(s):
        return float(len(s.edge_links[e]) == 2)

    def m1(s):
        return sum(1 for c in s.link_col.values() if c == 1) / g.n_edges

    def gamma(s):
        lengths = [len(links) for _, links, verts in s.cycles() if x in verts]
        return float(np.mean(lengths)) if lengths else 0.0

    out = {"n_o": n_o, "m1m2": m1m2, "m_e_2": m_e_2, "m1": m1, "gamma": gamma}
    if two_point:
        coords = np.array([g.coord(z) for z in g.vertices]).reshape(nv, g.d)
        shift = np.array([[g.index(coords[z] + coords[y]) for y in range(nv)] for z in range(nv)])
        rows = np.arange(nv)[:, None]
        vm = sampler.vmat

        def G(s):
            n = s.n
            r = np.array([sampler.Uv(k + 1) / sampler.Uv(k) if sampler.Uv(k) else 0.0 for k in n])
            M = np.zeros((nv, nv))
            for _, links, verts in s.cycles():
                c = np.bincount(verts, minlength=nv).astype(float)
                M += np.outer(c, c)
            fac = np.outer(r, r)
            if vm is not None:
                a = vm @ n
                fac = fac * np.exp(-2 * (vm[0, 0] + vm + a[:, None] + a[None, :]))
            M = M * fac * (2 * lam2 / N)
            vec = M[rows, shift].mean(axis=0)
            # diagonal: (1 + 2 n^1)(1 + 2 n^2) or the literal mixture, per vertex
            vec[0] = np.mean([lam2 * _diag_state(sampler, s, z, diagonal) for z in range(nv)])
            return vec

        out["G"] = G
    return out


def _diag_state(sampler: Sampler, s: ChainState, z: int, diagonal: str = "literal") -> float:
    n1 = n2 = 0
    for a, _ in s.pairs_at(z):
        c = s.link_col[a]
        if c == 1:
            n1 += 1
        elif c == 2:
            n2 += 1
    n = s.n

    def r(k):
        u0 = sampler.Uv(n[z])
        if u0 == 0:
            return 0.0
        out = sampler.Uv(n[z] + k) / u0
        if out and sampler.vmat is not None:
            out *= math.exp(-(2 * k * float(sampler.vmat[:, z] @ n) + k * k * sampler.vmat[z, z]))
        return out

    if diagonal == "balanced":
        return (1 + 2 * n1) * (1 + 2 * n2) * r(2)
    return r(4) + 2 * (n1 + n2) * r(3) + 4 * n1 * n2 * r(2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [int(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


class _Uniforms:
    """Buffered uniforms from a Philox stream."""

    def __init__(self, rng: np.random.Generator, size: int = 4096):
        self.rng = rng
        self.size = size
        self.buf = rng.random(size)
        self.i = 0

    def __call__(self) -> float:
        if self.i == self.size:
            self.buf = self.rng.random(self.size)
            self.i = 0
        v = self.buf[self.i]
        self.i += 1
        return float(v)

    def state(self) -> dict:
        return {"bitGenerator": _jsonable(self.rng.bit_generator.state), "buffer": self.buf.tolist(),
                "index": self.i}

    @classmethod
    def restore(cls, data: dict) -> "_Uniforms":
        bg = np.random.Philox()
        st = data["bitGenerator"]
        # Philox counter, key and buffer are uint64 arrays
        bg.state = {**st, "state": {k: np.array(v, dtype=np.uint64) for k, v in st["state"].items()},
                    "buffer": np.array(st["buffer"], dtype=np.uint64)}
        obj = cls.__new__(cls)
        obj.rng = np.random.Generator(bg)
        obj.buf = np.array(data["buffer"])
        obj.size = len(obj.buf)
        obj.i = data["index"]
        return obj


def chain_rng(seed: int, chain: int = 0) -> np.random.Generator:
    """Reproducible per-chain stream keyed by ``(seed, chain)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chain])))


@dataclass
class McmcResult:
    series: dict
    acceptance: float
    steps: int
    params: dict = field(default_factory=dict)

    def stats(self, name: str) -> SeriesStats:
        return series_stats(self.series[name])

    def vector_stats(self, name: str) -> tuple:
        X = np.asarray(self.series[name])
        means = X.mean(axis=0)
        errs = np.array([series_stats(X[:, j]).stderr for j in range(X.shape[1])])
        return means, errs

    def summary(self) -> dict:
        out = {"acceptance": self.acceptance, "steps": self.steps, **self.params}
        for k, v in self.series.items():
            arr = np.asarray(v)
            if arr.ndim == 1:
                out[k] = self.stats(k).as_dict()
        return out


def run_chain(sampler: Sampler, *, seed: int = 0, chain: int = 0, samples: int = 10000, thermalization: int = 10000,
              thinning: int = 10, observables: dict | None = None, start: PathConfig | None = None,
              checkpoint: str | None = None, check_every: int = 0) -> McmcResult:
    """Run one chain and record every ``thinning``-th state after thermalisation."""
    g = sampler.g
    state = ChainState.from_config(g, sampler.N, start) if start is not None else ChainState(g, sampler.N)
    u = _Uniforms(chain_rng(seed, chain))
    obs = observables if observables is not None else standard_observables(sampler)
    series = {k: [] for k in obs}
    accepted = 0
    total = thermalization + samples * thinning
    for t in range(1, total + 1):
        if sampler.step(state, u):
            accepted += 1
        if check_every and t % check_every == 0:
            state.check()
        if t > thermalization and (t - thermalization) % thinning == 0:
            for k, f in obs.items():
                series[k].append(f(state))
    if checkpoint is not None:
        save_checkpoint(checkpoint, state, u, total)
    return McmcResult({k: np.asarray(v) for k, v in series.items()}, accepted / total, total,
                      {"seed": seed, "chain": chain, "thinning": thinning, "thermalization": thermalization})


def save_checkpoint(path: str, state: ChainState, u: _Uniforms, steps: int) -> None:
    """Atomic JSON checkpoint: configuration, generator state and step count."""
    data = {"config": state.serialize(), "rng": u.state(), "steps": steps, "N": state.N}
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(data, fh, sort_keys=True)
    os.replace(tmp, path)


def load_checkpoint(path: str, g: LatticeGraph) -> tuple:
    with open(path) as fh:
        data = json.load(fh)
    w = PathConfig.deserialize(data["config"])
    return ChainState.from_config(g, data["N"], w), _Uniforms.restore(data["rng"]), data["steps"]
