"""Two-point function, its closed-configuration estimators and cross-model checks."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np
from scipy.special import roots_legendre

from .lattice import LatticeGraph, all_coords, hyperoctahedral_images
from .params import Potential, WeightFn, potential_matrix
from .rpm import (PathConfig, colour_count_sum, enumerate_paths, extract_cycles, local_times,
                  partition_function, directed_partition_function)
from .rwls import enumerate_soups

__all__ = [
    "TwoPointTable",
    "two_point_exact",
    "two_point_table_exact",
    "exact_closed_source",
    "cycle_term",
    "neighbour_term",
    "diagonal_term",
    "tilde_v",
    "expectation",
    "two_point_via_cycles",
    "neighbour_moment",
    "mean_link_colour",
    "loop_connection_bound",
    "cycle_length_at",
    "expected_cycle_length",
    "monotonicity_scan",
    "bose_partition_sum",
    "bose_correspondence_check",
    "spin_correlation",
    "spin_tail_bound",
    "two_point_spin_loop",
    "spin_crosscheck",
]


@dataclass
class TwoPointTable:
    """``values[x] = G(o, x)`` on a torus, with standard errors."""

    L: int
    d: int
    values: np.ndarray
    stderr: np.ndarray
    source: str = "exact"
    params: dict = field(default_factory=dict)

    def __getitem__(self, x: int) -> float:
        return float(self.values[x])

    def to_csv(self, g: LatticeGraph) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow([f"x{i + 1}" for i in range(self.d)] + ["G", "stderr", "source"])
        for x in range(g.n_vertices):
            w.writerow(list(g.coord(x)) + [repr(float(self.values[x])), repr(float(self.stderr[x])),
                                            self.source])
        return buf.getvalue()

    def symmetry_defect(self, g: LatticeGraph) -> float:
        """Largest difference of ``G`` over hyperoctahedral images."""
        worst = 0.0
        for x in range(g.n_vertices):
            for y in hyperoctahedral_images(g, x):
                worst = max(worst, abs(float(self.values[x]) - float(self.values[y])))
        return worst


def _ratio(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a / b
    return float(a) / float(b)


def two_point_exact(g: LatticeGraph, N: int, U: WeightFn, lam, x: int, y: int, v=None,
                    diagonal: str = "literal", **kw):
    """``lam^2 Z(x, y) / Z`` by colour-count enumeration.

    ``diagonal`` selects the ghost convention used when ``x == y``.
    """
    vmat = potential_matrix(v, g)
    Z = partition_function(g, N, U, lam, vmat, **kw)
    Zxy = directed_partition_function(g, N, U, lam, x, y, vmat, diagonal=diagonal, **kw)
    lam2 = Fraction(lam) ** 2 if isinstance(lam, (int, Fraction)) and vmat is None else float(lam) ** 2
    return lam2 * _ratio(Zxy, Z)


def two_point_table_exact(g: LatticeGraph, N: int, U: WeightFn, lam, v=None, diagonal: str = "literal",
                          **kw) -> TwoPointTable:
    vals = np.array([float(two_point_exact(g, N, U, lam, g.origin, x, v, diagonal=diagonal, **kw))
                     for x in range(g.n_vertices)])
    return TwoPointTable(g.L, g.d, vals, np.zeros_like(vals), "exact",
                         {"N": N, "U": U.spec(), "lambda": float(lam), "diagonal": diagonal})


def exact_closed_source(g: LatticeGraph, N: int, U: WeightFn, lam, v=None, **kw) -> list:
    """Closed configuration classes as ``(representative, total class weight)``.

    Every function that is constant on relabelling classes can be averaged
    over this list exactly.
    """
    vmat = potential_matrix(v, g)
    return [(pc.representative, pc.weight) for pc in enumerate_paths(g, U, N, lam, vmat, **kw)]


def expectation(source: Iterable, f: Callable):
    """Weighted mean of ``f(w)`` over ``(w, weight)`` pairs."""
    num, den = 0, 0
    for w, wt in source:
        num = num + wt * f(w)
        den = den + wt
    return _ratio(num, den) if not (isinstance(num, int) and isinstance(den, int)) else Fraction(num, den)


def tilde_v(g: LatticeGraph, n: list, x: int, y: int, vmat) -> float:
    """Energy change when one extra visit is added at both ``x`` and ``y``."""
    if vmat is None:
        return 0.0
    n = np.asarray(n, dtype=float)
    o = 0
    return 2.0 * (vmat[o, o] + vmat[x, y] + float(n @ (vmat[:, x] + vmat[:, y])))


def cycle_term(g: LatticeGraph, w: PathConfig, U: WeightFn, x: int, y: int, vmat=None):
    """Summand of the cycle estimator: ``G(x, y) = 2 lam^2 E[cycle_term]`` for ``x != y``."""
    n = local_times(g, w)
    s = 0
    for ch in extract_cycles(g, w):
        if ch.colour == 1:
            s += ch.visits(x) * ch.visits(y)
    if s == 0:
        return 0
    out = s * U.ratio(n[x]) * U.ratio(n[y])
    if vmat is not None:
        out = out * math.exp(-tilde_v(g, n, x, y, vmat))
    return out


def cycle_term_all_colours(g: LatticeGraph, w: PathConfig, U: WeightFn, x: int, y: int, vmat=None):
    """Colour-symmetrised summand: ``G(x, y) = (2 lam^2 / N) E[...]``."""
    n = local_times(g, w)
    s = sum(ch.visits(x) * ch.visits(y) for ch in extract_cycles(g, w))
    if s == 0:
        return 0
    out = s * U.ratio(n[x]) * U.ratio(n[y])
    if vmat is not None:
        out = out * math.exp(-tilde_v(g, n, x, y, vmat))
    return out


def _shift_factor(U: WeightFn, n: list, x: int, k: int, vmat):
    """``U(n_x + k) / U(n_x) e^{-(V(n + k delta_x) - V(n))}``."""
    r = 1
    for j in range(k):
        r = r * U.ratio(n[x] + j)
        if r == 0:
            return 0
    if vmat is not None:
        dv = 2 * k * float(np.dot(n, vmat[:, x])) + k * k * vmat[x, x]
        r = r * math.exp(-dv)
    return r


def diagonal_term(g: LatticeGraph, w: PathConfig, U: WeightFn, x: int, vmat=None, diagonal: str = "literal"):
    """Summand of the closed-configuration estimator ``G(x, x) = lam^2 E[diagonal_term]``.

    Reopening ``k_i`` pairings of colour ``i`` at ``x`` (each in ``n_x^i`` ways)
    and adding ghosts gives every source configuration exactly once.  Literal
    convention: ``r4 + 2 (n^1 + n^2) r3 + 4 n^1 n^2 r2``; balanced convention:
    ``(1 + 2 n^1)(1 + 2 n^2) r2``, with ``r_k`` the weight change for ``k``
    extra visits at ``x``.
    """
    n = local_times(g, w)
    n1 = sum(1 for a, _ in w.pairings[x] if w.colour(a) == 1)
    n2 = sum(1 for a, _ in w.pairings[x] if w.colour(a) == 2)
    if diagonal == "balanced":
        return (1 + 2 * n1) * (1 + 2 * n2) * _shift_factor(U, n, x, 2, vmat)
    if diagonal != "literal":
        raise ValueError(f"unknown diagonal convention {diagonal!r}")
    out = _shift_factor(U, n, x, 4, vmat)
    if n1 + n2:
        out = out + 2 * (n1 + n2) * _shift_factor(U, n, x, 3, vmat)
    if n1 * n2:
        out = out + 4 * n1 * n2 * _shift_factor(U, n, x, 2, vmat)
    return out


def neighbour_term(w: PathConfig, e: int) -> int:
    """``m_e^(1) m_e^(2)``."""
    c = w.colours[e]
    return c.count(1) * c.count(2)


def two_point_via_cycles(g: LatticeGraph, U: WeightFn, lam, x: int, y: int, source, vmat=None,
                         N: int | None = None):
    """Cycle estimator averaged over a closed-configuration source.

    With ``N`` given, the colour-symmetrised form is used.
    """
    if x == y:
        raise ValueError("the cycle estimator needs x != y")
    if N is None:
        mean = expectation(source, lambda w: cycle_term(g, w, U, x, y, vmat))
        factor = 2
    else:
        mean = expectation(source, lambda w: cycle_term_all_colours(g, w, U, x, y, vmat))
        factor = Fraction(2, N) if isinstance(mean, Fraction) else 2.0 / N
    lam2 = Fraction(lam) ** 2 if isinstance(mean, Fraction) else float(lam) ** 2
    return factor * lam2 * mean


def neighbour_moment(g: LatticeGraph, N: int, U: WeightFn, lam, x: int, y: int, v=None, **kw):
    """``E[m^(1) m^(2)]`` on the edge ``{x, y}`` by colour-count enumeration."""
    e = g.edge_id(x, y)
    vmat = potential_matrix(v, g)
    t = colour_count_sum(g, N, U, lam, vmat, observables={"mm": lambda mc, n: int(mc[e, 0] * mc[e, 1])},
                         **kw)
    return _ratio(t["mm"], t["Z"])


def mean_link_colour(g: LatticeGraph, N: int, U: WeightFn, lam, e: int = 0, colour: int = 1, v=None, **kw):
    """``E[m_e^(colour)]``."""
    vmat = potential_matrix(v, g)
    t = colour_count_sum(g, N, U, lam, vmat,
                         observables={"m": lambda mc, n: int(mc[e, colour - 1])}, **kw)
    return _ratio(t["m"], t["Z"])


def cycle_length_at(g: LatticeGraph, w: PathConfig, x: int):
    """Mean length of the cycles through ``x`` (zero if none).

    Loop-soup weights do not depend on the order of the loops, so on each
    class the first loop through ``x`` is uniform among the loops through
    ``x``; this is the class average of the length of that loop.
    """
    lengths = [len(ch) for ch in extract_cycles(g, w) if ch.contains(x)]
    return Fraction(sum(lengths), len(lengths)) if lengths else 0


def expected_cycle_length(g: LatticeGraph, N: int, U: WeightFn, lam, x: int = 0, v=None, **kw):
    """Expected length of the first loop through ``x``."""
    src = exact_closed_source(g, N, U, lam, v, **kw)
    return expectation(src, lambda w: cycle_length_at(g, w, x))


@dataclass
class ConnectionReport:
    mean_N: float
    mean_N2: float
    prob_positive: float
    G: float
    ok: bool

    def as_dict(self):
        return {"check": "loop_connection", "E_N": self.mean_N, "E_N2": self.mean_N2,
                "P_N_pos": self.prob_positive, "G": self.G, "pass": self.ok}


def loop_connection_bound(g: LatticeGraph, N: int, U: WeightFn, lam, x: int, y: int, v=None, **kw):
    """Expected number of cycles through ``x`` and ``y`` against ``G(x, y)``."""
    src = exact_closed_source(g, N, U, lam, v, **kw)

    def ncyc(w):
        return sum(1 for ch in extract_cycles(g, w) if ch.contains(x) and ch.contains(y))

    EN = float(expectation(src, ncyc))
    EN2 = float(expectation(src, lambda w: ncyc(w) ** 2))
    P = float(expectation(src, lambda w: int(ncyc(w) > 0)))
    G = float(two_point_exact(g, N, U, lam, x, y, v, **kw))
    ok = (EN > 0) == (G > 0) or G == 0
    ok = ok and (EN2 == 0 or P >= EN * EN / EN2 - 1e-12)
    return ConnectionReport(EN, EN2, P, G, ok)


@dataclass
class MonotonicityReport:
    comparisons: list
    ok: bool

    def as_dict(self):
        return {"check": "monotonicity", "pass": self.ok,
                "comparisons": [{"lhs": a, "rhs": b, "lhsValue": va, "rhsValue": vb}
                                for a, b, va, vb in self.comparisons]}


def monotonicity_scan(g: LatticeGraph, table: TwoPointTable, axis: int = 0, tol: float = 1e-12
                      ) -> MonotonicityReport:
    """Site monotonicity along an axis on a full two-point table.

    For odd ``n >= 3`` with ``n <= L/2``: ``G(n e_i) <= G((n-2) e_i)``, and
    ``G(x) <= G(n e_i)`` whenever ``x_i = n``.
    """
    comps = []
    ok = True
    coords = all_coords(g)
    for n in range(3, g.L // 2 + 1, 2):
        a = g.unit(axis, n)
        b = g.unit(axis, n - 2)
        comps.append((g.coord(a), g.coord(b), table[a], table[b]))
        ok &= table[a] <= table[b] + tol
    for n in range(1, g.L // 2 + 1, 2):
        ref = g.unit(axis, n)
        for x in range(g.n_vertices):
            if coords[x][axis] == n and x != ref:
                comps.append((g.coord(x), g.coord(ref), table[x], table[ref]))
                ok &= table[x] <= table[ref] + tol
    return MonotonicityReport(comps, bool(ok))


# ---------------------------------------------------------------------------
# Bose gas correspondence
# ---------------------------------------------------------------------------


def bose_partition_sum(g: LatticeGraph, mu: float, v, n_max: int) -> float:
    """``sum_{n <= n_max} e^{mu n} Zhat_n`` by direct sums over positions and permutations.

    Each particle jumps once to a uniformly chosen neighbour with weight
    ``1 / (2d)``; the pair interaction enters as ``exp(-sum_{i,j} v(x_i, x_j))``.
    """
    vmat = potential_matrix(v, g)
    p = 1.0 / (2 * g.d)
    adj = [set(a) for a in g.adjacency]
    total = 1.0
    for n in range(1, n_max + 1):
        zn = 0.0
        perms = [pi for pi in itertools.permutations(range(n)) if all(pi[i] != i for i in range(n))]
        for xs in itertools.product(range(g.n_vertices), repeat=n):
            for pi in perms:
                if all(xs[pi[i]] in adj[xs[i]] for i in range(n)):
                    e = 0.0
                    if vmat is not None:
                        idx = np.array(xs)
                        e = float(vmat[np.ix_(idx, idx)].sum())
                    zn += p**n * math.exp(-e)
        total += math.exp(mu * n) * zn / math.factorial(n)
    return total


@dataclass
class CrossCheck:
    name: str
    lhs: float
    rhs: float
    rel_err: float
    tolerance: float
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.rel_err <= self.tolerance

    def as_dict(self):
        return {"check": self.name, "lhs": self.lhs, "rhs": self.rhs, "relErr": self.rel_err,
                "tolerance": self.tolerance, "pass": self.ok, **self.extra}


def bose_correspondence_check(g: LatticeGraph, mu: float, v=None, n_max: int = 4,
                              tolerance: float = 1e-10) -> CrossCheck:
    if n_max > 6:
        raise ValueError("n_max above 6 is too expensive for the direct particle sum")
    lhs = bose_partition_sum(g, mu, v, n_max)
    lam = math.exp(mu) / (2 * g.d)
    vmat = potential_matrix(v, g)
    rhs = float(sum((sc.weight for sc in enumerate_soups(g, WeightFn.bose(), 2, lam, vmat, n_max)), 0.0))
    err = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    return CrossCheck("bose_correspondence", lhs, rhs, err, tolerance, {"nMax": n_max, "lambda": lam})


# ---------------------------------------------------------------------------
# spin O(N) cross-check
# ---------------------------------------------------------------------------


def _sphere_rule(N: int, n: int):
    """Nodes and weights of a product rule for the uniform probability on ``S^{N-1}``."""
    if N == 2:
        a = 2 * np.pi * np.arange(2 * n) / (2 * n)
        pts = np.stack([np.cos(a), np.sin(a)], axis=1)
        return pts, np.full(len(a), 1.0 / len(a))
    if N == 3:
        t, wt = roots_legendre(n)
        a = 2 * np.pi * np.arange(2 * n) / (2 * n)
        T, A = np.meshgrid(t, a, indexing="ij")
        W = np.repeat(wt[:, None], len(a), axis=1) / (2 * len(a))
        s = np.sqrt(1 - T**2)
        pts = np.stack([s * np.cos(A), s * np.sin(A), T], axis=-1).reshape(-1, 3)
        return pts, W.reshape(-1)
    raise ValueError("sphere quadrature implemented for N in {2, 3}")


def spin_correlation(g: LatticeGraph, N: int, beta: float, x: int, y: int, n_nodes: int = 48) -> float:
    """``<phi_x^1 phi_x^2 phi_y^1 phi_y^2>`` by product quadrature over all spins."""
    if g.n_vertices > 2:
        raise ValueError("direct sphere quadrature is limited to two vertices")
    pts, wts = _sphere_rule(N, n_nodes)
    if g.n_vertices == 1:
        raise ValueError("need two vertices")
    coupling = pts @ pts.T * beta * (1 if g.has_edge(0, 1) else 0)
    B = np.exp(coupling - coupling.max())
    W = wts[:, None] * wts[None, :] * B
    f = pts[:, 0] * pts[:, 1]
    if x == y:
        fx = (f**2)[:, None] if x == 0 else (f**2)[None, :]
        num = (W * fx).sum()
    else:
        num = (W * f[:, None] * f[None, :]).sum()
    return float(num / W.sum())


def spin_tail_bound(g: LatticeGraph, N: int, lam: float, M: int) -> float:
    """Bound on the total weight of configurations with more than ``M`` links, spin weight."""
    a = lam * N * g.n_edges
    # sum_{k > M} a^k / k!
    term = a ** (M + 1) / math.factorial(M + 1)
    total, k = 0.0, M + 1
    while term > 1e-300:
        total += term
        k += 1
        term *= a / k
        if k > M + 10000:
            break
    return total


def two_point_spin_loop(g: LatticeGraph, N: int, beta: float, x: int, y: int, convention: str,
                        tol: float = 1e-5, max_links: int = 60) -> tuple:
    """Loop-side ``G(x, y)`` with the spin weight and a certified truncation.

    Returns ``(G, bound)`` where ``|G_true - G| <= bound``.  The bound is
    only certified for the definition convention.
    """
    if x == y:
        raise ValueError("certified truncation implemented for x != y")
    U = WeightFn.spin(N, convention)
    M = 4
    while True:
        tail = spin_tail_bound(g, N, beta, M)
        Z = partition_function(g, N, U, beta, max_total_links=M, max_local_time=M + 4)
        Zxy = directed_partition_function(g, N, U, beta, x, y, max_total_links=M, max_local_time=M + 4)
        G = beta**2 * Zxy / Z
        # Z_true in [Z, Z + tail], Zxy_true in [Zxy, Zxy + 4 tail]
        bound = beta**2 * ((Zxy + 4 * tail) / Z - Zxy / (Z + tail))
        if bound < 0.1 * tol or M >= max_links:
            return G, bound
        M += 2


@dataclass
class SpinReport:
    N: int
    beta: float
    spin_side: float
    loop_definition: float
    loop_proof: float
    tail_bound: float
    tolerance: float
    matches: list

    @property
    def ok(self) -> bool:
        return bool(self.matches)

    def as_dict(self):
        return {"check": "spin_crosscheck", "N": self.N, "beta": self.beta, "spinSide": float(self.spin_side),
                "loopDefinition": float(self.loop_definition), "loopProof": float(self.loop_proof),
                "tailBound": float(self.tail_bound), "tolerance": self.tolerance,
                "matchingConventions": self.matches, "pass": self.ok}


def spin_crosscheck(g: LatticeGraph, N: int, beta: float, x: int = 0, y: int = 1,
                    tolerance: float = 1e-4, n_nodes: int = 48) -> SpinReport:
    """Compare ``beta^2 <phi_x^1 phi_x^2 phi_y^1 phi_y^2>`` with loop-side ``G`` for both weights."""
    spin = beta**2 * spin_correlation(g, N, beta, x, y, n_nodes)
    Gd, bd = two_point_spin_loop(g, N, beta, x, y, "definition", tol=tolerance)
    Gp, _ = two_point_spin_loop(g, N, beta, x, y, "proof", tol=tolerance)
    matches = []
    if abs(Gd - spin) <= tolerance:
        matches.append("definition")
    if abs(Gp - spin) <= tolerance:
        matches.append("proof")
    return SpinReport(N, beta, spin, Gd, Gp, bd, tolerance, matches)
