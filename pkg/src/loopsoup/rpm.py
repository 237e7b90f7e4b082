"""Random path model: configurations, weights, cycles and exact enumeration.

A configuration ``w = (m, c, pi, g)`` is stored as

* ``colours[e]``: tuple of link colours on edge ``e`` (``m_e = len(colours[e])``),
  colours are ``1 .. N``;
* ``pairings[x]``: sorted tuple of pairs ``((e1, p1), (e2, p2))`` of links
  paired at ``x``; a link ``(e, p)`` is the ``p``-th link (0-based) on ``e``;
* ``ghosts[x]``: number of ghost pairings at ``x``.

Links touching ``x`` that appear in no pair at ``x`` are unpaired there.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .lattice import LatticeGraph
from .params import WeightFn, double_factorial, general_graph_condition
from .rwls import ClassSignature, Loop, LoopClass, _canonical, loop_class

__all__ = [
    "PathConfig",
    "Cycle",
    "ValidationReport",
    "SiteRule",
    "CLOSED",
    "validate",
    "is_closed",
    "local_times",
    "colour_local_times",
    "unpaired_counts",
    "link_colour_counts",
    "interaction",
    "rpm_weight",
    "extract_cycles",
    "signature2",
    "path_class_size",
    "pairing_count_bound",
    "count_pairings",
    "iter_configs",
    "closed_configs",
    "enumerate_paths",
    "PathClass",
    "source_rules",
    "colour_count_sum",
    "partition_function",
    "directed_partition_function",
    "BoundReport",
    "partition_bound_check",
    "relabel",
]


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathConfig:
    colours: tuple
    pairings: tuple
    ghosts: tuple

    @staticmethod
    def empty(g: LatticeGraph) -> "PathConfig":
        return PathConfig(((),) * g.n_edges, ((),) * g.n_vertices, (0,) * g.n_vertices)

    @staticmethod
    def build(g: LatticeGraph, colours: dict | Sequence, pairings: dict | Sequence,
              ghosts: dict | Sequence | None = None) -> "PathConfig":
        """Normalising constructor accepting dicts keyed by edge/vertex."""
        if isinstance(colours, dict):
            colours = [tuple(colours.get(e, ())) for e in range(g.n_edges)]
        if isinstance(pairings, dict):
            pairings = [pairings.get(x, ()) for x in range(g.n_vertices)]
        if ghosts is None:
            ghosts = [0] * g.n_vertices
        elif isinstance(ghosts, dict):
            ghosts = [ghosts.get(x, 0) for x in range(g.n_vertices)]
        pr = tuple(tuple(sorted(tuple(sorted((tuple(a), tuple(b)))) for a, b in px)) for px in pairings)
        return PathConfig(tuple(tuple(int(c) for c in ce) for ce in colours), pr,
                          tuple(int(v) for v in ghosts))

    @property
    def link_counts(self) -> tuple:
        return tuple(len(c) for c in self.colours)

    @property
    def n_links(self) -> int:
        return sum(len(c) for c in self.colours)

    def colour(self, link) -> int:
        e, p = link
        return self.colours[e][p]

    def partner(self, x: int, link):
        for a, b in self.pairings[x]:
            if a == link:
                return b
            if b == link:
                return a
        return None

    def serialize(self) -> dict:
        return {
            "colours": [list(c) for c in self.colours],
            "pairings": [[[list(a), list(b)] for a, b in px] for px in self.pairings],
            "ghosts": list(self.ghosts),
        }

    @staticmethod
    def deserialize(data: dict) -> "PathConfig":
        return PathConfig(
            tuple(tuple(c) for c in data["colours"]),
            tuple(tuple((tuple(a), tuple(b)) for a, b in px) for px in data["pairings"]),
            tuple(data["ghosts"]),
        )


def links_at(g: LatticeGraph, w: PathConfig, x: int) -> list:
    return [(e, p) for e in g.incident[x] for p in range(len(w.colours[e]))]


def local_times(g: LatticeGraph, w: PathConfig) -> list:
    return [len(w.pairings[x]) + w.ghosts[x] for x in range(g.n_vertices)]


def colour_local_times(g: LatticeGraph, w: PathConfig, N: int) -> np.ndarray:
    out = np.zeros((g.n_vertices, N + 1), dtype=int)
    for x in range(g.n_vertices):
        for a, _ in w.pairings[x]:
            out[x, w.colour(a)] += 1
    return out[:, 1:]


def unpaired_links(g: LatticeGraph, w: PathConfig, x: int) -> list:
    paired = {l for pr in w.pairings[x] for l in pr}
    return [l for l in links_at(g, w, x) if l not in paired]


def unpaired_counts(g: LatticeGraph, w: PathConfig, x: int) -> Counter:
    """Number of unpaired links at ``x`` per colour."""
    return Counter(w.colour(l) for l in unpaired_links(g, w, x))


def link_colour_counts(w: PathConfig, N: int) -> np.ndarray:
    """Array ``[e, i-1] = m_e^{(i)}``."""
    out = np.zeros((len(w.colours), N), dtype=int)
    for e, ce in enumerate(w.colours):
        for c in ce:
            out[e, c - 1] += 1
    return out


def is_closed(g: LatticeGraph, w: PathConfig) -> bool:
    if any(w.ghosts):
        return False
    return all(not unpaired_links(g, w, x) for x in range(g.n_vertices))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    diagnostics: tuple = ()

    def __bool__(self):
        return self.ok


def validate(g: LatticeGraph, w: PathConfig, N: int | None = None, max_ghost: int = 2,
             closed: bool = False) -> ValidationReport:
    """Check structural invariants; the report names the first violation."""
    def fail(msg):
        return ValidationReport(False, (msg,))

    if len(w.colours) != g.n_edges:
        return fail(f"expected {g.n_edges} edge colour lists, got {len(w.colours)}")
    if len(w.pairings) != g.n_vertices or len(w.ghosts) != g.n_vertices:
        return fail("pairings/ghosts length does not match the vertex count")
    for e, ce in enumerate(w.colours):
        for c in ce:
            if not isinstance(c, (int, np.integer)) or c < 1 or (N is not None and c > N):
                return fail(f"edge {e} has invalid colour {c}")
    for x in range(g.n_vertices):
        deg = sum(len(w.colours[e]) for e in g.incident[x])
        if deg % 2:
            return fail(f"odd number of links ({deg}) touching vertex {x}")
    for x in range(g.n_vertices):
        gx = w.ghosts[x]
        if gx < 0 or gx > max_ghost:
            return fail(f"ghost value {gx} at vertex {x} outside [0, {max_ghost}]")
        seen = set()
        for pair in w.pairings[x]:
            if len(pair) != 2:
                return fail(f"pairing at {x} is not a pair: {pair}")
            a, b = pair
            if a == b:
                return fail(f"link {a} paired to itself at {x}")
            for (e, p) in (a, b):
                if e < 0 or e >= g.n_edges or x not in g.edges[e]:
                    return fail(f"link {(e, p)} does not touch vertex {x}")
                if p < 0 or p >= len(w.colours[e]):
                    return fail(f"link {(e, p)} does not exist")
                if (e, p) in seen:
                    return fail(f"link {(e, p)} is in two pairs at {x}")
                seen.add((e, p))
            if w.colour(a) != w.colour(b):
                return fail(f"paired links {a}, {b} at {x} have different colours")
    if closed and not is_closed(g, w):
        return fail("configuration has unpaired links or ghost pairings")
    return ValidationReport(True)


def interaction(n: Sequence[int], vmat: np.ndarray | None) -> float:
    if vmat is None:
        return 0.0
    n = np.asarray(n, dtype=float)
    return float(n @ vmat @ n)


def _exact(lam) -> bool:
    return isinstance(lam, (int, Fraction)) and not isinstance(lam, bool)


def rpm_weight(g: LatticeGraph, w: PathConfig, vmat: np.ndarray | None, U: WeightFn, lam):
    """``prod_e lam^{m_e}/m_e! * prod_x U(n_x) * exp(-V)``."""
    exact = vmat is None and _exact(lam)
    out = Fraction(1) if exact else 1.0
    for ce in w.colours:
        m = len(ce)
        if m:
            out = out * (Fraction(lam) if exact else lam) ** m / math.factorial(m)
    n = local_times(g, w)
    for nx in n:
        u = U(nx)
        if u == 0:
            return 0 * out
        out = out * u
    if vmat is not None:
        out = out * math.exp(-interaction(n, vmat))
    return out


def relabel(g: LatticeGraph, w: PathConfig, perms: Sequence[Sequence[int]]) -> PathConfig:
    """Apply per-edge link relabellings; ``perms[e][p]`` is the new label of link ``p``."""
    colours = []
    for e, ce in enumerate(w.colours):
        new = [None] * len(ce)
        for p, c in enumerate(ce):
            new[perms[e][p]] = c
        colours.append(tuple(new))
    pairings = []
    for x in range(g.n_vertices):
        pairings.append([((a[0], perms[a[0]][a[1]]), (b[0], perms[b[0]][b[1]])) for a, b in w.pairings[x]])
    return PathConfig.build(g, colours, pairings, w.ghosts)


# ---------------------------------------------------------------------------
# cycles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cycle:
    """Closed path of a configuration.

    ``vertices[j]`` is the vertex from which ``links[j]`` is traversed; the
    traversal is stored in canonical (lexicographically least) rotation and
    orientation.
    """

    vertices: tuple
    links: tuple
    colour: int

    def __len__(self) -> int:
        return len(self.links)

    @property
    def loop(self) -> Loop:
        return Loop(self.vertices)

    @property
    def loop_class(self) -> LoopClass:
        return loop_class(self.loop)

    def visits(self, x: int) -> int:
        """Number of pairings of this cycle at ``x``."""
        return self.vertices.count(x)

    def contains(self, x: int) -> bool:
        return x in self.vertices


def _canonical_traversal(vertices: list, links: list) -> tuple:
    k = len(links)
    seqs = []
    fwd = list(zip(vertices, links))
    # reversed traversal from vertices[0]: links[k-1], links[k-2], ...
    rv = [vertices[0]] + [vertices[j] for j in range(k - 1, 0, -1)]
    rl = [links[(j - 1) % k] for j in range(k, 0, -1)]
    bwd = list(zip(rv, rl))
    best = None
    for seq in (fwd, bwd):
        for n in range(k):
            cand = tuple(seq[n:] + seq[:n])
            if best is None or cand < best:
                best = cand
    return tuple(v for v, _ in best), tuple(l for _, l in best)


def extract_cycles(g: LatticeGraph, w: PathConfig) -> list:
    """Decompose a closed configuration into its cycles."""
    partner = [dict() for _ in range(g.n_vertices)]
    for x in range(g.n_vertices):
        for a, b in w.pairings[x]:
            partner[x][a] = b
            partner[x][b] = a
    seen = set()
    cycles = []
    for e0 in range(g.n_edges):
        for p0 in range(len(w.colours[e0])):
            start = (e0, p0)
            if start in seen:
                continue
            verts, links = [], []
            x = g.edges[e0][0]
            link = start
            while True:
                if link in seen:
                    raise ValueError(f"link {link} visited twice while tracing a cycle")
                seen.add(link)
                verts.append(x)
                links.append(link)
                y = g.other_end(link[0], x)
                nxt = partner[y].get(link)
                if nxt is None:
                    raise ValueError(f"link {link} is unpaired at {y}; configuration is not closed")
                x, link = y, nxt
                if link == start:
                    if x != verts[0]:
                        raise ValueError("inconsistent cycle closure")
                    break
            cv, cl = _canonical_traversal(verts, links)
            cycles.append(Cycle(cv, cl, w.colour(start)))
    cycles.sort(key=lambda c: (c.vertices, c.links))
    return cycles


def signature2(g: LatticeGraph, w: PathConfig) -> tuple:
    """Class signature of the projected cycles and the per-colour counts.

    Returns ``(ClassSignature, {(canonical loop vertices, colour): count})``.
    """
    counts = Counter()
    colour_counts = Counter()
    classes = {}
    for ch in extract_cycles(g, w):
        cls = ch.loop_class
        classes[cls.canonical] = cls
        counts[cls.canonical] += 1
        colour_counts[(cls.canonical.vertices, ch.colour)] += 1
    sig = ClassSignature(tuple((classes[c], k) for c, k in counts.items()))
    return sig, dict(colour_counts)


def path_class_size(g: LatticeGraph, w: PathConfig) -> int:
    """Number of configurations obtained from ``w`` by relabelling links."""
    sig, cc = signature2(g, w)
    out = Fraction(1)
    for ce in w.colours:
        out *= math.factorial(len(ce))
    for cls, k in sig.entries:
        for (can, colour), kk in cc.items():
            if can == cls.canonical.vertices:
                out /= math.factorial(kk)
        out *= Fraction(cls.stretch, 2 * cls.multiplicity) ** k
    if out.denominator != 1:
        raise ArithmeticError(f"class size {out} is not an integer")
    return int(out)


def pairing_count_bound(g: LatticeGraph, m: Sequence[int]) -> int:
    """``prod_x (sum_{e at x} m_e - 1)!!``."""
    out = 1
    for x in range(g.n_vertices):
        out *= double_factorial(sum(m[e] for e in g.incident[x]) - 1)
    return out


def _perfect_matchings(items: list) -> Iterator[list]:
    if not items:
        yield []
        return
    a = items[0]
    for j in range(1, len(items)):
        rest = items[1:j] + items[j + 1:]
        for m in _perfect_matchings(rest):
            yield [(a, items[j])] + m


def count_pairings(g: LatticeGraph, colours: Sequence[Sequence[int]]) -> int:
    """Exact number of closed pairings (all links paired) for a coloured link configuration."""
    out = 1
    for x in range(g.n_vertices):
        by_colour = defaultdict(int)
        for e in g.incident[x]:
            for c in colours[e]:
                by_colour[c] += 1
        for k in by_colour.values():
            if k % 2:
                return 0
            out *= double_factorial(k - 1)
    return out


# ---------------------------------------------------------------------------
# explicit enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SiteRule:
    """Per-vertex admissibility of unpaired endpoints and ghost pairings.

    ``check`` receives the list of unpaired endpoints as ``(edge, colour)``
    tuples and returns whether the local pattern is allowed.
    """

    ghosts: tuple = (0,)
    max_unpaired: int = 0
    pairs_allowed: bool = True
    check: Callable | None = None


CLOSED = SiteRule()


def _check_source(unpaired):
    c = Counter(col for _, col in unpaired)
    return c.get(1, 0) == 1 and c.get(2, 0) == 1 and sum(c.values()) == 2


def _check_source_diag(unpaired):
    c = Counter(col for _, col in unpaired)
    return c.get(1, 0) in (0, 2) and c.get(2, 0) in (0, 2) and c.get(1, 0) + c.get(2, 0) == sum(c.values())


def source_rules(g: LatticeGraph, x: int, y: int) -> list:
    """Site rules for configurations with two open paths of colours 1 and 2 from ``x`` to ``y``."""
    rules = [CLOSED] * g.n_vertices
    if x != y:
        r = SiteRule(ghosts=(2,), max_unpaired=2, check=_check_source)
        rules[x] = r
        rules[y] = r
    else:
        rules[x] = SiteRule(ghosts=(4,), max_unpaired=4, check=_check_source_diag)
    return rules


def _max_local_time(U: WeightFn, cap: int | None, max_total_links: int | None = None) -> int:
    if cap is None and max_total_links is not None:
        # every pair at x uses two link ends, so n_x never exceeds the link count
        cap = max_total_links
    if U.is_finite_range:
        R = U.range
        return R if cap is None else min(R, cap)
    if cap is None:
        raise ValueError("infinite-range weight needs an explicit local-time or link cap")
    return cap


def _vertex_options(endpoints: tuple, rule: SiteRule, n_cap: int, U: WeightFn) -> list:
    """All (pairs, ghost) choices at one vertex for given incident coloured links."""
    out = []
    k = len(endpoints)

    def rec(i, used, pairs, unpaired):
        if i == k:
            if len(unpaired) > rule.max_unpaired:
                return
            if unpaired and rule.check is not None and not rule.check(tuple((e, c) for (e, p, c) in unpaired)):
                return
            if not unpaired and rule.check is not None and rule.max_unpaired and not rule.check(()):
                return
            for gh in rule.ghosts:
                n = len(pairs) + gh
                if n <= n_cap and U(n) != 0:
                    out.append((tuple(sorted(pairs)), gh))
            return
        if i in used:
            rec(i + 1, used, pairs, unpaired)
            return
        a = endpoints[i]
        if len(unpaired) < rule.max_unpaired:
            unpaired.append(a)
            rec(i + 1, used, pairs, unpaired)
            unpaired.pop()
        if rule.pairs_allowed and len(pairs) < n_cap:
            for j in range(i + 1, k):
                if j in used:
                    continue
                b = endpoints[j]
                if b[2] != a[2]:
                    continue
                used.add(j)
                pairs.append(((a[0], a[1]), (b[0], b[1])))
                rec(i + 1, used, pairs, unpaired)
                pairs.pop()
                used.discard(j)

    rec(0, set(), [], [])
    return out


def _link_vectors(g: LatticeGraph, dmax: Sequence[int], max_links_per_edge: int | None,
                  max_total: int | None, edge_caps: Sequence[int] | None = None) -> Iterator[tuple]:
    """Link-count vectors with even endpoint counts and per-vertex caps."""
    E = g.n_edges
    last_edge = [max(g.incident[x]) if g.incident[x] else -1 for x in range(g.n_vertices)]
    closing = defaultdict(list)
    for x in range(g.n_vertices):
        closing[last_edge[x]].append(x)
    deg = [0] * g.n_vertices
    m = [0] * E
    total_cap = max_total if max_total is not None else 10**9

    def rec(e, total):
        if e == E:
            yield tuple(m)
            return
        a, b = g.edges[e]
        cap = min(dmax[a] - deg[a], dmax[b] - deg[b], total_cap - total)
        if max_links_per_edge is not None:
            cap = min(cap, max_links_per_edge)
        if edge_caps is not None:
            cap = min(cap, edge_caps[e])
        for k in range(cap + 1):
            m[e] = k
            deg[a] += k
            deg[b] += k
            if all(deg[x] % 2 == 0 for x in closing[e]):
                yield from rec(e + 1, total + k)
            deg[a] -= k
            deg[b] -= k
        m[e] = 0

    for x in range(g.n_vertices):
        if not g.incident[x]:
            closing[-1].append(x)
    yield from rec(0, 0)


def iter_configs(g: LatticeGraph, N: int, U: WeightFn, rules: Sequence[SiteRule] | None = None, *,
                 max_local_time: int | None = None, max_links_per_edge: int | None = None,
                 max_total_links: int | None = None, edge_caps: Sequence[int] | None = None
                 ) -> Iterator[PathConfig]:
    """All configurations satisfying the site rules with ``U(n_x) > 0``.

    With the default rules only closed configurations are produced.  Every
    configuration is produced exactly once.
    """
    if rules is None:
        rules = [CLOSED] * g.n_vertices
    n_cap = _max_local_time(U, max_local_time, max_total_links)
    dmax = []
    for x in range(g.n_vertices):
        r = rules[x]
        pairs = max(0, n_cap - min(r.ghosts)) if r.pairs_allowed else 0
        dmax.append(2 * pairs + r.max_unpaired)
    cache = {}
    for m in _link_vectors(g, dmax, max_links_per_edge, max_total_links, edge_caps):
        links = [(e, p) for e in range(g.n_edges) for p in range(m[e])]
        for cols in itertools.product(range(1, N + 1), repeat=len(links)):
            colours = [[] for _ in range(g.n_edges)]
            for (e, p), c in zip(links, cols):
                colours[e].append(c)
            options = []
            ok = True
            for x in range(g.n_vertices):
                ends = tuple((e, p, colours[e][p]) for e in g.incident[x] for p in range(m[e]))
                key = (x, ends)
                opts = cache.get(key)
                if opts is None:
                    opts = _vertex_options(ends, rules[x], n_cap, U)
                    cache[key] = opts
                if not opts:
                    ok = False
                    break
                options.append(opts)
            if not ok:
                continue
            ct = tuple(tuple(c) for c in colours)
            for choice in itertools.product(*options):
                yield PathConfig(ct, tuple(c[0] for c in choice), tuple(c[1] for c in choice))


def closed_configs(g: LatticeGraph, N: int, U: WeightFn, **kw) -> Iterator[PathConfig]:
    return iter_configs(g, N, U, None, **kw)


@dataclass(frozen=True)
class PathClass:
    representative: PathConfig
    signature: ClassSignature
    colour_counts: tuple
    size: int
    weight: object  # size * mu(representative)


def enumerate_paths(g: LatticeGraph, U: WeightFn, N: int, lam, vmat=None, *,
                    max_total_links: int | None = None, max_local_time: int | None = None,
                    max_states: int = 5_000_000) -> list:
    """Closed configurations grouped into relabelling classes.

    Each class is reported once with its brute-force size (number of enumerated
    members) and total weight.
    """
    groups = {}
    count = 0
    for w in closed_configs(g, N, U, max_total_links=max_total_links, max_local_time=max_local_time):
        count += 1
        if count > max_states:
            raise RuntimeError(f"state-space cap {max_states} exceeded")
        sig, cc = signature2(g, w)
        key = (sig.key(), tuple(sorted(cc.items())))
        mu = rpm_weight(g, w, vmat, U, lam)
        if key in groups:
            rep, s, size, tot = groups[key]
            groups[key] = (rep, s, size + 1, tot + mu)
        else:
            groups[key] = (w, sig, 1, mu)
    return [PathClass(rep, s, k[1], size, tot) for k, (rep, s, size, tot) in groups.items()]


# ---------------------------------------------------------------------------
# colour-count enumeration
# ---------------------------------------------------------------------------


def _vertex_count(d: Sequence[int], u: Sequence[int]) -> int:
    """Pairings at a vertex with ``d[i]`` endpoints and ``u[i]`` unpaired of colour ``i``."""
    out = 1
    for di, ui in zip(d, u):
        r = di - ui
        if r < 0 or r % 2:
            return 0
        out *= math.comb(di, ui) * double_factorial(r - 1)
    return out


def colour_count_sum(g: LatticeGraph, N: int, U: WeightFn, lam, vmat=None, *,
                     site_options: Sequence[Sequence[tuple]] | None = None,
                     observables: dict | None = None, max_local_time: int | None = None,
                     max_total_links: int | None = None) -> dict:
    """Sum of ``mu`` over configurations grouped by per-edge colour counts.

    ``site_options[x]`` lists the admissible ``(u, ghost, factor)`` at ``x``
    where ``u`` gives the unpaired counts per colour (length ``N``).  The
    default is the closed set.  ``observables`` maps names to functions
    ``f(mc, n)`` of the edge-by-colour count array and the local-time vector;
    the result holds ``"Z"`` and ``sum mu * f`` under each name.
    """
    if site_options is None:
        site_options = [[((0,) * N, 0, 1)] for _ in range(g.n_vertices)]
    n_cap = _max_local_time(U, max_local_time)
    observables = observables or {}
    exact = vmat is None and _exact(lam)
    zero = Fraction(0) if exact else 0.0
    totals = {"Z": zero}
    for k in observables:
        totals[k] = zero
    dmax = []
    for x in range(g.n_vertices):
        umax = max(sum(u) for u, _, _ in site_options[x])
        gmin = min(gh for _, gh, _ in site_options[x])
        dmax.append(2 * max(0, n_cap - gmin) + umax)
    lamf = Fraction(lam) if exact else lam
    E = g.n_edges
    compositions = {}

    def comps(m):
        if m not in compositions:
            compositions[m] = [c for c in itertools.product(range(m + 1), repeat=N) if sum(c) == m]
        return compositions[m]

    mc = np.zeros((E, N), dtype=int)
    dcol = np.zeros((g.n_vertices, N), dtype=int)

    def leaf():
        per_vertex = []
        for x in range(g.n_vertices):
            opts = []
            for u, gh, fac in site_options[x]:
                cnt = _vertex_count(dcol[x], u)
                if cnt == 0:
                    continue
                n = (int(dcol[x].sum()) - sum(u)) // 2 + gh
                if n > n_cap:
                    continue
                uw = U(n)
                if uw == 0:
                    continue
                opts.append((cnt * fac * uw, n))
            if not opts:
                return
            per_vertex.append(opts)
        base = Fraction(1) if exact else 1.0
        for e in range(E):
            m = int(mc[e].sum())
            if m:
                base = base * lamf**m
                for c in mc[e]:
                    base = base / math.factorial(int(c))
        for choice in itertools.product(*per_vertex):
            w = base
            n = []
            for val, nx in choice:
                w = w * val
                n.append(nx)
            if vmat is not None:
                w = w * math.exp(-interaction(n, vmat))
            totals["Z"] += w
            for k, f in observables.items():
                totals[k] += w * f(mc, n)

    deg = [0] * g.n_vertices
    last_edge = [max(g.incident[x]) if g.incident[x] else -1 for x in range(g.n_vertices)]

    def rec(e, total):
        if e == E:
            leaf()
            return
        a, b = g.edges[e]
        cap = min(dmax[a] - deg[a], dmax[b] - deg[b])
        if max_total_links is not None:
            cap = min(cap, max_total_links - total)
        for m in range(cap + 1):
            deg[a] += m
            deg[b] += m
            if (last_edge[a] != e or deg[a] % 2 == 0) and (last_edge[b] != e or deg[b] % 2 == 0):
                for comp in comps(m):
                    mc[e] = comp
                    dcol[a] += comp
                    dcol[b] += comp
                    rec(e + 1, total + m)
                    dcol[a] -= comp
                    dcol[b] -= comp
                mc[e] = 0
            deg[a] -= m
            deg[b] -= m

    rec(0, 0)
    return totals


def _source_options(g: LatticeGraph, N: int, x: int, y: int, diagonal: str = "literal") -> list:
    closed = [((0,) * N, 0, 1)]
    opts = [closed for _ in range(g.n_vertices)]
    if x != y:
        u = tuple(1 if i < 2 else 0 for i in range(N))
        opts[x] = [(u, 2, 1)]
        opts[y] = [(u, 2, 1)]
    else:
        diag = []
        for a in (0, 2):
            for b in (0, 2):
                u = tuple([a, b] + [0] * (N - 2))
                gh = 4 if diagonal == "literal" else 2 + (a + b) // 2
                diag.append((u, gh, 2 ** ((a == 2) + (b == 2))))
        opts[x] = diag
    return opts


def partition_function(g: LatticeGraph, N: int, U: WeightFn, lam, vmat=None, **kw):
    """Total weight of closed configurations."""
    return colour_count_sum(g, N, U, lam, vmat, **kw)["Z"]


def directed_partition_function(g: LatticeGraph, N: int, U: WeightFn, lam, x: int, y: int,
                                vmat=None, diagonal: str = "literal", **kw):
    """Weight of configurations with two open paths (colours 1, 2) between ``x`` and ``y``.

    For ``x == y`` the unpaired counts of colours 1 and 2 at ``x`` are each 0
    or 2 and each colour with two unpaired endpoints contributes a factor 2.
    With ``diagonal="literal"`` four ghost pairings sit at ``x``.  With
    ``diagonal="balanced"`` there are ``2 + u_x / 2`` of them, the number of
    pairings lost when four links ending at a neighbour are removed, which is
    the count that appears in the order-two term of the central quantity.
    """
    if diagonal not in ("literal", "balanced"):
        raise ValueError(f"unknown diagonal convention {diagonal!r}")
    if N < 2:
        raise ValueError("two open paths need N >= 2")
    return colour_count_sum(g, N, U, lam, vmat, site_options=_source_options(g, N, x, y, diagonal), **kw)["Z"]


@dataclass(frozen=True)
class BoundReport:
    a: float
    value: float
    bound: float
    M: float
    certified: bool
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.certified and self.value <= self.bound

    def as_dict(self) -> dict:
        return {"check": "partition_bound", "pass": self.ok, "a": self.a, "lhs": self.value,
                "rhs": self.bound, "maxViolation": max(0.0, self.value - self.bound), "tolerance": 0.0, "M": self.M, "certified": self.certified,
                "diagnostic": self.diagnostic}


def partition_bound_check(g: LatticeGraph, N: int, U: WeightFn, lam, vmat=None,
                          a_values: Sequence[float] = (0.0, 0.5, 1.0), **kw) -> list:
    """Compare ``mu(prod_x e^{a n_x})`` with ``exp(lam e^a M N |E|)`` for each ``a``.

    ``M`` is the certified constant of ``general_graph_condition``; without a
    certificate the reports are marked uncertified and fail.
    """
    cond = general_graph_condition(vmat, U, n_vertices=g.n_vertices)
    obs = {f"a{i}": (lambda mc, n, a=a: math.exp(a * sum(n))) for i, a in enumerate(a_values)}
    totals = colour_count_sum(g, N, U, lam, vmat, observables=obs, **kw)
    out = []
    for i, a in enumerate(a_values):
        if not cond.ok:
            out.append(BoundReport(a, float(totals[f"a{i}"]), math.inf, cond.M, False, cond.diagnostic))
            continue
        bound = math.exp(float(lam) * math.exp(a) * cond.M * N * g.n_edges)
        out.append(BoundReport(a, float(totals[f"a{i}"]), bound, cond.M, True))
    return out
