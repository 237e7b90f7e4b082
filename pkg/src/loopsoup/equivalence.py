"""Correspondence between loop-soup classes and random-path-model classes.

Loop-soup classes and closed path classes are both keyed by the multiset of
loop classes.  The fiber of a loop-soup class is the set of path classes with
the same multiset, one for each way of distributing the ``k`` copies of every
loop class among ``N`` colours.
"""

from __future__ import annotations

import itertools
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

from .lattice import LatticeGraph
from .params import WeightFn, potential_matrix
from .rpm import PathConfig, enumerate_paths, extract_cycles, relabel, local_times as rpm_local_times
from .rwls import ClassSignature, SoupConfig, enumerate_soups, local_time

__all__ = [
    "PhiFiber",
    "phi_fiber",
    "fiber_key",
    "FiberCheck",
    "WeightReport",
    "verify_weight_identity",
    "ObservablePair",
    "ObservableReport",
    "verify_observable",
    "builtin_pairs",
    "random_soup_variant",
    "random_path_variant",
    "recolour_cycles",
]


def _compositions(k: int, N: int):
    """Tuples of ``N`` nonnegative integers summing to ``k``."""
    for bars in itertools.combinations(range(k + N - 1), N - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(k + N - 1 - prev - 1)
        yield tuple(out)


@dataclass(frozen=True)
class PhiFiber:
    source: ClassSignature
    members: tuple  # each member: tuple over signature entries of per-colour counts

    def __len__(self):
        return len(self.members)


def phi_fiber(sig: ClassSignature, N: int) -> PhiFiber:
    per_entry = [list(_compositions(k, N)) for _, k in sig.entries]
    return PhiFiber(sig, tuple(itertools.product(*per_entry)))


def fiber_key(sig: ClassSignature, colour_counts, N: int) -> tuple:
    """Express path-class colour counts as a fiber member of ``sig``."""
    cc = dict(colour_counts)
    out = []
    for cls, k in sig.entries:
        v = cls.canonical.vertices
        out.append(tuple(cc.get((v, i), 0) for i in range(1, N + 1)))
    return tuple(out)


def _rel_err(a, b) -> float:
    if a == b:
        return 0.0
    scale = max(abs(float(a)), abs(float(b)))
    return abs(float(a) - float(b)) / scale if scale else 0.0


@dataclass(frozen=True)
class FiberCheck:
    signature: tuple
    lhs: object
    rhs: object
    rel_err: float
    fiber_complete: bool

    def as_dict(self) -> dict:
        return {"signature": [[list(v), k] for v, k in self.signature], "lhs": float(self.lhs),
                "rhs": float(self.rhs), "relErr": self.rel_err, "fiberComplete": self.fiber_complete}


@dataclass
class WeightReport:
    fibers: list
    Z_soup: object
    Z_path: object
    missing_in_soup: list
    missing_in_path: list
    tolerance: float
    max_rel_err: float = 0.0

    @property
    def ok(self) -> bool:
        return (not self.missing_in_soup and not self.missing_in_path
                and all(f.fiber_complete for f in self.fibers)
                and self.max_rel_err <= self.tolerance
                and _rel_err(self.Z_soup, self.Z_path) <= self.tolerance)

    def as_dict(self) -> dict:
        return {"check": "weight_identity", "pass": self.ok, "tolerance": self.tolerance,
                "maxRelErr": self.max_rel_err, "Z_soup": float(self.Z_soup), "Z_path": float(self.Z_path),
                "fibers": [f.as_dict() for f in self.fibers],
                "missingInSoup": [list(map(list, k)) for k in self.missing_in_soup],
                "missingInPath": [list(map(list, k)) for k in self.missing_in_path]}


def verify_weight_identity(g: LatticeGraph, U: WeightFn, N: int, lam, v=None,
                           max_steps: int | None = None, tolerance: float = 1e-12) -> WeightReport:
    """Compare every loop-soup class weight with the total weight of its fiber."""
    vmat = potential_matrix(v, g) if v is not None else None
    soups = {sc.signature.key(): sc for sc in enumerate_soups(g, U, N, lam, vmat, max_steps)}
    paths = defaultdict(list)
    for pc in enumerate_paths(g, U, N, lam, vmat, max_total_links=max_steps):
        paths[pc.signature.key()].append(pc)
    fibers = []
    max_err = 0.0
    for key, sc in sorted(soups.items()):
        members = paths.get(key, [])
        rhs = sum((pc.weight for pc in members), 0 * sc.weight)
        expected = set(phi_fiber(sc.signature, N).members)
        got = {fiber_key(pc.signature, pc.colour_counts, N) for pc in members}
        # fiber members with zero weight are skipped by the path enumerator only if U kills them
        complete = got == expected or (got <= expected and sc.weight == 0)
        err = _rel_err(sc.weight, rhs)
        max_err = max(max_err, err)
        fibers.append(FiberCheck(key, sc.weight, rhs, err, complete))
    missing_in_soup = sorted(k for k in paths if k not in soups)
    missing_in_path = sorted(k for k, sc in soups.items() if k not in paths and sc.weight != 0)
    Zs = sum((sc.weight for sc in soups.values()), 0)
    Zp = sum((pc.weight for ms in paths.values() for pc in ms), 0)
    return WeightReport(fibers, Zs, Zp, missing_in_soup, missing_in_path, tolerance, max_err)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def random_soup_variant(omega: SoupConfig, rng: random.Random) -> SoupConfig:
    """Random member of the class of ``omega``: reorder, re-root and reverse loops."""
    loops = list(omega.loops)
    rng.shuffle(loops)
    out = []
    for l in loops:
        if rng.random() < 0.5:
            l = l.reversed()
        out.append(l.shift(rng.randrange(len(l))))
    return SoupConfig(tuple(out))


def recolour_cycles(g: LatticeGraph, w: PathConfig, colours: list) -> PathConfig:
    """Give the ``j``-th cycle of ``extract_cycles(w)`` the colour ``colours[j]``."""
    new = [list(c) for c in w.colours]
    for ch, c in zip(extract_cycles(g, w), colours):
        for e, p in ch.links:
            new[e][p] = c
    return PathConfig(tuple(tuple(c) for c in new), w.pairings, w.ghosts)


def random_path_variant(g: LatticeGraph, w: PathConfig, N: int, rng: random.Random) -> PathConfig:
    """Random relabelling of links followed by a random recolouring of cycles."""
    perms = []
    for ce in w.colours:
        p = list(range(len(ce)))
        rng.shuffle(p)
        perms.append(p)
    w2 = relabel(g, w, perms)
    n_cycles = len(extract_cycles(g, w2))
    return recolour_cycles(g, w2, [rng.randint(1, N) for _ in range(n_cycles)])


@dataclass(frozen=True)
class ObservablePair:
    """A loop-soup function ``f(omega)`` and a path function ``ft(g, w)``."""

    name: str
    f: Callable
    ft: Callable


def builtin_pairs(g: LatticeGraph, x: int = 0, y: int | None = None, A=None) -> dict:
    """Standard observable pairs on ``g``."""
    if y is None:
        y = sorted(g.adjacency[x])[0]
    o, e1 = x, y
    A = tuple(A) if A is not None else (x, y)

    def n_loops_xy(omega):
        return sum(1 for l in omega.loops if x in l.vertices and y in l.vertices)

    def n_cycles_xy(g_, w):
        return sum(1 for ch in extract_cycles(g_, w) if ch.contains(x) and ch.contains(y))

    def nx_soup(omega):
        return local_time(omega, x)

    def nx_path(g_, w):
        return rpm_local_times(g_, w)[x]

    def edge_loop(omega):
        return int(any(l.vertices in ((o, e1), (e1, o)) for l in omega.loops))

    e = g.edge_id(o, e1)

    def paired_twice(g_, w):
        for a, b in w.pairings[o]:
            if a[0] == e and b[0] == e and w.partner(e1, a) == b:
                return 1
        return 0

    def touches_all_soup(omega):
        return int(any(all(z in l.vertices for z in A) for l in omega.loops))

    def touches_all_path(g_, w):
        return int(any(all(ch.contains(z) for z in A) for ch in extract_cycles(g_, w)))

    def colour1_local(g_, w):
        return sum(1 for a, _ in w.pairings[x] if w.colour(a) == 1)

    return {
        "N_xy": ObservablePair("N_xy", n_loops_xy, n_cycles_xy),
        "n_x": ObservablePair("n_x", nx_soup, nx_path),
        "f1": ObservablePair("f1", edge_loop, paired_twice),
        "f3": ObservablePair("f3", touches_all_soup, touches_all_path),
        "f5": ObservablePair("f5", nx_soup, colour1_local),
    }


@dataclass
class ObservableReport:
    name: str
    soup_value: object
    path_value: object
    rel_err: float
    tolerance: float
    soup_independent: bool
    path_independent: bool
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.soup_independent and self.path_independent and self.rel_err <= self.tolerance

    def as_dict(self) -> dict:
        return {"check": f"observable:{self.name}", "pass": self.ok, "lhs": float(self.soup_value),
                "rhs": float(self.path_value), "relErr": self.rel_err, "tolerance": self.tolerance,
                "soupIndependent": self.soup_independent, "pathIndependent": self.path_independent,
                "diagnostic": self.diagnostic}


def verify_observable(pair: ObservablePair, g: LatticeGraph, U: WeightFn, N: int, lam, v=None,
                      max_steps: int | None = None, tolerance: float = 1e-12, probes: int = 8,
                      seed: int = 0) -> ObservableReport:
    """Compare truncated expectations of a paired observable in both models.

    Before comparing, each function is evaluated on random members of every
    class; if it is not constant there the report says so and fails.
    """
    rng = random.Random(seed)
    vmat = potential_matrix(v, g) if v is not None else None
    soup_ok, path_ok = True, True
    diag = ""
    num_s, den_s = 0, 0
    for sc in enumerate_soups(g, U, N, lam, vmat, max_steps):
        rep = sc.representative
        val = pair.f(rep)
        for _ in range(probes):
            if pair.f(random_soup_variant(rep, rng)) != val:
                soup_ok = False
                diag = diag or f"loop-soup function varies within class {sc.signature.key()}"
                break
        num_s = num_s + sc.weight * val
        den_s = den_s + sc.weight
    num_p, den_p = 0, 0
    for pc in enumerate_paths(g, U, N, lam, vmat, max_total_links=max_steps):
        val = pair.ft(g, pc.representative)
        for _ in range(probes):
            if pair.ft(g, random_path_variant(g, pc.representative, N, rng)) != val:
                path_ok = False
                diag = diag or f"path function varies within class {pc.signature.key()}"
                break
        num_p = num_p + pc.weight * val
        den_p = den_p + pc.weight
    Es = num_s / den_s
    Ep = num_p / den_p
    return ObservableReport(pair.name, Es, Ep, _rel_err(Es, Ep), tolerance, soup_ok, path_ok, diag)
