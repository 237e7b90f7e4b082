"""Interaction potentials and weight functions.

A :class:`Potential` is a symmetric function on ``Z^d``; :func:`periodize`
folds it onto a torus with a certified bound on the truncated tail.  A
:class:`WeightFn` is the single-site weight ``U(n)`` on local times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .lattice import ExtendedTorus, LatticeGraph

__all__ = [
    "Potential",
    "PeriodizedPotential",
    "WeightFn",
    "Temperedness",
    "Goodness",
    "GraphCondition",
    "periodize",
    "temperedness",
    "goodness",
    "general_graph_condition",
    "potential_matrix",
    "extended_matrix",
    "double_factorial",
]

INF = math.inf


def double_factorial(n: int) -> int:
    """``n!!`` with the convention ``(-1)!! = 0!! = 1``."""
    if n < -1:
        raise ValueError("double factorial needs n >= -1")
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Potential:
    """Symmetric pair potential on ``Z^d``.

    Use the constructors :meth:`zero`, :meth:`delta`, :meth:`exp_family`,
    :meth:`power_family` and :meth:`table`.
    """

    kind: str
    d: int
    alpha: float = 0.0
    beta: float = 0.0
    iota: float = 0.0
    s: float = 0.0
    values: tuple = ()

    @property
    def separable(self) -> str:
        """Static flag: named families are separable, tables are unknown."""
        if self.kind in ("zero", "delta", "exp", "power"):
            return "separable"
        return "unknown"

    @staticmethod
    def zero(d: int) -> "Potential":
        return Potential("zero", d)

    @staticmethod
    def delta(alpha: float, d: int) -> "Potential":
        return Potential("delta", d, alpha=alpha)

    @staticmethod
    def exp_family(alpha: float, beta: float, iota: float, d: int) -> "Potential":
        """``alpha 1{x=0} - beta exp(-iota |x|_1) 1{x != 0}``."""
        if iota <= 0:
            raise ValueError("exp family needs iota > 0 for summability")
        return Potential("exp", d, alpha=alpha, beta=beta, iota=iota)

    @staticmethod
    def power_family(alpha: float, beta: float, s: float, d: int) -> "Potential":
        """``alpha 1{x=0} - beta |x|_1^{-s} 1{x != 0}``, needs ``s > d``."""
        if not s > d:
            raise ValueError(f"power family needs s > d (got s={s}, d={d})")
        return Potential("power", d, alpha=alpha, beta=beta, s=s)

    @staticmethod
    def table(entries: Mapping[tuple, float], d: int) -> "Potential":
        """Finite-support potential; entries must satisfy ``v(x) = v(-x)``."""
        clean = {}
        for x, val in entries.items():
            x = tuple(int(c) for c in x)
            if len(x) != d:
                raise ValueError(f"key {x} has wrong dimension")
            if val != 0:
                clean[x] = val
        for x, val in clean.items():
            mx = tuple(-c for c in x)
            if clean.get(mx, 0) != val:
                raise ValueError(f"table is not symmetric at {x}")
        return Potential("table", d, values=tuple(sorted(clean.items())))

    def __call__(self, x) -> float:
        x = tuple(int(c) for c in x)
        r = sum(abs(c) for c in x)
        if self.kind == "zero":
            return 0.0
        if self.kind == "delta":
            return self.alpha if r == 0 else 0.0
        if self.kind == "exp":
            return self.alpha if r == 0 else -self.beta * math.exp(-self.iota * r)
        if self.kind == "power":
            return self.alpha if r == 0 else -self.beta * r ** (-self.s)
        return dict(self.values).get(x, 0.0)

    def spec(self) -> dict:
        out = {"family": self.kind, "d": self.d}
        if self.kind in ("delta", "exp", "power"):
            out["alpha"] = self.alpha
        if self.kind in ("exp", "power"):
            out["beta"] = self.beta
        if self.kind == "exp":
            out["iota"] = self.iota
        if self.kind == "power":
            out["s"] = self.s
        if self.kind == "table":
            out["entries"] = [[list(k), v] for k, v in self.values]
        return out


@dataclass(frozen=True)
class PeriodizedPotential:
    """Torus potential ``v_L(x, y) = values[(y - x) mod L]``."""

    source: Potential
    L: int
    values: np.ndarray
    tail_bound: float
    shells: int

    def __call__(self, g: LatticeGraph, x: int, y: int) -> float:
        diff = tuple((b - a) % self.L for a, b in zip(g.coord(x), g.coord(y)))
        return float(self.values[diff])

    def matrix(self, g: LatticeGraph) -> np.ndarray:
        """Dense ``|V| x |V|`` matrix on a torus with matching ``L`` and ``d``."""
        if g.kind != "torus" or g.L != self.L or g.d != self.source.d:
            raise ValueError("graph does not match the periodized potential")
        from .lattice import all_coords

        c = all_coords(g)
        diff = (c[None, :, :] - c[:, None, :]) % self.L
        m = self.values[tuple(diff[..., j] for j in range(g.d))].astype(float)
        # image sums for x and -x are accumulated in different orders
        return 0.5 * (m + m.T)


def _exp_axis_sums(iota: float, L: int, shells: int) -> np.ndarray:
    r = np.arange(L)
    z = np.arange(-shells, shells + 1)
    return np.exp(-iota * np.abs(r[:, None] + L * z[None, :])).sum(axis=1)


def periodize(v: Potential, L: int, tol: float = 1e-13, max_shells: int = 4096) -> PeriodizedPotential:
    """Fold ``v`` onto the torus of side ``L`` by summing over image shifts.

    Shifts ``z`` with ``|z|_inf <= Z`` are summed directly; ``Z`` grows until
    the analytic tail bound drops below ``tol``.
    """
    d = v.d
    shape = (L,) * d
    vals = np.zeros(shape)
    if v.kind == "zero":
        return PeriodizedPotential(v, L, vals, 0.0, 0)
    if v.kind == "delta":
        vals[(0,) * d] = v.alpha
        return PeriodizedPotential(v, L, vals, 0.0, 0)
    if v.kind == "table":
        for x, val in v.values:
            vals[tuple(c % L for c in x)] += val
        return PeriodizedPotential(v, L, vals, 0.0, 0)
    if v.kind == "exp":
        q = math.exp(-v.iota * L)
        for shells in range(max_shells + 1):
            # omitted images sit at distance >= L*shells + 1 on both sides
            tail1 = 2.0 * math.exp(-v.iota * (L * shells + 1)) / (1.0 - q)
            axis = _exp_axis_sums(v.iota, L, shells)
            big = float(axis.max())
            bound = abs(v.beta) * ((big + tail1) ** d - big**d)
            if bound < tol:
                break
        else:
            raise ValueError(f"tolerance {tol} not reached within {max_shells} shells")
        prod = np.ones(shape)
        for j in range(d):
            idx = [None] * d
            idx[j] = slice(None)
            prod = prod * axis[tuple(idx)]
        vals = -v.beta * prod
        vals[(0,) * d] += v.beta + v.alpha
        return PeriodizedPotential(v, L, vals, bound, shells)
    if v.kind == "power":
        shells = 1
        while True:
            # omitted points have |x|_inf >= L*shells
            R = L * shells
            bound = abs(v.beta) * 2 * d * 3 ** (d - 1) * (R ** (d - 1 - v.s) + R ** (d - v.s) / (v.s - d))
            if bound < tol:
                break
            shells += 1
            if shells > max_shells or (2 * shells + 1) ** d * L**d > 5e7:
                raise ValueError(f"tolerance {tol} not reachable for the power family at L={L}")
        grids = np.meshgrid(*[np.arange(-L * shells, L * (shells + 1))] * d, indexing="ij")
        r1 = sum(np.abs(gr) for gr in grids)
        contrib = np.where(r1 == 0, v.alpha, -v.beta * np.power(np.maximum(r1, 1), -v.s, dtype=float))
        mods = tuple(gr % L for gr in grids)
        np.add.at(vals, mods, contrib)
        return PeriodizedPotential(v, L, vals, bound, shells)
    raise ValueError(f"unknown potential kind {v.kind}")


def potential_matrix(v, g: LatticeGraph) -> np.ndarray | None:
    """Dense potential on ``g`` from ``None``, a matrix, a periodized or raw potential."""
    if v is None:
        return None
    if isinstance(v, Potential):
        if v.kind == "zero":
            return None
        v = periodize(v, g.L)
    if isinstance(v, PeriodizedPotential):
        return v.matrix(g)
    m = np.asarray(v, dtype=float)
    if m.shape != (g.n_vertices, g.n_vertices):
        raise ValueError(f"potential matrix has shape {m.shape}, expected {(g.n_vertices,) * 2}")
    if not np.allclose(m, m.T, rtol=0, atol=0):
        raise ValueError("potential matrix is not symmetric")
    return m


def extended_matrix(vmat: np.ndarray | None, ext: ExtendedTorus) -> np.ndarray | None:
    """Lift a torus potential to the extended torus through the layer projection."""
    if vmat is None:
        return None
    return np.tile(vmat, (2, 2))


# ---------------------------------------------------------------------------
# temperedness and goodness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Temperedness:
    is_tempered: bool
    v_bar: float
    abs_sum: float
    tail_bound: float = 0.0


def temperedness(v: Potential, tol: float = 1e-13) -> Temperedness:
    """Combined constant ``v(0) + sum_x v(x) 1{v(x) < 0}`` and the absolute sum."""
    d = v.d
    if v.kind == "zero":
        return Temperedness(True, 0.0, 0.0)
    if v.kind == "delta":
        vb = v.alpha + min(v.alpha, 0.0)
        return Temperedness(vb >= 0, vb, abs(v.alpha))
    if v.kind == "table":
        vals = dict(v.values)
        v0 = vals.get((0,) * d, 0.0)
        vb = v0 + sum(val for val in vals.values() if val < 0)
        return Temperedness(vb >= 0, float(vb), float(sum(abs(x) for x in vals.values())))
    if v.kind == "exp":
        rest = (1.0 / math.tanh(v.iota / 2.0)) ** d - 1.0
        neg = -v.beta * rest if v.beta > 0 else 0.0
        vb = v.alpha + min(v.alpha, 0.0) + neg
        return Temperedness(vb >= 0, vb, abs(v.alpha) + abs(v.beta) * rest)
    if v.kind == "power":
        rest, tail = _power_sum(d, v.s, tol)
        neg = -v.beta * rest if v.beta > 0 else 0.0
        vb = v.alpha + min(v.alpha, 0.0) + neg
        # the truncated sum undercounts the attractive part by at most beta * tail
        certified = vb - abs(v.beta) * tail >= 0
        return Temperedness(certified, vb, abs(v.alpha) + abs(v.beta) * rest, abs(v.beta) * tail)
    raise ValueError(f"unknown potential kind {v.kind}")


def _power_sum(d: int, s: float, tol: float) -> tuple:
    """``sum_{x != 0} |x|_1^{-s}`` via shell counts, with a tail bound."""
    # number of x in Z^d with |x|_1 = r
    def shell(r):
        return sum(2**k * math.comb(d, k) * math.comb(r - 1, k - 1) for k in range(1, d + 1))

    total = 0.0
    r = 1
    while True:
        total += shell(r) * r ** (-s)
        # shell(r) <= 2^d r^{d-1} for r >= 1, integral comparison for the rest
        tail = 2**d * (r ** (d - s) / (s - d))
        if tail < tol or r > 10**6:
            return total, tail
        r += 1


@dataclass(frozen=True)
class Goodness:
    is_good: bool
    M: float
    method: str
    diagnostic: str = ""


@dataclass(frozen=True)
class GraphCondition:
    ok: bool
    v_bar: np.ndarray
    M: float
    diagnostic: str = ""


class WeightFn:
    """Single-site weight ``U(n)`` on local times.

    Families: ``bose`` (``U = 1``), ``spin`` (with ``convention`` either
    ``"definition"`` for ``Gamma(N/2) / (2^n Gamma(N/2 + n))`` or ``"proof"``
    without the ``2^n``), ``hard`` (``U(n) = 1{n <= R}``), ``table`` (finite list,
    zero beyond) and ``callable``.
    """

    def __init__(self, family: str, *, N: float | None = None, R: int | None = None,
                 values=None, fn: Callable | None = None, convention: str = "definition",
                 exact: bool = False):
        self.family = family
        self.N = N
        self.convention = convention
        self.exact = exact
        self._values = tuple(values) if values is not None else None
        self._fn = fn
        if family == "bose":
            self.range = INF
        elif family == "spin":
            if N is None or N <= 0:
                raise ValueError("spin weight needs N > 0")
            if convention not in ("definition", "proof"):
                raise ValueError(f"unknown spin convention {convention!r}")
            self.range = INF
        elif family == "hard":
            if R is None or R < 0:
                raise ValueError("hard-range weight needs R >= 0")
            self.range = int(R)
        elif family == "table":
            if not self._values:
                raise ValueError("table weight needs values")
            if any(u < 0 for u in self._values):
                raise ValueError("weights must be nonnegative")
            nz = [k for k, u in enumerate(self._values) if u != 0]
            self.range = max(nz) if nz else -1
        elif family == "callable":
            if fn is None:
                raise ValueError("callable weight needs fn")
            self.range = INF if R is None else int(R)
        else:
            raise ValueError(f"unknown weight family {family!r}")
        self._cache = lru_cache(maxsize=None)(self._eval)

    # constructors --------------------------------------------------------
    @staticmethod
    def bose() -> "WeightFn":
        return WeightFn("bose")

    @staticmethod
    def spin(N: float, convention: str = "definition", exact: bool = False) -> "WeightFn":
        return WeightFn("spin", N=N, convention=convention, exact=exact)

    @staticmethod
    def hard_range(R: int) -> "WeightFn":
        return WeightFn("hard", R=R)

    @staticmethod
    def table(values) -> "WeightFn":
        return WeightFn("table", values=values)

    @staticmethod
    def from_callable(fn: Callable, R: int | None = None) -> "WeightFn":
        return WeightFn("callable", fn=fn, R=R)

    def spec(self) -> dict:
        out = {"family": self.family}
        if self.family == "spin":
            out.update(N=self.N, convention=self.convention)
        if self.family == "hard":
            out["R"] = self.range
        if self.family == "table":
            out["values"] = [float(u) for u in self._values]
        return out

    # evaluation ----------------------------------------------------------
    def _eval(self, n: int):
        if n < 0:
            return 0
        f = self.family
        if f == "bose":
            return 1
        if f == "hard":
            return 1 if n <= self.range else 0
        if f == "table":
            return self._values[n] if n < len(self._values) else 0
        if f == "callable":
            return self._fn(n)
        # spin
        half = Fraction(self.N) / 2 if self.exact else self.N / 2.0
        if self.exact:
            out = Fraction(1)
            for j in range(n):
                out /= half + j
            return out / 2**n if self.convention == "definition" else out
        logu = math.lgamma(half) - math.lgamma(half + n)
        if self.convention == "definition":
            logu -= n * math.log(2.0)
        return math.exp(logu)

    def __call__(self, n: int):
        return self._cache(int(n))

    @property
    def is_finite_range(self) -> bool:
        return self.range != INF

    def ratio(self, n: int):
        """``U(n+1) / U(n)`` with ``0/0 = 1``."""
        if self.family == "spin" and n >= 0:
            # closed form; U(n) itself underflows for large n
            half = Fraction(self.N) / 2 if self.exact else self.N / 2.0
            return 1 / (2 * (half + n)) if self.convention == "definition" else 1 / (half + n)
        a, b = self(n + 1), self(n)
        if b == 0:
            return 1 if a == 0 else INF
        if isinstance(a, int) and isinstance(b, int):
            return Fraction(a, b)
        return a / b

    def __repr__(self):
        return f"WeightFn({self.spec()})"


def goodness(U: WeightFn, v_bar: float, n_max: int = 200) -> Goodness:
    """Smallest ``M`` with ``n Ubar(n+1) <= M Ubar(n)``, ``Ubar(n) = U(n) exp(-v_bar n^2)``."""
    if U.family == "bose":
        if v_bar <= 0:
            return Goodness(False, INF, "analytic",
                            "constant weight is good only for v_bar > 0")
        n0 = 1.0 / (2.0 * v_bar)
        cands = {max(1, math.floor(n0)), math.ceil(n0), 1}
        M = max(n * math.exp(-v_bar * (2 * n + 1)) for n in cands)
        return Goodness(True, M, "analytic")
    if U.family == "spin" and v_bar >= 0:
        # n U(n+1)/U(n) = n/(N+2n) or n/(N/2+n); sup over n is the limit
        M = 0.5 if U.convention == "definition" else 1.0
        if v_bar > 0:
            scan = _scan_good(U, v_bar, n_max)
            M = min(M, max(scan, 0.0)) if scan is not None else M
        return Goodness(True, M, "analytic")

    M = _scan_good(U, v_bar, n_max if not U.is_finite_range else max(n_max, U.range + 1))
    if M is None:
        return Goodness(False, INF, "scan", "U vanishes at some n and is positive at n+1")
    return Goodness(True, M, "scan" if not U.is_finite_range else "exact")


def _scan_good(U: WeightFn, v_bar: float, n_max: int):
    M = 0.0
    for n in range(0, n_max + 1):
        a = float(U(n)) * math.exp(-v_bar * n * n)
        b = float(U(n + 1)) * math.exp(-v_bar * (n + 1) ** 2)
        if a == 0:
            if n > 0 and b > 0:
                return None
            continue
        M = max(M, n * b / a)
    return M


def general_graph_condition(vG: np.ndarray | None, U: WeightFn, n_max: int = 60,
                            n_vertices: int | None = None) -> GraphCondition:
    """Per-vertex constants and the smallest ``M`` with ``U(n)(2n-1)!! e^{-vbar n^2} <= M^n``.

    For infinite-range ``U`` the check is a scan up to ``n_max``; the result is
    only accepted when the per-``n`` root is decreasing over the second half of
    the scan (otherwise no finite certificate is reported).
    """
    if vG is None:
        if n_vertices is None:
            raise ValueError("n_vertices required when vG is None")
        vbar = np.zeros(n_vertices)
    else:
        vG = np.asarray(vG, dtype=float)
        if not np.allclose(vG, vG.T):
            raise ValueError("vG must be symmetric")
        vbar = np.diag(vG) + np.where(vG < 0, vG, 0.0).sum(axis=1)
    if np.any(vbar < 0):
        return GraphCondition(False, vbar, INF, "per-vertex constant is negative")
    if float(U(0)) > 1:
        return GraphCondition(False, vbar, INF, "U(0) > 1 cannot be bounded by M^0")
    top = max(U.range, 0) if U.is_finite_range else n_max
    roots = []
    for n in range(1, top + 1):
        u = float(U(n))
        if u == 0:
            roots.append(0.0)
            continue
        # log of U(n)(2n-1)!! e^{-vbar n^2}, maximised over vertices
        logdf = math.log(double_factorial(2 * n - 1))
        worst = max(math.log(u) + logdf - vb * n * n for vb in vbar)
        roots.append(math.exp(worst / n))
    if not roots:
        return GraphCondition(True, vbar, 0.0)
    M = max(roots)
    if not U.is_finite_range:
        half = roots[len(roots) // 2:]
        if any(b > a for a, b in zip(half, half[1:])):
            return GraphCondition(False, vbar, INF,
                                  f"bound still growing at n={top}; no finite certificate")
    return GraphCondition(True, vbar, M)
