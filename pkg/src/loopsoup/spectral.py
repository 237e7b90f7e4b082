"""Fourier analysis of the two-point function, infrared and Key Inequality checks,
reflection positivity and chessboard probes, and the central quantity on the
extended torus."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import i0e

from .lattice import ExtendedTorus, LatticeGraph, dual_torus, extend_torus, reflection_planes
from .params import WeightFn, extended_matrix, potential_matrix
from .rpm import (PathConfig, SiteRule, colour_count_sum, directed_partition_function, iter_configs,
                  local_times, partition_function, rpm_weight, unpaired_links)

__all__ = [
    "FourierTable",
    "fourier_table",
    "fourier",
    "check_extended_caps",
    "inverse_fourier",
    "epsilon",
    "graph_epsilon",
    "cesaro_identity_check",
    "infrared_check",
    "laplacian",
    "laplacian_star",
    "h_from_v",
    "h_identities",
    "two_point_matrix",
    "key_inequality_check",
    "infrared_check_samples",
    "key_inequality_samples",
    "test_vectors",
    "c_sequence",
    "rw_expected_visits",
    "c_limit",
    "transform",
    "chessboard_map",
    "restriction_key",
    "all_configs",
    "reflection_positivity_probe",
    "chessboard_probe",
    "closed_chessboard_probe",
    "CentralQuantity",
    "assemble_Z2",
    "expansion_check",
    "central_chessboard_check",
]


# ---------------------------------------------------------------------------
# Fourier transform
# ---------------------------------------------------------------------------


def _grid(g: LatticeGraph, values) -> np.ndarray:
    return np.asarray(values).reshape((g.L,) * g.d)


@dataclass
class FourierTable:
    """``hat G(k)`` on the dual torus, momenta in vertex order."""

    momenta: np.ndarray
    values: np.ndarray
    imag_residue: float

    def as_rows(self) -> list:
        return [list(map(float, k)) + [float(v)] for k, v in zip(self.momenta, self.values)]


def fourier_table(g: LatticeGraph, values) -> FourierTable:
    hat = fourier(g, values)
    return FourierTable(dual_torus(g).momenta, np.real(hat), float(np.abs(np.imag(hat)).max()))


def fourier(g: LatticeGraph, values) -> np.ndarray:
    """``hat f(k) = sum_x e^{-i k.x} f(x)``, momenta ordered like vertices."""
    return np.fft.fftn(_grid(g, values)).reshape(-1)


def inverse_fourier(g: LatticeGraph, hat) -> np.ndarray:
    return np.fft.ifftn(_grid(g, hat)).reshape(-1)


def epsilon(g: LatticeGraph) -> np.ndarray:
    """``2 sum_j (1 - cos k_j)``."""
    return dual_torus(g).epsilon()


def graph_epsilon(g: LatticeGraph) -> np.ndarray:
    """Eigenvalues of minus the graph Laplacian on plane waves.

    Equal to ``epsilon`` for ``L >= 3``; with ``L = 2`` the collapsed wrap edge
    contributes ``1 - cos k_j`` once instead of twice.
    """
    k = dual_torus(g).momenta
    c = 2.0 if g.L > 2 else 1.0
    return c * np.sum(1.0 - np.cos(k), axis=1)


@dataclass
class Report:
    check: str
    lhs: float
    rhs: float
    max_violation: float
    tolerance: float
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tolerance

    def as_dict(self) -> dict:
        return {"check": self.check, "lhs": self.lhs, "rhs": self.rhs, "maxViolation": self.max_violation,
                "tolerance": self.tolerance, "pass": self.ok, **self.extra}


def cesaro_identity_check(g: LatticeGraph, values, axis: int = 0, tolerance: float = 1e-10) -> Report:
    """Both sides of the zero-mode identity for ``(2/|T|) sum_x G(x)``."""
    values = np.asarray(values, dtype=float)
    n = g.n_vertices
    hat = fourier(g, values)
    k = dual_torus(g).momenta
    c2 = np.cos(k[:, axis] / 2) ** 2
    lhs = 2.0 / n * values.sum()
    e1 = g.unit(axis)
    rhs = values[0] + values[e1] - 2.0 / n * float(np.real((c2 * hat)[1:].sum()))
    return Report("cesaro_identity", lhs, float(rhs), abs(lhs - rhs), tolerance,
                  {"imagResidue": float(np.abs(hat.imag).max())})


def infrared_check(g: LatticeGraph, values, mean_m1: float, *, stderr_hat=None, n_sigma: float = 3.0,
                   graph_eps: bool = True, tolerance: float = 1e-12) -> Report:
    """``cos^2(k1/2) hat G(k) <= cos^2(k1/2) / eps(k) (1 + 2 E m^(1))`` for all ``k != 0``.

    ``stderr_hat`` (per momentum) widens the allowance by ``n_sigma`` standard
    errors for sampled tables.
    """
    hat = np.real(fourier(g, values))
    k = dual_torus(g).momenta
    eps = graph_epsilon(g) if graph_eps else epsilon(g)
    c2 = np.cos(k[:, 0] / 2) ** 2
    worst = -np.inf
    for j in range(1, g.n_vertices):
        lhs = c2[j] * hat[j]
        rhs = c2[j] / eps[j] * (1 + 2 * mean_m1)
        slack = 0.0 if stderr_hat is None else n_sigma * c2[j] * stderr_hat[j]
        worst = max(worst, lhs - rhs - slack)
    return Report("infrared_bound", float(np.max(c2[1:] * hat[1:])), float(1 + 2 * mean_m1),
                  max(0.0, float(worst)), tolerance, {"graphEpsilon": graph_eps})


# ---------------------------------------------------------------------------
# Key Inequality
# ---------------------------------------------------------------------------


def laplacian(g: LatticeGraph, v) -> np.ndarray:
    """``(Delta v)_x = sum_{y ~ x} (v_y - v_x)``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    for a, b in g.edges:
        out[a] += v[b] - v[a]
        out[b] += v[a] - v[b]
    return out


def laplacian_star(ext: ExtendedTorus, h) -> np.ndarray:
    """``(Delta* h)_x = sum_{q ~ x} h_q`` on the extended graph."""
    h = np.asarray(h, dtype=float)
    out = np.zeros_like(h)
    for a, b in ext.graph.edges:
        out[a] += h[b]
        out[b] += h[a]
    return out


def h_from_v(ext: ExtendedTorus, v) -> np.ndarray:
    """``v`` on original vertices and ``-deg v`` on their virtual copies."""
    v = np.asarray(v, dtype=float)
    deg = ext.base.degree(0)
    return np.concatenate([v, -deg * v])


def h_identities(ext: ExtendedTorus, v) -> dict:
    """Residuals of the three identities used to derive the Key Inequality."""
    g = ext.base
    v = np.asarray(v, dtype=float)
    h = h_from_v(ext, v)
    deg = g.degree(0)
    n = ext.n
    lhs1 = sum(h[a] * h[b] for a, b in g.edges) + 0.5 * sum(h[x] * h[x + n] for x in range(n))
    rhs1 = -0.5 * sum((v[a] - v[b]) ** 2 for a, b in g.edges)
    ls = laplacian_star(ext, h)[:n]
    lhs3 = sum(h[q] ** 2 for x in range(n) for q in ext.graph.adjacency[x])
    rhs3 = deg * (1 + deg) * float((v**2).sum())
    return {"i": abs(lhs1 - rhs1), "ii": float(np.abs(ls - laplacian(g, v)).max()), "iii": abs(lhs3 - rhs3)}


def two_point_matrix(g: LatticeGraph, values) -> np.ndarray:
    """``G(x, y) = G(o, y - x)`` from a translation-invariant table."""
    coords = np.array([g.coord(x) for x in g.vertices]).reshape(g.n_vertices, g.d)
    out = np.empty((g.n_vertices, g.n_vertices))
    values = np.asarray(values, dtype=float)
    for x in range(g.n_vertices):
        for y in range(g.n_vertices):
            out[x, y] = values[g.index(coords[y] - coords[x])]
    return out


def test_vectors(g: LatticeGraph, n_random: int = 100, seed: int = 0) -> list:
    """Constant vector, coordinate waves ``cos(k1/2) cos(k.x)`` and Gaussian vectors."""
    rng = np.random.default_rng(seed)
    coords = np.array([g.coord(x) for x in g.vertices], dtype=float).reshape(g.n_vertices, g.d)
    out = [np.ones(g.n_vertices)]
    for k in dual_torus(g).momenta[1:]:
        out.append(np.cos(k[0] / 2) * np.cos(coords @ k))
    out.extend(rng.standard_normal((n_random, g.n_vertices)))
    return out


def key_inequality_check(g: LatticeGraph, Gmat: np.ndarray, mean_m1: float, vectors: Sequence,
                         tolerance: float = 1e-10) -> Report:
    """``sum G(x,y) (Dv)_x (Dv)_y <= (1 + 2 E m^(1)) sum_E (v_y - v_x)^2`` for every vector.

    Violations are measured relative to ``max(rhs, 1)``.
    """
    worst = 0.0
    first = None
    for v in vectors:
        dv = laplacian(g, v)
        lhs = float(dv @ Gmat @ dv)
        rhs = (1 + 2 * mean_m1) * sum((v[b] - v[a]) ** 2 for a, b in g.edges)
        if first is None:
            first = (lhs, rhs)
        worst = max(worst, (lhs - rhs) / max(abs(rhs), 1.0))
    return Report("key_inequality", first[0], first[1], worst, tolerance, {"vectors": len(vectors)})


def _shift_table(g: LatticeGraph) -> np.ndarray:
    coords = np.array([g.coord(z) for z in g.vertices]).reshape(g.n_vertices, g.d)
    return np.array([[g.index(coords[z] + coords[r]) for r in g.vertices] for z in g.vertices])


def _sample_verdict(name: str, D: np.ndarray, n_sigma: float, extra: dict) -> Report:
    """Each column of ``D`` must have mean <= ``n_sigma`` standard errors."""
    from .mcmc import series_stats

    worst, arg = -np.inf, None
    for j in range(D.shape[1]):
        st = series_stats(D[:, j])
        z = st.mean - n_sigma * st.stderr
        if z > worst:
            worst, arg = z, (st.mean, st.stderr)
    return Report(name, arg[0], n_sigma * arg[1], max(0.0, float(worst)), 0.0, extra)


def infrared_check_samples(g: LatticeGraph, G_series, m1_series, *, n_sigma: float = 3.0,
                           graph_eps: bool = True) -> Report:
    """Infrared bound from per-sample two-point vectors and colour-1 link counts."""
    G_series = np.asarray(G_series, dtype=float)
    m1 = np.asarray(m1_series, dtype=float)
    hat = np.real(np.stack([fourier(g, row) for row in G_series]))
    k = dual_torus(g).momenta
    eps = graph_epsilon(g) if graph_eps else epsilon(g)
    c2 = np.cos(k[:, 0] / 2) ** 2
    D = c2[None, 1:] * (hat[:, 1:] - (1 + 2 * m1[:, None]) / eps[None, 1:])
    return _sample_verdict("infrared_bound", D, n_sigma, {"graphEpsilon": graph_eps, "samples": len(m1)})


def key_inequality_samples(g: LatticeGraph, G_series, m1_series, vectors: Sequence, *,
                           n_sigma: float = 3.0) -> Report:
    """Key Inequality from per-sample translation-invariant two-point vectors."""
    G_series = np.asarray(G_series, dtype=float)
    m1 = np.asarray(m1_series, dtype=float)
    shift = _shift_table(g)
    cols = []
    for v in vectors:
        dv = laplacian(g, v)
        C = np.array([float(dv @ dv[shift[:, r]]) for r in g.vertices])
        grad = sum((v[b] - v[a]) ** 2 for a, b in g.edges)
        cols.append((G_series @ C - (1 + 2 * m1) * grad) / max(grad * (1 + 2 * m1.mean()), 1.0))
    return _sample_verdict("key_inequality", np.stack(cols, axis=1), n_sigma, {"vectors": len(vectors)})


# ---------------------------------------------------------------------------
# C_L(d) and its limit
# ---------------------------------------------------------------------------


def c_sequence(L: int, d: int, axis: int = 0) -> float:
    """``(1/L^d) sum_{k != 0} cos^2(k_axis / 2) / eps(k)`` (vectorised over the dual torus)."""
    n = np.arange(L)
    n = np.where(n > L // 2, n - L, n)
    k1 = 2 * np.pi * n / L
    grids = np.meshgrid(*([k1] * d), indexing="ij")
    eps = 2 * sum(1 - np.cos(kk) for kk in grids)
    num = np.cos(grids[axis] / 2) ** 2
    mask = eps > 0
    return float((num[mask] / eps[mask]).sum() / L**d)


def rw_expected_visits(d: int, tol: float = 1e-10) -> float:
    """Expected number of visits to the origin of simple random walk on ``Z^d`` (``d >= 3``).

    Uses ``E N_o = d int_0^inf (e^{-s} I_0(s))^d ds``.
    """
    if d <= 2:
        raise ValueError("the walk is recurrent for d <= 2; the expectation diverges")
    f = lambda s: i0e(s) ** d
    a, err_a = integrate.quad(f, 0, 50, epsabs=tol, epsrel=tol, limit=500)
    b, err_b = integrate.quad(f, 50, np.inf, epsabs=tol, epsrel=tol, limit=500)
    return d * (a + b)


def c_limit(d: int, tol: float = 1e-10) -> float:
    """``(2 E N_o - 1) / (4 d)``."""
    return (2 * rw_expected_visits(d, tol) - 1) / (4 * d)


# ---------------------------------------------------------------------------
# configuration transforms and restrictions
# ---------------------------------------------------------------------------


def transform(g: LatticeGraph, w: PathConfig, psi: Sequence[int]) -> PathConfig:
    """``(T w)_x = w_{psi(x)}`` for a graph automorphism ``psi``; link labels are kept."""
    E = [g.edge_id(psi[a], psi[b]) for a, b in g.edges]
    Einv = [0] * len(E)
    for e, f in enumerate(E):
        Einv[f] = e
    colours = tuple(w.colours[E[e]] for e in range(g.n_edges))
    pairings = []
    for x in range(g.n_vertices):
        px = []
        for a, b in w.pairings[psi[x]]:
            a2, b2 = (Einv[a[0]], a[1]), (Einv[b[0]], b[1])
            px.append((a2, b2) if a2 <= b2 else (b2, a2))
        pairings.append(tuple(sorted(px)))
    ghosts = tuple(w.ghosts[psi[x]] for x in range(g.n_vertices))
    return PathConfig(colours, tuple(pairings), ghosts)


def _base_automorphism(base: LatticeGraph, s: int) -> list:
    """Vertex map of the reflection chain carrying the origin to ``s``.

    Per axis: translation by ``s_i`` if ``s_i`` is even, ``x_i -> s_i - x_i`` otherwise.
    """
    sc = base.coord(s)
    out = []
    for x in base.vertices:
        c = base.coord(x)
        out.append(base.index([si + ci if si % 2 == 0 else si - ci for si, ci in zip(sc, c)]))
    return out


def chessboard_map(g: LatticeGraph, s: int, ext: ExtendedTorus | None = None) -> list:
    """Vertex map ``psi_s`` on ``g`` (the torus or, with ``ext``, its extension)."""
    if ext is None:
        return _base_automorphism(g, s)
    base = _base_automorphism(ext.base, s)
    n = ext.n
    return base + [b + n for b in base]


def restriction_key(g: LatticeGraph, w: PathConfig, D) -> tuple:
    """Data of ``w`` seen by a function with domain ``D``."""
    D = sorted(D)
    edges = sorted({e for x in D for e in g.incident[x]})
    return (tuple((e, w.colours[e]) for e in edges),
            tuple((x, w.pairings[x], w.ghosts[x]) for x in D))


def all_configs(g: LatticeGraph, N: int, U: WeightFn, *, ghosts=(0, 1, 2), edge_cap: int = 2,
                vertical_cap: int | None = None, ext: ExtendedTorus | None = None,
                max_unpaired: int | None = None, allow_large: bool = False) -> list:
    """All configurations with per-edge link caps (open paths and ghosts allowed).

    Caps apply per edge, so truncation commutes with every reflection.
    """
    if ext is not None:
        check_extended_caps(ext, N, U, allow_large)
    caps = None
    if ext is not None and vertical_cap is not None:
        caps = [vertical_cap if ext.is_vertical_edge(e) else edge_cap for e in range(g.n_edges)]
    else:
        caps = [edge_cap] * g.n_edges
    mu = max_unpaired if max_unpaired is not None else 2 * max(caps) * max(len(i) for i in g.incident)
    rule = SiteRule(ghosts=tuple(ghosts), max_unpaired=mu)
    return list(iter_configs(g, N, U, [rule] * g.n_vertices, edge_caps=caps))


MAX_EXT_ORIGINALS = 4
MAX_EXT_RANGE = 2
MAX_EXT_COLOURS = 2


def check_extended_caps(ext: ExtendedTorus, N: int, U: WeightFn, allow_large: bool = False) -> None:
    """Refuse extended-torus enumerations outside the measured feasible envelope.

    The envelope is at most 4 original vertices, ``R <= 2`` and ``N <= 2``;
    ``allow_large`` lifts the guard.
    """
    if allow_large:
        return
    if not U.is_finite_range:
        raise ValueError("extended-torus enumeration needs a finite-range weight")
    if ext.n > MAX_EXT_ORIGINALS or U.range > MAX_EXT_RANGE or N > MAX_EXT_COLOURS:
        raise ValueError(f"extended instance outside the enumeration envelope (originals <= {MAX_EXT_ORIGINALS}, "
                         f"R <= {MAX_EXT_RANGE}, N <= {MAX_EXT_COLOURS}); pass allow_large=True to override")


class _Interner:
    def __init__(self):
        self.index = {}

    def __call__(self, key) -> int:
        j = self.index.get(key)
        if j is None:
            j = len(self.index)
            self.index[key] = j
        return j

    def __len__(self):
        return len(self.index)


def _probe_values(kind: str, n_keys: int, rng: np.random.Generator, key_list=None, feature=None):
    if kind == "uniform":
        return rng.uniform(-1, 1, n_keys)
    if kind == "sign":
        return rng.choice([-1.0, 1.0], n_keys)
    if kind == "nonneg":
        return rng.uniform(0, 1, n_keys)
    if kind == "feature":
        # random function of a coarse feature of the key
        feats = [feature(k) for k in key_list]
        table = {}
        out = np.empty(n_keys)
        for j, f in enumerate(feats):
            if f not in table:
                table[f] = rng.choice([-1.0, 1.0])
            out[j] = table[f]
        return out
    raise ValueError(kind)


def _link_count_feature(key):
    return tuple(len(c) for _, c in key[0])


@dataclass
class ProbeReport:
    check: str
    probes: int
    min_value: float
    max_cs_violation: float
    max_symmetry_defect: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (self.min_value >= -self.tolerance and self.max_cs_violation <= self.tolerance
                and self.max_symmetry_defect <= self.tolerance)

    def as_dict(self):
        return {"check": self.check, "probes": self.probes, "minValue": self.min_value,
                "maxViolation": max(-self.min_value, self.max_cs_violation, self.max_symmetry_defect, 0.0),
                "tolerance": self.tolerance, "pass": self.ok, **self.details}


def reflection_positivity_probe(ext: ExtendedTorus, configs: list, weights: np.ndarray, *,
                                probes: int = 50, seed: int = 0, tolerance: float = 1e-12) -> ProbeReport:
    """Random functions of the restriction to the positive half, for every reflection plane.

    Checks ``mu(f Theta f) >= 0``, ``mu(f Theta g) = mu(g Theta f)`` and the
    Cauchy-Schwarz consequence.  Function kinds cycle through uniform, sign,
    link-count features and local times.
    """
    g = ext.graph
    rng = np.random.default_rng(seed)
    min_val, cs, sym = np.inf, 0.0, 0.0
    planes = reflection_planes(ext.base)
    kinds = ["uniform", "sign", "feature", "local_time"]
    per_plane = -(-probes // len(planes))
    total = 0
    scale = float(weights.sum())
    for plane in planes:
        theta = [plane.reflect_ext(ext, x) for x in range(g.n_vertices)]
        plus = [x for x in range(g.n_vertices) if plane.in_plus_ext(ext, x)]
        intern = _Interner()
        kp = np.array([intern(restriction_key(g, w, plus)) for w in configs])
        kt = np.array([intern(restriction_key(g, transform(g, w, theta), plus)) for w in configs])
        keys = [None] * len(intern)
        for k, j in intern.index.items():
            keys[j] = k
        for j in range(per_plane):
            kind = kinds[(total + j) % len(kinds)]
            fs = []
            for _ in range(2):
                if kind == "local_time":
                    # f = n_x (or a random combination) for x in the positive half
                    coef = rng.standard_normal(len(plus))
                    f_of_key = np.zeros(len(keys))
                    for jj, key in enumerate(keys):
                        f_of_key[jj] = sum(c * (len(pk[1]) + pk[2]) for c, pk in zip(coef, key[1]))
                    fs.append(f_of_key)
                else:
                    fs.append(_probe_values(kind, len(keys), rng, keys, _link_count_feature))
            f, h = fs
            ff = float(weights @ (f[kp] * f[kt]))
            hh = float(weights @ (h[kp] * h[kt]))
            fh = float(weights @ (f[kp] * h[kt]))
            hf = float(weights @ (h[kp] * f[kt]))
            min_val = min(min_val, ff / scale, hh / scale)
            sym = max(sym, abs(fh - hf) / scale)
            cs = max(cs, (fh - math.sqrt(max(ff, 0) * max(hh, 0))) / scale)
        total += per_plane
    return ProbeReport("reflection_positivity", total, float(min_val), float(cs), float(sym), tolerance,
                       {"planes": len(planes), "configs": len(configs)})


def chessboard_probe(ext: ExtendedTorus, configs: list, weights: np.ndarray, *, probes: int = 50,
                     seed: int = 0, tolerance: float = 1e-12, kinds=("nonneg", "uniform")) -> dict:
    """``mu(prod_t f_t^[t]) <= prod_t mu(prod_s f_t^[s])^{1/|T|}`` for random single-site functions."""
    g = ext.graph
    base = ext.base
    n = ext.n
    rng = np.random.default_rng(seed)
    intern = _Interner()
    D = [0, ext.up(0)]
    K = np.empty((len(configs), n), dtype=int)
    for s in range(n):
        psi = chessboard_map(g, s, ext)
        for i, w in enumerate(configs):
            K[i, s] = intern(restriction_key(g, transform(g, w, psi), D))
    worst = -np.inf
    min_rhs_factor = np.inf
    for p in range(probes):
        kind = kinds[p % len(kinds)]
        F = np.stack([_probe_values(kind, len(intern), rng) for _ in range(n)])  # F[t, key]
        lhs = float(weights @ np.prod(F[np.arange(n)[None, :], K], axis=1))
        facs = np.array([float(weights @ np.prod(F[t][K], axis=1)) for t in range(n)])
        min_rhs_factor = min(min_rhs_factor, facs.min() / weights.sum())
        if np.any(facs < 0):
            rhs = -np.inf
        else:
            rhs = float(np.prod(facs ** (1.0 / n)))
        worst = max(worst, (lhs - rhs) / weights.sum())
    return {"check": "chessboard", "probes": probes, "maxViolation": max(0.0, worst),
            "minHomogenised": float(min_rhs_factor), "tolerance": tolerance,
            "pass": bool(worst <= tolerance and min_rhs_factor >= -tolerance)}


def closed_chessboard_probe(g: LatticeGraph, configs: list, weights: np.ndarray, *, probes: int = 50,
                            seed: int = 0, tolerance: float = 1e-12) -> dict:
    """Chessboard bound for the closed-path expectation on the original torus."""
    rng = np.random.default_rng(seed)
    n = g.n_vertices
    intern = _Interner()
    K = np.empty((len(configs), n), dtype=int)
    for s in range(n):
        psi = chessboard_map(g, s)
        for i, w in enumerate(configs):
            K[i, s] = intern(restriction_key(g, transform(g, w, psi), [0]))
    P = weights / weights.sum()
    worst = -np.inf
    for p in range(probes):
        F = np.stack([_probe_values("nonneg" if p % 2 == 0 else "uniform", len(intern), rng) for _ in range(n)])
        lhs = float(P @ np.prod(F[np.arange(n)[None, :], K], axis=1))
        facs = np.array([float(P @ np.prod(F[t][K], axis=1)) for t in range(n)])
        rhs = float(np.prod(facs ** (1.0 / n))) if np.all(facs >= 0) else -np.inf
        worst = max(worst, lhs - rhs)
    return {"check": "chessboard_closed", "probes": probes, "maxViolation": max(0.0, worst),
            "tolerance": tolerance, "pass": bool(worst <= tolerance)}


# ---------------------------------------------------------------------------
# central quantity
# ---------------------------------------------------------------------------


def _vert_check(unpaired) -> bool:
    c = Counter()
    for e, col in unpaired:
        if col >= 3:
            return False
        c[(e, col)] += 1
    return all(c[(e, 1)] == c[(e, 2)] for e, _ in unpaired)


class CentralQuantity:
    """Configurations of the extended torus entering the central quantity.

    Unpaired links at original vertices come in (1, 2) pairs per edge end;
    virtual vertices carry only unpaired links.  ``max_unpaired`` caps the
    number of unpaired endpoints per vertex (a single-site restriction, so the
    truncated sum keeps the product structure used by the chessboard bound).
    The weights are grouped by their exponent pattern: ``h_x^{u_x/2}`` and
    ``(1/2)^{alpha/2}`` with ``alpha`` the vertical links unpaired at their
    original end.
    """

    def __init__(self, ext: ExtendedTorus, N: int, U: WeightFn, lam, v=None, *, max_unpaired: int = 4,
                 max_total_unpaired: int | None = None, allow_large: bool = False):
        check_extended_caps(ext, N, U, allow_large)
        self.ext = ext
        self.N = N
        self.U = U
        self.lam = lam
        self.v = v
        g = ext.graph
        vmat = potential_matrix(v, ext.base)
        self.vmat_ext = extended_matrix(vmat, ext) if vmat is not None else None
        orig = SiteRule(ghosts=(0,), max_unpaired=max_unpaired, check=_vert_check)
        virt = SiteRule(ghosts=(0,), max_unpaired=max_unpaired, pairs_allowed=False, check=_vert_check)
        rules = [orig] * ext.n + [virt] * ext.n
        patterns = defaultdict(lambda: 0)
        count = 0
        n = ext.n
        vertical = {g.edge_id(x, x + n): x for x in range(n)}
        for w in iter_configs(g, N, U, rules):
            u = [len(unpaired_links(g, w, x)) for x in range(g.n_vertices)]
            if max_total_unpaired is not None and sum(u) > max_total_unpaired:
                continue
            alpha = 0
            for x in range(n):
                e = g.edge_id(x, x + n)
                ux = unpaired_links(g, w, x)
                alpha += sum(1 for l in ux if l[0] == e)
            mu = rpm_weight(g, w, self.vmat_ext, U, lam)
            patterns[(tuple(k // 2 for k in u), alpha)] += mu
            count += 1
        self.n_configs = count
        self.patterns = dict(patterns)

    def __call__(self, h) -> object:
        """``Z(h)``; exact when the weights and ``h`` are rational."""
        total = 0
        for (half, alpha), mu in self.patterns.items():
            term = mu
            for hx, k in zip(h, half):
                if k:
                    term = term * hx**k
            if alpha:
                if alpha % 2 == 0:
                    term = term / 2 ** (alpha // 2)
                else:
                    term = term / math.sqrt(2.0**alpha)
            total = total + term
        return total


def assemble_Z2(ext: ExtendedTorus, N: int, U: WeightFn, lam, h, v=None, diagonal: str = "balanced"):
    """Order-two coefficient of the central quantity from original-torus quantities.

    ``diagonal`` selects the ghost convention for ``Z(x, x)``; only
    ``"balanced"`` accounts for the local time correctly when ``U`` is not
    constant (the two agree when both vanish, e.g. ``R = 1``).
    """
    g = ext.base
    n = ext.n
    vmat = potential_matrix(v, g)
    exact = vmat is None and isinstance(lam, (int, Fraction))
    lamv = Fraction(lam) if exact else float(lam)
    edges_m1 = {}
    obs = {f"m{e}": (lambda e: (lambda mc, nn: int(mc[e, 0])))(e) for e in range(g.n_edges)}
    t = colour_count_sum(g, N, U, lam, vmat, observables=obs)
    Z = t["Z"]
    hh = list(h)
    term1 = sum(hh[a] * hh[b] for a, b in g.edges) + Fraction(1, 2) * sum(hh[x] * hh[x + n] for x in range(n)) \
        if exact else sum(hh[a] * hh[b] for a, b in g.edges) + 0.5 * sum(hh[x] * hh[x + n] for x in range(n))
    out = lamv**2 * Z * term1
    for e, (a, b) in enumerate(g.edges):
        out = out + 2 * lamv**2 * t[f"m{e}"] * hh[a] * hh[b]
    ls = [sum(hh[q] for q in ext.graph.adjacency[x]) for x in range(n)]
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            if ls[x] == 0 or ls[y] == 0:
                continue
            Zxy = directed_partition_function(g, N, U, lam, x, y, vmat)
            out = out + lamv**4 / 2 * Zxy * ls[x] * ls[y]
    for x in range(n):
        Zxx = directed_partition_function(g, N, U, lam, x, x, vmat, diagonal=diagonal)
        sq = sum(hh[q] ** 2 for q in ext.graph.adjacency[x])
        out = out + lamv**4 / 2 * Zxx * ls[x] ** 2 - lamv**4 / 4 * Zxx * sq
    return out


def expansion_check(cq: CentralQuantity, h, phi: float = 1e-3, tolerance: float = 1e-8,
                    diagonal: str = "balanced") -> Report:
    """Richardson-extrapolated second difference of ``Z(phi h)`` against ``2 Z2(h)``."""
    exact = all(isinstance(x, Fraction) for x in h) and all(isinstance(m, Fraction) for m in cq.patterns.values())
    p1 = Fraction(phi) if exact else phi
    Z0 = cq([0 * x for x in h])

    def D(p):
        return (cq([p * x for x in h]) - 2 * Z0 + cq([-p * x for x in h])) / p**2

    fd = (4 * D(p1) - D(2 * p1)) / 3
    Z2 = assemble_Z2(cq.ext, cq.N, cq.U, cq.lam, h, cq.v, diagonal=diagonal)
    err = abs(float(fd) - 2 * float(Z2))
    scale = max(1.0, abs(2 * float(Z2)))
    return Report("polynomial_expansion", float(fd), 2 * float(Z2), err / scale, tolerance,
                  {"Z0": float(Z0), "configs": cq.n_configs, "diagonal": diagonal})


def central_chessboard_check(cq: CentralQuantity, h, tolerance: float = 1e-12) -> Report:
    """``Z(h) <= prod_x Z(h^x)^{1/|T|}`` with ``h^x`` constant on each layer."""
    n = cq.ext.n
    hf = [float(x) for x in h]
    lhs = float(cq(hf))
    facs = []
    for x in range(n):
        hx = [hf[x]] * n + [hf[x + n]] * n
        facs.append(float(cq(hx)))
    rhs = float(np.prod(np.array(facs) ** (1.0 / n))) if min(facs) >= 0 else -np.inf
    return Report("central_chessboard", lhs, rhs, max(0.0, (lhs - rhs) / max(abs(rhs), 1e-300)), tolerance)
