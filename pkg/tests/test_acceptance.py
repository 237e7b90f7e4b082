"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from loopsoup import spectral as sp
from loopsoup.equivalence import builtin_pairs, verify_observable, verify_weight_identity
from loopsoup.lattice import build_torus, extend_torus, two_vertex_graph
from loopsoup.mcmc import Sampler, exactness_test, run_chain, standard_observables
from loopsoup.observables import (bose_correspondence_check, exact_closed_source, expectation,
                                  expected_cycle_length, mean_link_colour, neighbour_moment, neighbour_term,
                                  spin_crosscheck, two_point_exact, two_point_table_exact, two_point_via_cycles)
from loopsoup.params import Potential, WeightFn
from loopsoup.rpm import enumerate_paths, local_times, partition_bound_check, path_class_size, relabel, rpm_weight
from loopsoup.rwls import Loop, SoupConfig, config_class_size, enumerate_loop_classes, signature

from conftest import exact_fixtures


def verdict(record, n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    record(line)
    assert ok, line


def closed_walk_count(g, k):
    A = np.zeros((g.n_vertices, g.n_vertices), dtype=np.int64)
    for a, b in g.edges:
        A[a, b] = A[b, a] = 1
    return int(np.trace(np.linalg.matrix_power(A, k)))


def rooted_orbit(vertices):
    k = len(vertices)
    rev = (vertices[0],) + tuple(reversed(vertices[1:]))
    return {seq[n:] + seq[:n] for seq in (tuple(vertices), rev) for n in range(k)}


def ordered_config_count(loops):
    orbits = [sorted(rooted_orbit(l.vertices)) for l in loops]
    out = set()
    for perm in itertools.permutations(range(len(loops))):
        out.update(itertools.product(*[orbits[i] for i in perm]))
    return len(out)


def relabel_orbit(g, w):
    perms = [list(itertools.permutations(range(len(c)))) for c in w.colours]
    return len({relabel(g, w, list(choice)) for choice in itertools.product(*perms)})


# ---------------------------------------------------------------------------


def test_criterion_01_orbit_sizes(record):
    t0 = time.time()
    checked = {"loops": 0, "configs": 0, "paths": 0}
    bad = []
    for name, g in exact_fixtures().items():
        classes = enumerate_loop_classes(g, 8)
        for k in range(2, 9, 2):
            # rooted oriented loops of length k are the closed walks of length k
            total = sum(c.size for c in classes if c.length == k)
            if total != closed_walk_count(g, k):
                bad.append((name, "walks", k))
        for c in classes:
            checked["loops"] += 1
            if c.size != len(rooted_orbit(c.canonical.vertices)):
                bad.append((name, "loop", c.canonical.vertices))
        short = [c for c in classes if c.length <= 4]
        for r in (1, 2, 3):
            for combo in itertools.combinations_with_replacement(short, r):
                loops = tuple(c.canonical for c in combo)
                checked["configs"] += 1
                if config_class_size(signature(SoupConfig(loops))) != ordered_config_count(loops):
                    bad.append((name, "config", [l.vertices for l in loops]))
        for N, R in ((1, 2), (2, 2)):
            for pc in enumerate_paths(g, WeightFn.hard_range(R), N, Fraction(1)):
                w = pc.representative
                if w.n_links > 8:
                    continue
                checked["paths"] += 1
                if not (path_class_size(g, w) == pc.size == relabel_orbit(g, w)):
                    bad.append((name, "path", pc.size))
    dt = time.time() - t0
    verdict(record, 1, not bad and dt < 60,
            f"orbit sizes exact: {checked['loops']} loop classes, {checked['configs']} soup classes, "
            f"{checked['paths']} path classes; mismatches {len(bad)}; {dt:.1f}s")


def test_criterion_02_equivalence(record):
    worst, n = 0.0, 0
    ok = True
    for name, g in exact_fixtures().items():
        for R in (1, 2):
            U = WeightFn.hard_range(R)
            for N in (1, 2, 3):
                for v in (None, Potential.delta(0.3, g.d)):
                    lam = Fraction(3, 5) if v is None else 0.6
                    rep = verify_weight_identity(g, U, N, lam, v)
                    ok &= rep.ok
                    worst = max(worst, rep.max_rel_err)
                    n += 1
                    for pname in ("N_xy", "n_x"):
                        o = verify_observable(builtin_pairs(g)[pname], g, U, N, lam, v)
                        ok &= o.ok
                        worst = max(worst, o.rel_err)
                        n += 1
    verdict(record, 2, ok and worst <= 1e-12,
            f"fiber-by-fiber weights and N_xy, n_x on {n} instances; max rel err {worst:.1e}")


def test_criterion_03_two_point_identities(record):
    worst = 0.0
    U = WeightFn.hard_range(2)
    for name, g in exact_fixtures().items():
        for lam in (Fraction(1, 2), Fraction(6, 5)):
            src = exact_closed_source(g, 2, U, lam)
            for y in range(1, g.n_vertices):
                G = two_point_exact(g, 2, U, lam, 0, y)
                worst = max(worst, abs(float(G - two_point_via_cycles(g, U, lam, 0, y, src))))
            e1 = sorted(g.adjacency[0])[0]
            G1 = two_point_exact(g, 2, U, lam, 0, e1)
            worst = max(worst, abs(float(G1 - neighbour_moment(g, 2, U, lam, 0, e1))))
    verdict(record, 3, worst <= 1e-12, f"Z(x,y) ratio = cycle estimator, G(o,e1) = E[m1 m2]; max diff {worst:.1e}")


def test_criterion_04_partition_bound(record):
    rows = []
    ok = True
    for name, g in exact_fixtures().items():
        for N in (1, 2, 3):
            for r in partition_bound_check(g, N, WeightFn.hard_range(2), 0.8, a_values=(0.0, 0.5, 1.0)):
                ok &= r.certified and r.ok
                rows.append(r.value / r.bound)
    verdict(record, 4, ok, f"{len(rows)} certified instances with a in {{0, 0.5, 1}}; max lhs/rhs {max(rows):.3f}")


def test_criterion_05_mcmc_exactness(record):
    worst = 0.0
    ok = True
    cases = [(two_vertex_graph(), N, R) for N in (1, 2) for R in (1, 2)] + [(build_torus(4, 1), 2, 1)]
    for g, N, R in cases:
        rep = exactness_test(g, N, WeightFn.hard_range(R), 0.8)
        ok &= rep.ok and rep.irreducible
        worst = max(worst, rep.stationary_error)
    verdict(record, 5, ok and worst <= 1e-10, f"{len(cases)} chains irreducible; max stationary error {worst:.1e}")


def _exact_moments(g, N, U, lam):
    e = g.edge_id(0, sorted(g.adjacency[0])[0])
    src = exact_closed_source(g, N, U, lam)
    return e, {"n_o": float(expectation(src, lambda w: local_times(g, w)[0])),
               "m1m2": float(expectation(src, lambda w: neighbour_term(w, e))),
               "m_e_2": float(expectation(src, lambda w: int(len(w.colours[e]) == 2)))}


def test_criterion_06_mcmc_vs_enumeration(record):
    t0 = time.time()
    worst = 0.0
    for g, lam in ((two_vertex_graph(), 0.8), (build_torus(4, 1), 0.6)):
        U = WeightFn.hard_range(2)
        e, exact = _exact_moments(g, 2, U, lam)
        s = Sampler(g, 2, U, lam)
        r = run_chain(s, seed=2, samples=100_000, thermalization=5000, thinning=2,
                      observables={k: standard_observables(s, e=e)[k] for k in exact})
        for k, v in exact.items():
            st = r.stats(k)
            worst = max(worst, abs(st.mean - v) / st.stderr)
    dt = time.time() - t0
    verdict(record, 6, worst <= 3 and dt < 600,
            f"E[n_o], E[m1 m2], P(m_e=2) over 1e5 samples: worst |z| {worst:.2f}; {dt:.0f}s")


def test_criterion_07_spectral(record):
    U = WeightFn.hard_range(2)
    msgs = []
    ok = True
    rt = 0.0
    for name, g in exact_fixtures().items():
        G = two_point_table_exact(g, 2, U, Fraction(1, 2), diagonal="balanced").values
        m1 = float(mean_link_colour(g, 2, U, Fraction(1, 2)))
        rt = max(rt, float(np.abs(sp.inverse_fourier(g, sp.fourier(g, G)) - G).max()))
        ok &= sp.cesaro_identity_check(g, G, tolerance=1e-12).ok
        ok &= sp.infrared_check(g, G, m1).ok
        ok &= sp.key_inequality_check(g, sp.two_point_matrix(g, G), m1, sp.test_vectors(g, 50)).ok
    msgs.append(f"exact fixtures ok={ok}")
    g = build_torus(4, 3)
    for lam in (0.2, 1.0):
        s = Sampler(g, 2, WeightFn.hard_range(3), lam)
        r = run_chain(s, seed=3, samples=2000, thermalization=20000, thinning=50,
                      observables=standard_observables(s, two_point=True))
        Gs = np.asarray(r.series["G"])
        rt = max(rt, float(np.abs(sp.inverse_fourier(g, sp.fourier(g, Gs.mean(0))) - Gs.mean(0)).max()))
        ir = sp.infrared_check_samples(g, Gs, r.series["m1"])
        ki = sp.key_inequality_samples(g, Gs, r.series["m1"], sp.test_vectors(g, 20))
        ok &= ir.ok and ki.ok
        msgs.append(f"4^3 lambda={lam}: infrared {ir.ok}, key {ki.ok}")
    seq = [sp.c_sequence(L, 3) for L in (4, 8, 16, 32)]
    lim = sp.c_limit(3)
    mono = all(a < b for a, b in zip(seq, seq[1:]))
    ok &= mono and abs(seq[-1] - lim) < 0.01 and rt <= 1e-10
    msgs.append(f"C_L {['%.5f' % c for c in seq]} -> {lim:.5f}; round trip {rt:.1e}")
    verdict(record, 7, ok, "; ".join(msgs))


def test_criterion_08_reflection_and_chessboard(record):
    worst = 0.0
    ok = True
    n = 0
    for g, cap in ((two_vertex_graph(), 2), (build_torus(4, 1), 1)):
        ext = extend_torus(g)
        for R in (1, 2):
            U = WeightFn.hard_range(R)
            configs = sp.all_configs(ext.graph, 2, U, ext=ext, edge_cap=cap)
            w = np.array([float(rpm_weight(ext.graph, c, None, U, 0.6)) for c in configs])
            rp = sp.reflection_positivity_probe(ext, configs, w, probes=50)
            cb = sp.chessboard_probe(ext, configs, w, probes=50)
            ok &= rp.ok and cb["pass"]
            worst = max(worst, rp.as_dict()["maxViolation"], cb["maxViolation"])
            n += 1
    verdict(record, 8, ok and worst <= 1e-12, f"{n} extended instances, 50 probes each; max violation {worst:.1e}")


def test_criterion_09_expansion(record):
    ext = extend_torus(two_vertex_graph())
    U = WeightFn.hard_range(2)
    cq = sp.CentralQuantity(ext, 2, U, Fraction(1, 2))
    rng = np.random.default_rng(9)
    worst, literal = 0.0, 0.0
    for _ in range(10):
        h = [Fraction(int(z), 8) for z in rng.integers(-8, 9, size=ext.graph.n_vertices)]
        rep = sp.expansion_check(cq, h)
        worst = max(worst, rep.max_violation)
        literal = max(literal, sp.expansion_check(cq, h, diagonal="literal").max_violation)
    verdict(record, 9, worst <= 1e-8,
            f"10 directions, balanced diagonal: max rel err {worst:.1e} (literal diagonal: {literal:.1e})")


def test_criterion_10_bose(record):
    worst = 0.0
    n = 0
    for g in (two_vertex_graph(), build_torus(4, 1)):
        for mu in (-0.5, 0.0, 0.4):
            for v in (None, Potential.delta(0.2, 1)):
                c = bose_correspondence_check(g, mu, v, n_max=4)
                worst = max(worst, c.rel_err)
                n += 1
    verdict(record, 10, worst <= 1e-10, f"{n} instances with nMax=4; max rel err {worst:.1e}")


def test_criterion_11_spin(record):
    parts = []
    ok = True
    for N, beta in ((2, 0.5), (3, 0.3)):
        rep = spin_crosscheck(two_vertex_graph(), N, beta)
        ok &= rep.ok
        parts.append(f"(N={N}, beta={beta}) spin {rep.spin_side:.9f} definition {rep.loop_definition:.9f} "
                     f"proof {rep.loop_proof:.9f} matches {rep.matches}")
    verdict(record, 11, ok, "; ".join(parts))


LAMBDA_GRID_EXACT = [Fraction(k, 5) for k in range(1, 6)]
LAMBDA_GRID_MCMC = [0.1, 0.15, 0.2, 0.3, 0.5]


def test_criterion_12_monotonicity(record):
    g = build_torus(2, 2)
    U = WeightFn.hard_range(2)
    ces = [float(np.mean(two_point_table_exact(g, 2, U, lam).values)) for lam in LAMBDA_GRID_EXACT]
    gam = [float(expected_cycle_length(g, 2, U, lam)) for lam in LAMBDA_GRID_EXACT]
    ok = all(a < b for a, b in zip(ces, ces[1:])) and all(a < b for a, b in zip(gam, gam[1:]))
    g3 = build_torus(4, 3)
    U3 = WeightFn.hard_range(3)
    rows = []
    for lam in LAMBDA_GRID_MCMC:
        s = Sampler(g3, 2, U3, lam)
        obs = standard_observables(s, two_point=True)
        G = obs.pop("G")
        obs = {"ces": lambda st, G=G: float(np.mean(G(st))), "gamma": obs["gamma"]}
        r = run_chain(s, seed=7, samples=20000, thermalization=20000, thinning=50, observables=obs)
        rows.append((r.stats("ces"), r.stats("gamma")))
    zs = []
    for (a_c, a_g), (b_c, b_g) in zip(rows, rows[1:]):
        zs.append((b_c.mean - a_c.mean) / math.hypot(a_c.stderr, b_c.stderr))
        zs.append((b_g.mean - a_g.mean) / math.hypot(a_g.stderr, b_g.stderr))
    ok &= min(zs) > 3
    verdict(record, 12, ok,
            f"2x2 exact Cesaro {['%.4g' % c for c in ces]}, E|Gamma| {['%.3f' % c for c in gam]}; "
            f"4^3 MCMC over lambda {LAMBDA_GRID_MCMC}: min separation {min(zs):.2f} sigma")
