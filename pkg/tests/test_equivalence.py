import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from loopsoup.equivalence import (builtin_pairs, phi_fiber, random_path_variant, random_soup_variant,
                                  recolour_cycles, verify_observable, verify_weight_identity)
from loopsoup.lattice import build_torus, two_vertex_graph
from loopsoup.params import Potential, WeightFn
from loopsoup.rpm import enumerate_paths, extract_cycles
from loopsoup.rwls import Loop, SoupConfig, enumerate_soups, loop_class, signature

from conftest import exact_fixtures

LAM = Fraction(1, 2)


def test_fiber_size_is_stars_and_bars():
    l = Loop((0, 1))
    for k in (1, 2, 3):
        sig = signature(SoupConfig((l,) * k))
        for N in (1, 2, 3):
            assert len(phi_fiber(sig, N)) == math.comb(k + N - 1, N - 1)


def test_fiber_of_two_distinct_classes_is_a_product():
    g = build_torus(4, 1)
    sig = signature(SoupConfig((Loop((0, 1)), Loop((0, 1, 2, 3)))))
    assert len(phi_fiber(sig, 3)) == 9


@pytest.mark.parametrize("name", ["two-vertex", "four-cycle", "torus-2x2"])
@pytest.mark.parametrize("R", [1, 2])
@pytest.mark.parametrize("N", [1, 2, 3])
def test_weight_identity_fiber_by_fiber(name, R, N):
    g = exact_fixtures()[name]
    rep = verify_weight_identity(g, WeightFn.hard_range(R), N, LAM)
    assert rep.ok, rep.as_dict()
    assert rep.Z_soup == rep.Z_path
    assert all(f.fiber_complete for f in rep.fibers)


def test_weight_identity_with_potential():
    g = build_torus(4, 1)
    rep = verify_weight_identity(g, WeightFn.hard_range(2), 2, 0.6, Potential.exp_family(0.5, 0.1, 1.0, 1))
    assert rep.ok and rep.max_rel_err < 1e-12


def test_weight_identity_bose_with_step_cap():
    rep = verify_weight_identity(two_vertex_graph(), WeightFn.bose(), 2, LAM, max_steps=6)
    assert rep.ok


@pytest.mark.parametrize("name", ["N_xy", "n_x", "f1", "f3"])
def test_observable_pairs_agree(name):
    g = build_torus(4, 1)
    pair = builtin_pairs(g)[name]
    rep = verify_observable(pair, g, WeightFn.hard_range(2), 2, LAM)
    assert rep.ok, rep.as_dict()


def test_non_class_function_is_flagged():
    # colour-1 local time is not a function of the path class
    g = two_vertex_graph()
    rep = verify_observable(builtin_pairs(g)["f5"], g, WeightFn.hard_range(2), 2, LAM)
    assert not rep.path_independent and not rep.ok


@given(st.integers(0, 10**6))
def test_random_soup_variant_stays_in_class(seed):
    g = build_torus(4, 1)
    om = SoupConfig((Loop((0, 1, 2, 3)), Loop((1, 2)), Loop((1, 2))))
    var = random_soup_variant(om, random.Random(seed))
    assert signature(var) == signature(om)


def test_random_path_variant_stays_in_class():
    g = build_torus(2, 2)
    rng = random.Random(3)
    for pc in enumerate_paths(g, WeightFn.hard_range(2), 2, LAM):
        w = pc.representative
        for _ in range(4):
            var = random_path_variant(g, w, 2, rng)
            # colours may change, the colour-blind cycle structure may not
            assert sorted(loop_class(tuple(ch.vertices)).canonical.vertices for ch in extract_cycles(g, var)) == sorted(
                loop_class(tuple(ch.vertices)).canonical.vertices for ch in extract_cycles(g, w))


def test_recolour_changes_only_colours():
    g = two_vertex_graph()
    (w,) = [p.representative for p in enumerate_paths(g, WeightFn.hard_range(1), 1, LAM) if p.representative.n_links]
    cyc = extract_cycles(g, w)
    w2 = recolour_cycles(g, w, [2] * len(cyc))
    assert [c.colour for c in extract_cycles(g, w2)] == [2] * len(cyc)
    assert [len(c) for c in extract_cycles(g, w2)] == [len(c) for c in cyc]


def test_soup_classes_match_soup_weights():
    g = two_vertex_graph()
    sizes = {sc.signature.key(): sc.size for sc in enumerate_soups(g, WeightFn.hard_range(2), 1, LAM)}
    # empty, one backtrack, two backtracks, one folded loop of length 4
    assert sorted(sizes.values()) == [1, 2, 2, 4]
    assert loop_class((0, 1, 0, 1)).size == 2
