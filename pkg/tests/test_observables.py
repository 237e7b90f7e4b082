import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopsoup.lattice import build_torus, two_vertex_graph
from loopsoup.observables import (TwoPointTable, bose_correspondence_check, bose_partition_sum, cycle_length_at,
                                  diagonal_term, exact_closed_source, expectation, expected_cycle_length,
                                  loop_connection_bound, mean_link_colour, monotonicity_scan, neighbour_moment,
                                  spin_correlation, spin_crosscheck, two_point_exact, two_point_table_exact,
                                  two_point_via_cycles)
from loopsoup.params import Potential, WeightFn

from conftest import exact_fixtures

U2 = WeightFn.hard_range(2)


@given(st.fractions(min_value=Fraction(1, 20), max_value=3, max_denominator=50))
@settings(max_examples=20, deadline=None)
def test_two_vertex_two_point_hand_value(lam):
    g = two_vertex_graph()
    Z = 1 + lam**2 + lam**4
    assert two_point_exact(g, 2, U2, lam, 0, 1) == lam**4 / Z
    assert neighbour_moment(g, 2, U2, lam, 0, 1) == lam**4 / Z


@pytest.mark.parametrize("name,R", [("two-vertex", 2), ("two-vertex", 3), ("four-cycle", 2), ("torus-2x2", 2)])
def test_cycle_estimator_matches_source_ratio(name, R):
    g = exact_fixtures()[name]
    U = WeightFn.hard_range(R)
    lam = Fraction(3, 5)
    src = exact_closed_source(g, 2, U, lam)
    for y in range(1, g.n_vertices):
        G = two_point_exact(g, 2, U, lam, 0, y)
        assert two_point_via_cycles(g, U, lam, 0, y, src) == G
        assert two_point_via_cycles(g, U, lam, 0, y, src, N=2) == G


@pytest.mark.parametrize("name", ["two-vertex", "four-cycle", "torus-2x2"])
def test_neighbour_moment_is_nearest_neighbour_two_point(name):
    g = exact_fixtures()[name]
    lam = Fraction(4, 5)
    e1 = sorted(g.adjacency[0])[0]
    assert neighbour_moment(g, 2, U2, lam, 0, e1) == two_point_exact(g, 2, U2, lam, 0, e1)


def test_cycle_estimator_with_potential():
    g = build_torus(4, 1)
    v = Potential.exp_family(0.4, 0.1, 1.0, 1)
    src = exact_closed_source(g, 2, U2, 0.7, v)
    from loopsoup.params import potential_matrix
    vm = potential_matrix(v, g)
    for y in (1, 2):
        G = two_point_exact(g, 2, U2, 0.7, 0, y, v)
        assert two_point_via_cycles(g, U2, 0.7, 0, y, src, vm) == pytest.approx(G, rel=1e-12)


@pytest.mark.parametrize("diagonal", ["literal", "balanced"])
@pytest.mark.parametrize("L,R", [(4, 2), (2, 4)])
def test_diagonal_estimator(diagonal, L, R):
    g = build_torus(L, 1)
    U = WeightFn.hard_range(R)
    lam = Fraction(1, 2)
    src = exact_closed_source(g, 2, U, lam)
    est = lam**2 * expectation(src, lambda w: diagonal_term(g, w, U, 0, diagonal=diagonal))
    assert est == two_point_exact(g, 2, U, lam, 0, 0, diagonal=diagonal)


def test_literal_diagonal_vanishes_at_range_two():
    # four extra visits are needed at the source
    assert two_point_exact(two_vertex_graph(), 2, U2, Fraction(1, 2), 0, 0) == 0


def test_mean_link_colour_hand_value():
    g = two_vertex_graph()
    lam = Fraction(1, 2)
    # backtrack of colour 1: two links, weight lam^2/2; local time 2: four links of colour 1
    # with weight 9 lam^4/24, or two of each colour with total weight 6 lam^4/24
    Z = 1 + lam**2 + lam**4
    assert mean_link_colour(g, 2, U2, lam) == (lam**2 + 2 * lam**4) / Z


def test_expected_cycle_length_hand_value():
    g = two_vertex_graph()
    lam = Fraction(2, 3)
    # N = 2, R = 1: empty or a single backtrack of length 2
    assert expected_cycle_length(g, 2, WeightFn.hard_range(1), lam) == 2 * lam**2 / (1 + lam**2)


def test_cycle_length_at_averages_cycles_through_x():
    g = two_vertex_graph()
    src = exact_closed_source(g, 1, U2, 1)
    values = {cycle_length_at(g, w, 0) for w, _ in src}
    # empty, one backtrack, two backtracks, one folded loop
    assert values == {0, 2, 4}
    assert cycle_length_at(g, src[0][0], 1) in (0, 2, 4)


def test_expected_cycle_length_increases_with_lambda():
    g = build_torus(2, 2)
    vals = [expected_cycle_length(g, 2, U2, Fraction(k, 5)) for k in range(1, 6)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("name", ["two-vertex", "four-cycle", "torus-2x2"])
def test_loop_connection_bound(name):
    g = exact_fixtures()[name]
    for y in range(1, g.n_vertices):
        assert loop_connection_bound(g, 2, U2, Fraction(1, 2), 0, y).ok


def test_two_point_table_symmetry_and_csv():
    g = build_torus(4, 1)
    t = two_point_table_exact(g, 2, U2, Fraction(1, 2))
    assert t.symmetry_defect(g) < 1e-15
    lines = t.to_csv(g).strip().splitlines()
    assert len(lines) == g.n_vertices + 1


def test_monotonicity_scan_synthetic():
    g = build_torus(8, 1)
    good = TwoPointTable(8, 1, np.array([1.0, 0.5, 0.4, 0.3, 0.2, 0.3, 0.4, 0.5]), np.zeros(8), "synthetic", {})
    bad = TwoPointTable(8, 1, np.array([1.0, 0.2, 0.4, 0.3, 0.2, 0.3, 0.4, 0.2]), np.zeros(8), "synthetic", {})
    assert monotonicity_scan(g, good).ok
    assert not monotonicity_scan(g, bad).ok


@pytest.mark.parametrize("mu", [-1.0, 0.0, 0.5])
def test_bose_two_vertex_hand_value(mu):
    # two particles swapping across the edge, each jump weighted 1/2
    g = two_vertex_graph()
    assert bose_partition_sum(g, mu, None, 2) == pytest.approx(1 + math.exp(2 * mu) / 4, rel=1e-14)
    assert bose_correspondence_check(g, mu, n_max=3).ok


def test_bose_correspondence_with_potential():
    g = build_torus(4, 1)
    c = bose_correspondence_check(g, 0.3, Potential.delta(0.5, 1), n_max=4)
    assert c.ok, c.as_dict()


def test_bose_n_max_limit():
    with pytest.raises(ValueError):
        bose_correspondence_check(two_vertex_graph(), 0.0, n_max=7)


@pytest.mark.parametrize("N", [2, 3])
def test_spin_moments_at_zero_coupling(N):
    g = two_vertex_graph()
    # E[(phi^1 phi^2)^2] = 1 / (N (N + 2)) on the uniform sphere
    assert spin_correlation(g, N, 0.0, 0, 0) == pytest.approx(1 / (N * (N + 2)), abs=1e-13)
    assert spin_correlation(g, N, 0.0, 0, 1) == pytest.approx(0.0, abs=1e-15)


def test_spin_crosscheck_definition_convention():
    rep = spin_crosscheck(two_vertex_graph(), 2, 0.4)
    assert rep.ok and "definition" in rep.matches
    assert rep.tail_bound < 1e-5
