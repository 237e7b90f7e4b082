import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopsoup.lattice import build_torus, two_vertex_graph
from loopsoup.params import (Potential, WeightFn, double_factorial, general_graph_condition, goodness, periodize,
                             potential_matrix, temperedness)


def brute_periodized(v, L, d, reach):
    out = np.zeros((L,) * d)
    for z in itertools.product(range(-reach, reach + 1), repeat=d):
        out[tuple(c % L for c in z)] += v(z)
    return out


def test_double_factorial():
    assert [double_factorial(n) for n in (-1, 0, 1, 2, 3, 5, 7)] == [1, 1, 1, 2, 3, 15, 105]


def test_power_family_needs_s_above_d():
    with pytest.raises(ValueError):
        Potential.power_family(1.0, 0.1, 2.0, 2)
    Potential.power_family(1.0, 0.1, 2.5, 2)


def test_exp_family_needs_positive_decay():
    with pytest.raises(ValueError):
        Potential.exp_family(1.0, 0.1, 0.0, 1)


def test_table_must_be_symmetric():
    with pytest.raises(ValueError):
        Potential.table({(1,): 0.5}, 1)
    v = Potential.table({(0,): 1.0, (1,): -0.2, (-1,): -0.2}, 1)
    assert v((1,)) == -0.2 and v((2,)) == 0.0


def test_separability_flags():
    assert Potential.delta(1.0, 1).separable == "separable"
    assert Potential.table({(0,): 1.0}, 1).separable == "unknown"


@pytest.mark.parametrize("d,L", [(1, 4), (2, 4), (3, 2)])
def test_periodized_exp_matches_brute_sum(d, L):
    v = Potential.exp_family(1.0, 0.3, 1.5, d)
    p = periodize(v, L)
    ref = brute_periodized(v, L, d, 30 if d < 3 else 20)
    assert np.max(np.abs(p.values - ref)) < 1e-11
    assert p.tail_bound < 1e-13


def test_periodized_power_matches_brute_sum():
    v = Potential.power_family(1.0, 0.3, 6.0, 1)
    p = periodize(v, 4, tol=1e-9)
    ref = brute_periodized(v, 4, 1, 4000)
    assert np.max(np.abs(p.values - ref)) < 1e-9


@given(st.integers(0, 15), st.integers(0, 15))
def test_periodized_potential_is_translation_invariant(a, b):
    g = build_torus(4, 2)
    m = potential_matrix(Potential.exp_family(0.7, 0.2, 1.0, 2), g)
    shift = (1, 3)
    ta, tb = g.translate(a, shift), g.translate(b, shift)
    assert m[a, b] == pytest.approx(m[ta, tb], rel=1e-13)
    assert m[a, b] == m[b, a]


def test_potential_matrix_rejects_asymmetric():
    g = two_vertex_graph()
    with pytest.raises(ValueError):
        potential_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]), g)


def test_temperedness_exp_closed_form():
    v = Potential.exp_family(2.0, 0.3, 1.0, 2)
    t = temperedness(v)
    brute = sum(math.exp(-abs(a) - abs(b)) for a in range(-60, 61) for b in range(-60, 61)) - 1
    assert t.v_bar == pytest.approx(2.0 - 0.3 * brute, rel=1e-12)
    assert t.is_tempered


def test_temperedness_power_brute_sum():
    v = Potential.power_family(1.0, 0.05, 4.0, 1)
    t = temperedness(v, tol=1e-10)
    brute = 2 * sum(r**-4.0 for r in range(1, 200000))
    assert t.v_bar == pytest.approx(1.0 - 0.05 * brute, abs=1e-9)


def test_attractive_potential_is_not_tempered():
    assert not temperedness(Potential.exp_family(0.1, 1.0, 0.5, 1)).is_tempered


def test_spin_weight_definition_values():
    U = WeightFn.spin(3, exact=True)
    # Gamma(3/2) / (2^n Gamma(3/2 + n))
    assert U(0) == 1
    assert U(1) == Fraction(1, 3)
    assert U(2) == Fraction(1, 3) * Fraction(1, 5)
    Uf = WeightFn.spin(3)
    assert Uf(4) == pytest.approx(float(U(4)), rel=1e-12)


@given(st.integers(2, 8), st.integers(0, 200))
def test_spin_goodness_ratio(N, n):
    U = WeightFn.spin(N)
    assert n * U.ratio(n) == pytest.approx(n / (N + 2 * n), rel=1e-12)
    assert n * U.ratio(n) <= 0.5
    if n <= 60:
        assert U(n + 1) / U(n) == pytest.approx(U.ratio(n), rel=1e-10)


def test_goodness_spin_reports_half():
    g = goodness(WeightFn.spin(2), 0.0)
    assert g.is_good and g.M == 0.5


def test_goodness_bose_needs_positive_vbar():
    assert not goodness(WeightFn.bose(), 0.0).is_good
    g = goodness(WeightFn.bose(), 0.1)
    brute = max(n * math.exp(-0.1 * (2 * n + 1)) for n in range(1, 1000))
    assert g.M == pytest.approx(brute, rel=1e-12)


def test_goodness_hard_range_exact():
    g = goodness(WeightFn.hard_range(3), 0.0)
    assert g.is_good and g.method == "exact"
    assert g.M == 2.0  # n U(n+1)/U(n) is largest at n = 2


def test_general_graph_condition_hard_range():
    c = general_graph_condition(None, WeightFn.hard_range(2), n_vertices=3)
    assert c.ok
    assert c.M == pytest.approx(max(1.0, 3.0**0.5))


def test_general_graph_condition_negative_vbar():
    vm = np.array([[0.0, -1.0], [-1.0, 0.0]])
    assert not general_graph_condition(vm, WeightFn.hard_range(2)).ok


def test_general_graph_condition_bose_with_delta():
    vm = np.eye(2) * 0.5
    c = general_graph_condition(vm, WeightFn.bose())
    assert c.ok
    brute = max(math.exp((math.log(double_factorial(2 * n - 1)) - 0.5 * n * n) / n) for n in range(1, 200))
    assert c.M == pytest.approx(brute, rel=1e-12)


def test_weight_families():
    assert WeightFn.hard_range(2)(3) == 0
    assert WeightFn.table([1, 0.5])(1) == 0.5 and WeightFn.table([1, 0.5]).range == 1
    assert WeightFn.bose()(100) == 1
    with pytest.raises(ValueError):
        WeightFn("nope")
    with pytest.raises(ValueError):
        WeightFn.table([1, -1])
