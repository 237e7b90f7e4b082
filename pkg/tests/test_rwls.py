import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopsoup.lattice import build_torus, two_vertex_graph
from loopsoup.params import WeightFn
from loopsoup.rwls import (ClassSignature, Loop, SoupConfig, config_class_size, enumerate_loop_classes,
                           enumerate_soups, first_loop_at, interaction_energy, local_time, local_times, loop_class,
                           signature, soup_partition_function, soup_weight)


def brute_orbit(vertices):
    """Distinct rooted oriented loops reachable by shifting and reversing."""
    k = len(vertices)
    rev = (vertices[0],) + tuple(reversed(vertices[1:]))
    return {seq[n:] + seq[:n] for seq in (tuple(vertices), rev) for n in range(k)}


def random_walk_loop(draw_steps, g, start):
    path = [start]
    for s in draw_steps:
        nb = sorted(g.adjacency[path[-1]])
        path.append(nb[s % len(nb)])
    return path


def test_loop_from_path():
    l = Loop.from_path((0, 1, 0))
    assert l.vertices == (0, 1) and l.path == (0, 1, 0)
    with pytest.raises(ValueError):
        Loop.from_path((0, 1))


def test_backtrack_class():
    c = loop_class((0, 1))
    assert (c.length, c.multiplicity, c.stretch, c.size) == (2, 1, 1, 2)


def test_square_class():
    g = build_torus(4, 1)
    c = loop_class((0, 1, 2, 3), g)
    assert (c.multiplicity, c.stretch, c.size) == (1, 2, 8)


def test_folded_loop_class():
    c = loop_class((0, 1, 0, 1))
    assert (c.length, c.multiplicity, c.stretch, c.size) == (4, 2, 1, 2)


def test_invalid_loop_rejected():
    g = build_torus(4, 1)
    with pytest.raises(ValueError):
        loop_class((0, 2), g)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=7), st.integers(0, 15))
def test_class_size_matches_orbit(steps, start):
    g = build_torus(4, 2)
    path = random_walk_loop(steps, g, start)
    # close the walk by retracing it, which always gives a valid loop
    loop = tuple(path + list(reversed(path[1:-1])))
    c = loop_class(loop, g)
    assert c.size == len(brute_orbit(loop))
    assert c.canonical.vertices == min(brute_orbit(loop))


def test_config_class_size_two_copies():
    l = Loop((0, 1))
    sig = signature(SoupConfig((l, l)))
    # ordered pairs of rooted loops from a class of size 2
    assert config_class_size(sig) == 4


def test_local_times_and_first_loop():
    om = SoupConfig((Loop((0, 1)), Loop((1, 2, 1, 0))))
    assert local_times(om, 3) == [2, 3, 1]
    assert local_time(om, 1) == 3
    assert first_loop_at(om, 2).vertices == (1, 2, 1, 0)
    assert first_loop_at(om, 3) is None


def test_soup_weight_hand_value():
    om = SoupConfig((Loop((0, 1)),))
    w = soup_weight(om, None, WeightFn.bose(), 2, Fraction(1, 2))
    # lambda^2 / 2 * N / 2
    assert w == Fraction(1, 8)


def test_interaction_energy_ordered_pairs():
    om = SoupConfig((Loop((0, 1)),))
    vm = np.array([[1.0, 0.5], [0.5, 2.0]])
    assert interaction_energy(om, vm) == pytest.approx(1.0 + 0.5 + 0.5 + 2.0)


@pytest.mark.parametrize("N", [1, 2, 3])
@pytest.mark.parametrize("R", [1, 2])
def test_two_vertex_partition_function(N, R):
    lam = Fraction(7, 10)
    Z = soup_partition_function(two_vertex_graph(), WeightFn.hard_range(R), N, lam)
    hand = 1 + N * lam**2 / 2
    if R == 2:
        hand += (9 * N + 3 * N * (N - 1)) * lam**4 / 24
    assert Z == hand


def test_enumerated_loop_classes_on_four_cycle():
    g = build_torus(4, 1)
    classes = enumerate_loop_classes(g, 4, 1)
    # four backtracks and one square
    assert sorted(c.length for c in classes) == [2, 2, 2, 2, 4]


def test_class_sizes_sum_to_brute_config_count():
    g = two_vertex_graph()
    for sc in enumerate_soups(g, WeightFn.hard_range(2), 1, Fraction(1)):
        rep = sc.representative
        orbits = [brute_orbit(l.vertices) for l in rep.loops]
        ordered = set()
        for perm in itertools.permutations(range(len(rep.loops))):
            for choice in itertools.product(*[sorted(orbits[i]) for i in perm]):
                ordered.add(choice)
        assert sc.size == len(ordered)


def test_infinite_range_needs_step_cap():
    with pytest.raises(ValueError):
        list(enumerate_soups(two_vertex_graph(), WeightFn.bose(), 2, 0.5))
