import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwto.costfield import sample_field
from pwto.lattice import Lattice
from pwto.mosearch import ParetoPath, moa_star
from pwto.pathfilter import filter_mask, filter_paths, hausdorff, vertex_points


def make_path(points, cost=(1, 1)):
    return ParetoPath(vertices=[tuple(p) for p in points], cost=cost)


def test_identical_paths():
    p = make_path([(0, 0), (1, 2), (3, 3)])
    assert hausdorff(p, p) == 0.0


def test_single_points():
    assert hausdorff(make_path([(0, 0)]), make_path([(3, 4)])) == 5.0


def test_hand_enumerated_example():
    a = make_path([(0, 0), (10, 0)])
    b = make_path([(0, 1)])
    assert hausdorff(a, b) == pytest.approx(math.sqrt(101))
    assert hausdorff(a, b) == pytest.approx(10.0499, abs=1e-4)


def test_empty_path_rejected():
    with pytest.raises(ValueError):
        hausdorff(make_path([]), make_path([(0, 0)]))


def test_lattice_vertices_measured_in_cells():
    lat = Lattice(sample_field(5, 0.01, 0), 40, 40, 4)
    front = moa_star(lat, lat.snap((0.1, 0.1, 0)), lat.snap((0.8, 0.7, 0)))
    pts = vertex_points(front.entries[0])
    assert pts.dtype == float
    assert np.array_equal(pts, np.array([(v.ix, v.iy) for v in front.entries[0].vertices], dtype=float))


points = st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=1, max_size=12)


@given(points, points)
def test_symmetry(a, b):
    assert hausdorff(make_path(a), make_path(b)) == hausdorff(make_path(b), make_path(a))


@given(points, points, points)
def test_triangle_inequality(a, b, c):
    pa, pb, pc = make_path(a), make_path(b), make_path(c)
    assert hausdorff(pa, pc) <= hausdorff(pa, pb) + hausdorff(pb, pc) + 1e-9


@given(points)
def test_brute_force_definition(a):
    """Compare with the sup-inf definition spelled out with plain loops."""
    b = [(x + 1, -y) for x, y in a][::2]

    def directed(p, q):
        return max(min(math.dist(u, v) for v in q) for u in p)

    want = max(directed(a, b), directed(b, a))
    assert hausdorff(make_path(a), make_path(b)) == pytest.approx(want)


# -- filter --------------------------------------------------------------------------------


def test_single_path_always_kept():
    p = make_path([(0, 0), (5, 5)])
    for d in (0.1, 8, 1e6):
        assert filter_paths([p], d) == [p]


def test_identical_polylines_keep_cheapest():
    cheap = make_path([(0, 0), (9, 0)], cost=(1, 1))
    dear = make_path([(0, 0), (9, 0)], cost=(3, 2))
    assert filter_paths([dear, cheap], 8) == [cheap]


def test_three_path_fixture():
    # B and C are both far from A; C is within 3 of B, so it is dropped once B is kept
    a = make_path([(0, 0)], cost=(1, 1))
    b = make_path([(10, 0)], cost=(2, 2))
    c = make_path([(10, 3)], cost=(3, 3))
    assert hausdorff(a, b) == 10 and hausdorff(b, c) == 3
    assert hausdorff(a, c) == pytest.approx(math.sqrt(109))
    kept = filter_paths([c, a, b], 8)
    assert kept == [a, b]
    assert filter_mask([c, a, b], 8) == [False, True, True]


def test_zero_threshold_rejected():
    with pytest.raises(ValueError):
        filter_paths([make_path([(0, 0)])], 0.0)


def test_empty_front():
    assert filter_paths([], 8) == []


def random_front(rng, n):
    paths = []
    for _ in range(n):
        k = int(rng.integers(1, 6))
        paths.append(make_path(rng.integers(0, 30, size=(k, 2)), cost=tuple(int(x) for x in rng.integers(0, 100, 2))))
    return paths


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 30))
def test_output_pairwise_property(seed, d):
    rng = np.random.default_rng(seed)
    kept = filter_paths(random_front(rng, 12), d)
    assert kept
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            assert hausdorff(kept[i], kept[j]) > d


def test_greedy_output_size_is_not_monotone_in_threshold():
    """Raising the threshold can drop an early path and thereby admit two later ones.

    With d = 3, B (3.5 from A) is kept and then blocks C and E (both exactly 3
    from B). With d = 4, B is dropped, and C and E are farther than 4 from A
    and from each other.
    """
    a = make_path([(0, 0)], cost=(1, 1))
    b = make_path([(3.5, 0)], cost=(2, 2))
    c = make_path([(3.5, 3)], cost=(3, 3))
    e = make_path([(6.5, 0)], cost=(4, 4))
    assert filter_paths([a, b, c, e], 3) == [a, b]
    assert filter_paths([a, b, c, e], 4) == [a, c, e]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_threshold_extremes(seed):
    rng = np.random.default_rng(seed)
    front = random_front(rng, 10)
    dists = [hausdorff(p, q) for i, p in enumerate(front) for q in front[i + 1 :]]
    # above every pairwise distance only the cheapest survives
    assert len(filter_paths(front, max(dists) + 1)) == 1
    # below every positive pairwise distance, exactly one path per distinct point set survives
    positive = [d for d in dists if d > 0]
    if positive:
        kept = filter_paths(front, min(positive) / 2)
        assert len(kept) == len({frozenset(map(tuple, vertex_points(p))) for p in front})


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 20))
def test_cheapest_path_always_kept(seed, d):
    rng = np.random.default_rng(seed)
    front = random_front(rng, 12)
    kept = filter_paths(front, d)
    assert kept[0] is min(front, key=lambda p: (p.scalarized(), front.index(p)))


def test_filter_on_real_front():
    lat = Lattice(sample_field(15, 0.002, 1), 200, 200, 4)
    front = moa_star(lat, lat.snap((0.1, 0.1, 0)), lat.snap((0.9, 0.85, 0)))
    kept = filter_paths(front, 8)
    assert 1 <= len(kept) <= len(front)
    assert kept[0] is min(front.entries, key=lambda p: p.scalarized())
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            assert hausdorff(kept[i], kept[j]) > 8
