from __future__ import annotations

import itertools

import numpy as np
import pytest

from lpstab.errors import DegenerateInputError, FormatError, InvalidMetricError, ParameterError
from lpstab.space import covering, cutoff, explicit, make_space, select_color_class, thickened, tree, z_interval, zd_box


def test_interval_interior_ball_volume():
    X = z_interval(101)
    assert X.volume(50, 3) == 7
    assert list(X.ball(50, 3)) == list(range(47, 54))


def test_interval_doubling_at_most_two():
    assert z_interval(1001).doubling_D <= 2.0


def _tree_size(degree, radius):
    # independent count: root, then each vertex at depth k >= 1 has degree - 1 children
    total, layer = 1, degree
    for _ in range(radius):
        total += layer
        layer *= degree - 1
    return total


@pytest.mark.parametrize("degree,radius", [(3, 2), (3, 4), (4, 3), (2, 5)])
def test_tree_size(degree, radius):
    assert tree(degree, radius).n == _tree_size(degree, radius)


def test_tree_3_2_has_ten_points():
    assert tree(3, 2).n == 10


def test_tree_distances_are_path_lengths():
    import scipy.sparse.csgraph as csg

    T = tree(3, 3)
    adj = (T.table == 1).astype(float)
    assert np.array_equal(csg.shortest_path(adj, unweighted=True), T.table)


def test_zd_box_uses_sup_metric():
    X = zd_box((5, 7))
    assert X.dist(X.index_of((1, 2)), X.index_of((4, 3))) == 3


def test_explicit_rejects_bad_tables():
    with pytest.raises(FormatError):
        explicit([[0, 1], [2, 0]])
    with pytest.raises(FormatError):
        explicit([[0, -1], [-1, 0]])
    with pytest.raises(InvalidMetricError):
        explicit([[0, 1, 5], [1, 0, 1], [5, 1, 0]])


def test_make_space_roundtrip():
    for spec in ({"kind": "z_interval", "n": 9}, {"kind": "zd_box", "dims": [3, 4]}, {"kind": "tree", "degree": 3, "radius": 2}):
        X = make_space(spec)
        assert make_space(X.to_json()) == X
    with pytest.raises(FormatError):
        make_space({"kind": "torus"})


def test_covering_greedy_net_on_interval():
    cov = covering(z_interval(100), 10, 6)
    assert list(cov.centers) == list(range(0, 100, 11))
    for c in range(1, cov.num_colors + 1):
        P = cov.color_class(c)
        for a, b in itertools.combinations(P, 2):
            assert abs(int(a) - int(b)) >= 60


def test_covering_colors_bounded_by_measured_degree():
    cov = covering(z_interval(100), 10, 6)
    C = cov.centers
    # conflict graph measured directly
    deg = max(sum(1 for b in C if b != a and abs(int(a) - int(b)) < 60) for a in C)
    assert cov.max_degree == deg
    assert cov.num_colors <= deg + 1


def test_covering_large_L_single_center():
    for X in (z_interval(30), tree(3, 2), zd_box((4, 4))):
        cov = covering(X, X.diameter, 6)
        assert len(cov.centers) == 1 and cov.num_colors == 1


def test_covering_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        covering(z_interval(10), 0)
    with pytest.raises(ParameterError):
        covering(z_interval(10), 2, alpha=0.5)


def test_select_color_class_point_indicator():
    X = z_interval(200)
    cov = covering(X, 8)
    f = np.zeros(200)
    f[77] = 1.0
    ch = select_color_class(f, cov, 2.0)
    assert ch.ratio == 1.0
    assert thickened(X, ch.centers, 8)[77]


@pytest.mark.parametrize("L", [3, 8, 20])
def test_select_color_class_pigeonhole(L):
    X = z_interval(300)
    cov = covering(X, L)
    ch = select_color_class(np.ones(300), cov, 2.0)
    assert ch.ratio >= 1 / cov.num_colors


def test_select_color_class_zero_f():
    with pytest.raises(DegenerateInputError):
        select_color_class(np.zeros(10), covering(z_interval(10), 2), 2.0)


def test_six_L_progression_captures_a_third(rng):
    # for the best offset x0, the 2L-thickened progression {x0 + 6kL} keeps a third of ||f||_p
    n, L = 600, 5
    f = rng.standard_normal(n)
    X = z_interval(n)
    for p in (1.0, 2.0, np.inf):
        total = np.linalg.norm(f, p)
        best = 0.0
        for x0 in range(6 * L):
            P = np.arange(x0, n, 6 * L)
            mask = thickened(X, P, L)
            best = max(best, np.linalg.norm(f * mask, p))
        assert best >= total / 3 - 1e-12


def test_cutoff_values():
    X = z_interval(50)
    prof = cutoff([0], 5, X)
    assert prof.values[0] == 1.0
    assert prof.values[5] == 0.5
    assert prof.values[10] == 0.0
    prof2 = cutoff([0, 60], 5, z_interval(100))
    assert prof2.values[30] == 0.0


def test_cutoff_is_one_on_centers_and_lipschitz():
    X = zd_box((12, 12))
    P = [0, 50, 100]
    prof = cutoff(P, 2, X)
    assert np.all(prof.values[P] == 1.0)
    checks = prof.verify()
    assert checks["lipschitz"] and checks["bounded"] and checks["half_on_L_ball"] and checks["vanishes_beyond_2L"]


def test_cutoff_empty_set():
    with pytest.raises(DegenerateInputError):
        cutoff([], 2, z_interval(10))
