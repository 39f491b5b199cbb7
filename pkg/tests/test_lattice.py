import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lowertail.lattice import (
    GridSpec,
    MonotoneCurve,
    RegionMask,
    WeightField,
    anti_diagonal,
    central_indices,
    cylinder,
    layout,
    load_mask,
    save_mask,
    strip,
)


def test_anti_diagonal_examples():
    g = GridSpec(4)
    assert anti_diagonal(g, 0) == [(0, 0)]
    assert anti_diagonal(g, 4) == [(0, 4), (1, 3), (2, 2), (3, 1), (4, 0)]
    assert anti_diagonal(GridSpec(4, 3), 1) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


def test_anti_diagonal_out_of_range():
    with pytest.raises(IndexError):
        anti_diagonal(GridSpec(4), 9)
    with pytest.raises(IndexError):
        anti_diagonal(GridSpec(4), -1)


@given(st.integers(0, 9), st.integers(2, 3))
@settings(max_examples=30, deadline=None)
def test_diagonals_partition_box(n, d):
    g = GridSpec(n, d)
    seen = []
    for i in range(d * n + 1):
        D = anti_diagonal(g, i)
        assert all(sum(v) == i for v in D)
        assert D == sorted(D)
        if d == 2:
            assert len(D) == min(i, 2 * n - i) + 1
        seen += D
    assert len(seen) == len(set(seen)) == (n + 1) ** d


def test_layout_round_trip():
    g = GridSpec(5, 3)
    lay = layout(g)
    a = np.arange(g.size, dtype=float).reshape(g.shape)
    assert np.array_equal(lay.to_grid(lay.to_diag(a)), a)
    for k in (0, 17, g.size - 1):
        v = tuple(lay.coords[k])
        assert lay.index(v) == k
        for j in range(g.d):
            p = lay.pred[k, j]
            if p >= 0:
                assert sum(lay.coords[p]) == sum(v) - 1


def test_paths_meet_each_diagonal_once():
    n = 3
    for steps in set(itertools.permutations([0] * n + [1] * n)):
        v = [0, 0]
        sums = [0]
        for s in steps:
            v[s] += 1
            sums.append(sum(v))
        assert sums == list(range(2 * n + 1))


def test_strip_examples():
    g = GridSpec(10)
    x, y = np.indices(g.shape)
    assert np.array_equal(strip(g, 0, 2).membership, np.abs(x - y) <= 2)
    assert np.array_equal(strip(g, 1, 2).membership, (x - y >= 6) & (x - y <= 10))
    assert len(strip(g, 3, 2)) == 0


@given(st.integers(1, 30), st.integers(1, 5))
@settings(max_examples=40, deadline=None)
def test_strips_disjoint(n, K):
    g = GridSpec(n)
    masks = [strip(g, i, K) for i in range(-3, 4)]
    for a, b in itertools.combinations(masks, 2):
        assert len(a & b) == 0


def test_cylinder_examples():
    g = GridSpec(10)
    c = cylinder(MonotoneCurve.identity(), 0.1, g)
    x, y = np.indices(g.shape)
    assert np.array_equal(c.membership, np.abs(y - x) <= 1)
    assert len(c) == 31
    assert len(cylinder(MonotoneCurve.identity(), 1.0, g)) == 121
    bent = cylinder(MonotoneCurve.through((0.5, 0.8)), 0.05, GridSpec(100))
    col = np.flatnonzero(bent.membership[50])
    assert col.tolist() == list(range(75, 86))


@given(st.integers(1, 40), st.floats(0.01, 0.5), st.floats(0.01, 0.5),
       st.floats(0.05, 0.95), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_cylinder_monotone_and_bounded(n, e1, e2, t, gy):
    e1, e2 = sorted((e1, e2))
    g = GridSpec(n)
    curve = MonotoneCurve.through((t, gy))
    a, b = cylinder(curve, e1, g), cylinder(curve, e2, g)
    assert a.issubset(b)
    assert len(a) <= (2 * e1 * n + 1) * (n + 1) + 1e-9


def test_central_indices_examples():
    assert central_indices(GridSpec(100), 0.04) == list(range(5, 196))
    assert central_indices(GridSpec(4), 0.04) == list(range(1, 8))
    assert central_indices(GridSpec(100), 1e-9) == list(range(1, 200))


@given(st.integers(1, 200), st.sampled_from([0.001, 0.01, 0.02, 0.04, 0.05]))
@settings(max_examples=50, deadline=None)
def test_central_diagonals_are_large(n, eps):
    g = GridSpec(n)
    for i in central_indices(g, eps):
        assert len(anti_diagonal(g, i)) >= np.sqrt(eps) / 4 * n - 1e-9


def test_curve_validation_and_io(tmp_path):
    with pytest.raises(ValueError):
        MonotoneCurve(np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.7, 0.6]))
    with pytest.raises(ValueError):
        MonotoneCurve(np.array([0.0, 1.0]), np.array([0.1, 1.0]))
    c = MonotoneCurve.through((0.25, 0.5))
    c.save(tmp_path / "c.txt")
    d = MonotoneCurve.load(tmp_path / "c.txt")
    assert np.array_equal(c.t, d.t) and np.array_equal(c.gamma, d.gamma)
    assert c(0.125) == pytest.approx(0.25)


def test_mask_rle_round_trip(tmp_path):
    g = GridSpec(12)
    m = cylinder(MonotoneCurve.through((0.3, 0.6)), 0.1, g) | strip(g, 1, 2)
    save_mask(m, tmp_path / "m.json")
    back = load_mask(tmp_path / "m.json")
    assert np.array_equal(back.membership, m.membership)
    assert back.cardinality == len(m)
    assert RegionMask.from_vertices(g, [(0, 0), (3, 4)]).vertices() == [(0, 0), (3, 4)]


def test_weight_field_checks():
    g = GridSpec(2)
    with pytest.raises(ValueError):
        WeightField(g, -np.ones(g.shape))
    with pytest.raises(ValueError):
        WeightField(g, np.ones((2, 2)))
    w = WeightField(g, np.ones(g.shape))
    assert w.total() == 9
    with pytest.raises(ValueError):
        w.weights[0, 0] = 3.0
