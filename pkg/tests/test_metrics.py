import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lowertail import _kernels as K
from lowertail.gibbs import coupled_sweep, init_batch, init_coupled, run_sweeps
from lowertail.lattice import GridSpec, MonotoneCurve, RegionMask, WeightField, cylinder, layout, strip
from lowertail.metrics import (
    Estimate,
    SampleBatch,
    anticoncentration_curve,
    concentration_statistic,
    containment_probability,
    heatmap_svg,
    mass_deficit,
    median_curve,
    occupation,
    one_sided_proportion_test,
    shape_check,
    strip_profile,
    write_csv,
)
from lowertail.passage import geodesic_indices, last_passage_batch, restricted_passage
from lowertail.rng import uniforms


def free_batch(n, k, seed=0, c=np.inf):
    g = GridSpec(n)
    x = -np.log1p(-uniforms(seed, (), 0, (k, g.size)))
    lay = layout(g)
    fwd = np.empty_like(x)
    K.forward_range(x, fwd, lay.pred, 0, g.size)
    geo = np.stack([geodesic_indices(g, f) for f in fwd])
    return SampleBatch("lattice", {"n": n, "d": 2, "law": "exp"}, fwd[:, -1].copy(), x.sum(axis=1),
                       np.arange(k), np.zeros(k, int), geodesics=geo, fields=x, c=c)


def test_containment_trivial_and_monotone():
    b = free_batch(32, 100)
    assert containment_probability(b, MonotoneCurve.identity(), 1.0).value == 1.0
    vals = [containment_probability(b, MonotoneCurve.identity(), e).value for e in (0.05, 0.1, 0.2, 0.4)]
    assert vals == sorted(vals)
    med = median_curve(b)
    assert med.gamma[0] == 0 and med.gamma[-1] == 1


def test_unconditioned_containment_tends_to_one():
    # at eps' = 0.2 the n^(2/3) wander still matters at n = 256 (about 0.67),
    # so check the trend in n and a wider tube
    small = containment_probability(free_batch(64, 200, seed=1), MonotoneCurve.identity(), 0.2)
    b = free_batch(256, 200, seed=1)
    big = containment_probability(b, MonotoneCurve.identity(), 0.2)
    assert big.value > small.value + 3 * max(big.stderr, small.stderr)
    assert containment_probability(b, MonotoneCurve.identity(), 0.3).value > 0.9
    assert big.count == 200


def test_mass_deficit_unconditioned():
    n, k = 32, 400
    b = free_batch(n, k, seed=2)
    s = mass_deficit(b)
    assert abs(s["mean"] - 1) < 3 / np.sqrt(k * n * n)
    assert s["count"] == k


def test_coupled_mass_ratio_below_one():
    g = GridSpec(10)
    cs = init_coupled(g, 25.0, 4, seed=3)
    for _ in range(30):
        coupled_sweep(cs)
        assert np.all(cs.star.mass <= cs.free.sum(axis=1))


def test_concentration_statistic():
    b = free_batch(8, 5, c=0.0)
    b.c = float(b.L[0])
    assert concentration_statistic(b)[0] == 0.0
    assert np.allclose(concentration_statistic(b, 100.0), 8 * np.abs(100.0 - b.L))


def test_anticoncentration_examples():
    n = 16
    g = GridSpec(n)
    s = init_batch(g, 40.0, 20, seed=4)
    run_sweeps(s, 50)
    b = SampleBatch("lattice", {"n": n, "d": 2, "law": "exp"}, s.L, s.mass, np.arange(20), np.full(20, 50),
                    fields=s.x.copy(), c=40.0)
    H = 30.0
    none = RegionMask(g, np.zeros(g.shape, bool))
    rows = anticoncentration_curve(b, {"full": RegionMask.full(g), "none": none}, H)
    assert rows[0]["value"] == np.mean(s.L >= 40.0 - H / n)
    assert rows[1]["value"] == 0.0
    masks = [cylinder(MonotoneCurve.identity(), e, g) for e in (0.4, 0.2, 0.1)]
    vals = [r["value"] for r in anticoncentration_curve(b, masks, H)]
    assert vals == sorted(vals, reverse=True)  # nested masks: exact monotonicity


def test_strip_profile():
    n = 24
    w = np.random.default_rng(5).exponential(size=(n + 1, n + 1))
    prof = strip_profile(w, n, imax=0)
    full = last_passage_batch(GridSpec(n), layout(GridSpec(n)).to_diag(w)[None])[0]
    assert prof.values[0] == pytest.approx(full)
    K = 2
    prof = strip_profile(w, K, bar=3.0 * n)
    assert set(prof.index) == set(range(-3, 4))
    assert 0 <= prof.fraction_meeting <= 1
    masks = [strip(GridSpec(n), i, K) for i in prof.index]
    for a in range(len(masks)):
        for c in range(a + 1, len(masks)):
            assert len(masks[a] & masks[c]) == 0
    # the central strip value agrees with a direct restricted passage
    val, _ = restricted_passage(WeightField(GridSpec(n), w), strip(GridSpec(n), 0, K))
    assert prof.values[list(prof.index).index(0)] == pytest.approx(val)


def test_shape_check_limits():
    rows = shape_check([(1, 1), (4, 1)], 64, 20, seed=6)
    assert rows[0]["limit"] == 4 and rows[1]["limit"] == 9
    for r in rows:
        assert 0.85 * r["limit"] < r["mean"] < r["limit"]
    rows = shape_check([(1, 1)], 64, 20, seed=6, model="poisson")
    assert rows[0]["limit"] == 2 and 1.7 < rows[0]["mean"] < 2.0


def test_occupation_rows_sum_to_count(tmp_path):
    b = free_batch(20, 30, seed=7)
    occ = occupation(b)
    for i in range(41):
        diag = sum(occ[x, i - x] for x in range(max(0, i - 20), min(i, 20) + 1))
        assert diag == 30
    heatmap_svg(occ, tmp_path / "h.svg")
    root = ET.parse(tmp_path / "h.svg").getroot()
    assert root.tag.endswith("svg")


def test_csv_is_byte_stable(tmp_path):
    rows = [{"a": 0.1 + 0.2, "b": True, "c": 3}, {"a": 1e-300, "d": "x"}]
    write_csv(rows, tmp_path / "1.csv")
    write_csv(rows, tmp_path / "2.csv")
    one = (tmp_path / "1.csv").read_bytes()
    assert one == (tmp_path / "2.csv").read_bytes()
    assert one.decode().splitlines()[1] == "0.30000000000000004,1,3,"


def test_proportion_test_direction():
    lo = Estimate(0.05, 0.0, 200, 10)
    hi = Estimate(0.5, 0.0, 200, 100)
    assert one_sided_proportion_test(lo, hi) < 1e-10
    assert one_sided_proportion_test(hi, lo) > 0.5


def test_batch_length_check():
    with pytest.raises(ValueError):
        SampleBatch("lattice", {"n": 2}, np.zeros(3), np.zeros(2), np.zeros(3), np.zeros(3))
