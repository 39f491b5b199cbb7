import copy

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lowertail.distributions import ExpMixtureLaw, law_from_spec, sample_trunc_exp
from lowertail.gibbs import (
    InfeasibleStateError,
    coupled_sweep,
    event_B,
    event_M,
    gibbs_sweep,
    init_batch,
    init_coupled,
    init_state,
    load_checkpoint,
    region_sum_move,
    rejection_oracle,
    rejection_sample,
    run_sweeps,
    save_checkpoint,
    theta_max,
)
from lowertail.lattice import GridSpec, MonotoneCurve, RegionMask, WeightField, cylinder, layout
from lowertail.passage import geodesic, last_passage, last_passage_batch
from lowertail.rng import uniforms


def quantile_c(grid, q, draws=200_000, seed=99):
    x = np.random.default_rng(seed).exponential(size=(draws, grid.size))
    return float(np.quantile(last_passage_batch(grid, x), q))


def test_init_state_scaling():
    g = GridSpec(3)
    w = np.random.default_rng(0).exponential(size=g.shape)
    f = WeightField(g, w * 10 / last_passage(WeightField(g, w)))
    s = init_state(f, 8.0, 0.99)
    assert s.L[0] == pytest.approx(7.92, rel=1e-12)
    assert np.array_equal(geodesic(s.field()).vertices, geodesic(f).vertices)
    kept = init_state(f.scaled(0.5), 8.0, 0.99, keep_if_feasible=True)
    assert np.array_equal(kept.x[0], f.scaled(0.5).diag())
    with pytest.raises(ValueError):
        init_state(WeightField(g, np.zeros(g.shape)), 8.0)


def test_unconstrained_sweep_is_iid():
    g = GridSpec(1)
    s = init_batch(g, 1e9, 2000, seed=1)
    run_sweeps(s, 5)
    draws = []
    for _ in range(50):
        gibbs_sweep(s)
        draws.append(s.x.copy())
    draws = np.concatenate(draws)
    for k in range(g.size):
        assert stats.kstest(draws[:, k], "expon").pvalue > 0.01


@given(st.integers(1, 6), st.integers(0, 10_000), st.sampled_from([0.5, 0.8, 0.95]),
       st.sampled_from(["exp", "half-normal", "exp-mixture"]))
@settings(max_examples=25, deadline=None)
def test_sweeps_stay_feasible(n, seed, frac, law):
    g = GridSpec(n)
    c = frac * (2 * n + 1) * 2.0
    s = init_batch(g, c, 4, law, seed)
    for _ in range(5):
        gibbs_sweep(s)
        assert np.all(last_passage_batch(g, s.x) <= c)
        fresh = s.fwd.copy(), s.bwd.copy()
        s.recompute()
        assert np.array_equal(fresh[0], s.fwd) and np.array_equal(fresh[1], s.bwd)


def test_three_dimensional_sweep():
    g = GridSpec(3, 3)
    s = init_batch(g, 8.0, 3, seed=2)
    run_sweeps(s, 20)
    assert np.all(last_passage_batch(g, s.x) <= 8.0)


def test_kernel_matches_generic_path():
    """The compiled Exp(1) sweep and the per-diagonal generic path agree."""
    g = GridSpec(5)
    a = init_batch(g, 9.0, 3, "exp", seed=4)
    b = copy.deepcopy(a)
    b.law = ExpMixtureLaw([1.0], [1.0])
    for _ in range(3):
        gibbs_sweep(a)
        gibbs_sweep(b)
    assert np.allclose(a.x, b.x, rtol=1e-8, atol=1e-10)


def test_infeasible_state_detected():
    g = GridSpec(2)
    s = init_batch(g, 5.0, 1, seed=0)
    s.x *= 3
    s.recompute()
    with pytest.raises(InfeasibleStateError):
        gibbs_sweep(s)


def test_theta_max_and_bound():
    g = GridSpec(4)
    s = init_batch(g, 7.0, 1, seed=5)
    run_sweeps(s, 10)
    A = cylinder(MonotoneCurve.identity(), 0.25, g).diag()
    theta, bound = theta_max(g, s.x[0], A, s.c, 1e-9)
    assert theta <= bound * (1 + 1e-12)
    y = s.x[0].copy()
    y[A] *= theta / y[A].sum()
    assert abs(last_passage_batch(g, y[None])[0] - s.c) <= 1e-9 * s.c


def test_single_site_region_move_matches_gibbs_law():
    g = GridSpec(2)
    s0 = init_batch(g, 4.0, 1, seed=6)
    run_sweeps(s0, 5)
    lay = layout(g)
    v = (1, 1)
    k = lay.index(v)
    R = s0.c - s0.margin - (s0.fwd[0, k] + s0.bwd[0, k] - 2 * s0.x[0, k])
    A = RegionMask.from_vertices(g, [v])
    moves = []
    for j in range(20_000):
        s = copy.deepcopy(s0)
        s.move_count = j
        region_sum_move(s, A)
        moves.append(s.x[0, k])
    direct = sample_trunc_exp(R, np.random.default_rng(7).random(20_000))
    assert stats.ks_2samp(moves, direct).pvalue > 0.01


def test_region_moves_preserve_conditional_law():
    g = GridSpec(2)
    c = quantile_c(g, 0.05)
    ref = rejection_sample(g, "exp", c, 3000, 10**7, seed=8).samples.sum(axis=1)
    s = init_batch(g, c, 200, seed=9)
    A = cylinder(MonotoneCurve.identity(), 0.5, g)
    run_sweeps(s, 20)
    mass = []
    for _ in range(15):
        region_sum_move(s, A)
        gibbs_sweep(s)
        mass.append(s.mass.copy())
    assert stats.ks_2samp(np.concatenate(mass), ref).pvalue > 0.01


def test_general_law_region_move_feasible():
    g = GridSpec(3)
    s = init_batch(g, 5.0, 2, "half-normal", seed=10)
    A = cylinder(MonotoneCurve.identity(), 0.34, g)
    for _ in range(5):
        region_sum_move(s, A)
        gibbs_sweep(s)
    assert np.all(last_passage_batch(g, s.x) <= 5.0)


def test_coupling_domination():
    g = GridSpec(16)
    cs = init_coupled(g, 30.0, 4, seed=11)
    for _ in range(100):
        coupled_sweep(cs)
        assert cs.violations == 0
    assert np.all(cs.free.sum(axis=1) > cs.star.mass)
    assert stats.kstest(cs.free.ravel(), "expon").pvalue > 0.01


def test_coupling_gap_grows_with_delta():
    g = GridSpec(12)
    gaps = []
    for frac in (0.9, 0.75, 0.6):
        cs = init_coupled(g, frac * 4 * 12, 8, seed=12)
        for _ in range(150):
            coupled_sweep(cs)
        gaps.append(float(np.mean(cs.free.sum(axis=1) - cs.star.mass)))
    assert gaps[0] < gaps[1] < gaps[2]


def test_rejection_oracle():
    g = GridSpec(2)
    res = rejection_oracle(g, "exp", np.inf, 10, seed=1)
    assert res.tries == 1 and res.acceptance_rate == 1.0
    none = rejection_oracle(g, "exp", 0.01, 500, seed=1)
    assert none.exhausted and none.tries == 500 and none.field is None
    c = quantile_c(g, 0.01)
    res = rejection_sample(g, "exp", c, 10**9, 10**6, seed=3)
    assert abs(res.acceptance_rate - 0.01) < 3 * np.sqrt(0.01 / 1e4)


def test_rejection_mass_is_lower():
    g = GridSpec(4)
    c = quantile_c(g, 0.01, draws=100_000)
    cond = rejection_sample(g, "exp", c, 400, 10**7, seed=4).samples.sum(axis=1)
    free = np.random.default_rng(5).exponential(size=(400, g.size)).sum(axis=1)
    assert stats.mannwhitneyu(cond, free, alternative="less").pvalue < 0.01


def test_rejection_continuation_is_exact():
    g = GridSpec(3)
    c = quantile_c(g, 0.05, draws=50_000)
    whole = rejection_sample(g, "exp", c, 10**9, 4 * 512, seed=6, batch=512)
    a = rejection_sample(g, "exp", c, 10**9, 2 * 512, seed=6, batch=512)
    b = rejection_sample(g, "exp", c, 10**9, 2 * 512, seed=6, batch=512, start_batch=a.batches)
    assert np.array_equal(whole.samples, np.concatenate([a.samples, b.samples]))


def test_events():
    g = GridSpec(8)
    s = init_batch(g, 10.0, 1, seed=13)
    s.x[:] = 0
    s.recompute()
    assert all(event_B(s, i, 0.04) for i in range(1, 16))
    assert all(event_M(s, i, 0.04) is False for i in range(1, 16))
    with pytest.raises(ValueError):
        event_B(s, 0, 0.04)


def test_checkpoint_round_trip(tmp_path):
    g = GridSpec(6)
    a = init_batch(g, 14.0, 3, "half-normal", seed=14, stream=(2,))
    run_sweeps(a, 4)
    save_checkpoint(a, tmp_path / "c.npz", {"note": 1})
    b, header = load_checkpoint(tmp_path / "c.npz")
    assert header["meta"] == {"note": 1} and b.sweep_count == 4
    run_sweeps(a, 3)
    run_sweeps(b, 3)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.fwd, b.fwd)


def test_uniform_streams_are_order_free():
    u1 = uniforms(3, (1, 2), 5, (4, 7))
    uniforms(3, (1, 2), 4, (4, 7))
    assert np.array_equal(u1, uniforms(3, (1, 2), 5, (4, 7)))
    assert not np.array_equal(u1, uniforms(3, (1, 2), 6, (4, 7)))
    assert not np.array_equal(u1, uniforms(3, (1, 3), 5, (4, 7)))


def test_discrete_law_sweep_is_feasible():
    g = GridSpec(2)
    law = law_from_spec({"name": "discrete", "levels": [0, 1, 2], "probs": [1, 1, 1]})
    s = init_state(WeightField(g, np.ones(g.shape)), 4.0, 1.0, keep_if_feasible=False, law=law)
    for _ in range(50):
        gibbs_sweep(s)
        assert last_passage_batch(g, s.x)[0] <= 4.0
        assert set(np.unique(s.x)) <= {0.0, 1.0, 2.0}
