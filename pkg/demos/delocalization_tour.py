"""A walk through the lower-tail picture at n = 64.

Draw unconditioned fields, then condition on L_n <= (mu_n - 1) n with the
diagonal Gibbs sampler, and compare where the geodesics go, how much mass
the field carries, and how close L_n sits to the threshold.

    python demos/delocalization_tour.py
"""
import numpy as np

from lowertail import _kernels as K
from lowertail.gibbs import init_batch, run_sweeps
from lowertail.lattice import GridSpec, MonotoneCurve, layout
from lowertail.metrics import SampleBatch, concentration_statistic, containment_probability, median_curve
from lowertail.passage import geodesic_indices, last_passage_batch
from lowertail.rng import uniforms

n, chains, seed = 64, 8, 5
grid = GridSpec(n)

# free fields, and the finite-n shape constant that calibrates the threshold
x = -np.log1p(-uniforms(seed, (0,), 0, (400, grid.size)))
L_free = last_passage_batch(grid, x)
mu = L_free.mean() / n
c = (mu - 1.0) * n
print(f"E L_n / n at n={n}: {mu:.3f} (limit 4); threshold c = {c:.1f}")


def batch_of(xs, L, c):
    fwd = np.empty_like(xs)
    K.forward_range(xs, fwd, layout(grid).pred, 0, grid.size)
    geo = np.stack([geodesic_indices(grid, f) for f in fwd])
    k = len(xs)
    return SampleBatch("lattice", {"n": n, "d": 2, "law": "exp"}, L, xs.sum(axis=1),
                       np.arange(k), np.zeros(k, int), geodesics=geo, c=c)


free = batch_of(x[:200], L_free[:200], c)

# conditioned chains: 1000 sweeps of burn-in, then one sample every 8 sweeps
st = init_batch(grid, c, chains, seed=seed)
run_sweeps(st, 1000)
xs, Ls = [], []
for _ in range(25):
    run_sweeps(st, 8)
    xs.append(st.x.copy())
    Ls.append(st.L)
cond = batch_of(np.concatenate(xs), np.concatenate(Ls), c)

print("\nmass per site (unconditioned mean is 1):")
print(f"  free        {free.mass.mean() / grid.size:.4f}")
print(f"  conditioned {cond.mass.mean() / grid.size:.4f}")

print("\nn |c - L_n| (median):")
print(f"  free        {np.median(concentration_statistic(free)):.1f}")
print(f"  conditioned {np.median(concentration_statistic(cond)):.1f}")

print("\ngeodesic inside the eps' cylinder around the diagonal:")
for e in (0.1, 0.2, 0.4):
    a = containment_probability(free, MonotoneCurve.identity(), e)
    b = containment_probability(cond, MonotoneCurve.identity(), e)
    print(f"  eps'={e:<4} free {a.value:.3f}   conditioned {b.value:.3f} +- {b.stderr:.3f}")

med = median_curve(cond)
print("\nconditioned median curve at s = 0.25, 0.5, 0.75:",
      np.round(med(np.array([0.25, 0.5, 0.75])), 3))
