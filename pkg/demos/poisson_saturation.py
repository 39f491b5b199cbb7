"""Poisson points on [0, n]^2 conditioned on a short longest chain.

Runs the box-diagonal Gibbs sampler, then reports, for each central box
diagonal, how many boxes still have slack and how many are pinned
(R_v = 0, so a maximal chain passes through them).

    python demos/poisson_saturation.py
"""
import numpy as np

from lowertail.poisson import PoissonGibbs, lis, sample_ppp, saturation_stats
from lowertail.rng import step_generator

n, seed = 8, 4
free = [lis(sample_ppp(n, 1.0, step_generator(seed, (0,), j))) for j in range(2000)]
c = float(np.floor(np.mean(free) - 0.5 * n))
print(f"E LIS at n={n}: {np.mean(free):.2f} (limit 2n = {2 * n}); conditioning on LIS <= {c:.0f}")

g = PoissonGibbs.empty(n, c, seed=seed)
for _ in range(60):
    g.sweep()
cfg = g.config
print(f"after 60 sweeps: {len(cfg)} points (free mean {n * n}), LIS = {lis(cfg)}")

print("\n  i  size  slack  zero  saturated")
for r in saturation_stats(cfg, c):
    print(f"{r['i']:3d} {r['size']:5d} {r['slack']:6d} {r['zero']:5d}  {r['saturated']}")
