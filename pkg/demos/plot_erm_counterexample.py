"""
When empirical risk minimization fails but SGD does not
=======================================================

Losses ||alpha * (h - x)|| with x = 0 and a uniform random 0/1 mask alpha in
d = 2^n coordinates, plus a tiny strictly convex bias. With n samples some
coordinate is likely never observed; the ERM then leans its whole unit
budget on unobserved coordinates and pays population risk near 1/2, while
averaged projected SGD stays within sqrt(2(1 + eps)/n) of the optimum.
"""

import numpy as np

from mdlearn import adversary as adv
from mdlearn import harness as hs
from mdlearn import md_engine as md
from mdlearn import geometry as geo

n, d, eps = 8, 2 ** 8, 0.01
sample = adv.hidden_coordinate_stream(d, n, bias=True, rng_seed=3, eps=eps)
print("unobserved coordinates:", adv.unobserved_coordinates(sample)[:10], "...")

erm = md.erm_solve(sample, geo.euclidean(d, 1.0))
sgd = md.sgd_counterexample(sample)
print(f"ERM   ||h|| = {np.linalg.norm(erm.h):.3f}  "
      f"population risk {adv.hidden_population_risk(erm.h, eps, 0).value:.3f}")
print(f"SGD   population risk {adv.hidden_population_risk(sgd, eps, 0).value:.3f}")
print(f"best  population risk {adv.hidden_population_minimum(d, eps):.4f}")

###############################################################################
# Repeat over 50 samples.

summary, _ = hs.counterexample_experiment(d=d, n=n, trials=50, seed=0, eps=eps)
for k in ("unobserved_frequency", "erm_population_risk_mean", "sgd_suboptimality_mean", "sgd_bound"):
    print(f"{k:28s} {summary[k]:.4f}")
