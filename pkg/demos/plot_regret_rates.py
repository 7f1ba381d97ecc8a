"""
Regret of online mirror descent
===============================

Mirror descent against an adversarial stream of unit-norm linear losses on
the Euclidean unit ball, then against +-1 losses on the simplex with the
entropic mirror map. Average regret should fall like n^(-1/2) and stay under
2 (sup Psi / n)^(1/2).
"""

import numpy as np

from mdlearn import harness as hs

# Ten trials per horizon, all derived from master seed 0.
cfg = hs.ExperimentConfig(geometry="euclidean", policy="lipschitz", adversary="linear_tree",
                          n_grid=[64, 256, 1024, 4096], trials=10, seed=0)
rows = hs.run_regret_experiment(cfg)

for n in cfg.n_grid:
    obs = np.array([r.observed for r in rows if r.n == n])
    bound = next(r.bound for r in rows if r.n == n)
    print(f"n={n:5d}  mean regret {obs.mean():.4f}  worst {obs.max():.4f}  bound {bound:.4f}")

fit = hs.fit_rate(rows)
print(f"fitted exponent {fit['exponent']:.3f} (r^2 = {fit['r2']:.4f})")

###############################################################################
# Same game on the 8-simplex: sup Psi = ln 8 and the dual norm is l_inf,
# so +-1 losses have unit size.

cfg = hs.ExperimentConfig(geometry="entropic", d=8, adversary="unit_inf",
                          n_grid=[64, 256, 1024], trials=10, seed=0)
for s in hs.summarize(hs.run_regret_experiment(cfg)).items():
    print(s)
