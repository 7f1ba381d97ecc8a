"""
Fat-shattering, Littlestone dimension and learning with experts
===============================================================

Exact dimensions of small finite classes, the Fat-SOA learner on a
realizable stream, and exponential weights over generated experts on an
adversarial one.
"""

import numpy as np

from mdlearn import complexity as cx
from mdlearn import experts_online as ex
from mdlearn import harness as hs

rng = np.random.default_rng(0)
F = cx.FiniteClass(rng.integers(-4, 5, size=(8, 4)) / 4.0)
for a in (0.25, 0.5, 1.0, 2.0):
    print(f"alpha={a:4.2f}  seq fat {cx.seq_fat(F, a).value}  stat fat {cx.stat_fat(F, a).value}")

B = cx.full_binary_class(3)
print("Littlestone dimension of {-1,+1}^3:", cx.littlestone_dim(B).value)

###############################################################################
# Fat-SOA never makes more than fat_alpha(F) errors larger than alpha.

h = F.values[3]
stream = [(int(x), float(h[x])) for x in rng.integers(0, 4, size=40)]
res = ex.fat_soa_run(F, 0.5, stream)
print("large errors:", res.mistake_count, "<= fat:", cx.seq_fat(F, 0.5).value)

###############################################################################
# Agnostic learning of two constant functions from +-1 labels.

consts = cx.FiniteClass([[1.0, 1.0], [-1.0, -1.0]])
stream = [(int(rng.integers(2)), float(rng.choice([-1.0, 1.0]))) for _ in range(64)]
res = ex.agnostic_supervised_run(consts, stream, max_scale=6)
print(f"regret {res.regret:.4f}  bound {res.bound:.4f} (at alpha={res.bound_alpha})")

###############################################################################
# And the matching lower bound: block-sign labels force regret of order
# sqrt(d / n) on any learner, here exponential weights.

summary, _ = hs.block_sign_experiment(n=64, trials=100, seed=0)
print(f"mean regret {summary['mean_regret']:.4f}  lower bound {summary['lower_bound']:.4f}")
