"""
A first-order oracle that fights back
=====================================

The oracle answers each query with the value and subgradient of a max of
signed linear pieces it commits to on the fly. With m orthonormal pieces on
the unit ball, any method making m queries ends at least 1/sqrt(m) above the
minimum, which matches the mirror descent guarantee up to a factor of 2.
"""

import math

from mdlearn import adversary as adv
from mdlearn import geometry as geo
from mdlearn import losses as ls
from mdlearn import md_engine as md

for m in (4, 16, 64, 256):
    g = geo.euclidean(m)
    oracle = adv.ResistingOracle(adv.orthonormal_pieces(m), m)
    out, log = md.first_order_method(oracle, g, m, "md")
    z = oracle.finalize()
    gap = ls.value(z, out) - adv.min_value(z, g)
    upper = md.lipschitz_regret_bound(geo.sup_psi(g), m)
    print(f"m={m:4d}  gap {gap:.4f}  1/sqrt(m) {1 / math.sqrt(m):.4f}  MD guarantee {upper:.4f}")

###############################################################################
# Every logged answer is reproduced by the final instance, so the oracle
# behaved like an honest oracle for z all along.

print(all(ls.evaluate(z, q).value == a.value for q, a in log))
