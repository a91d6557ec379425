"""
Random games, natural gradient versus quasi-Newton
==================================================

Generate a few instances, solve each with both leader-L drivers and compare
how many outer rounds they need. The quasi-Newton leader usually finishes in
a handful of rounds; the natural-gradient leader takes longer. With a single
maximizer input the two steps coincide, so these instances give it two.
"""

import numpy as np

from lqnash import ng_outer, qn_outer
from lqnash.game import gare_residual
from lqnash.io import generate_instance

for seed in range(5):
    game = generate_instance(4, 2, 2, seed)
    qn = qn_outer(game, tol=1e-10)
    ng = ng_outer(game, tol=1e-10, max_iter=5000)
    gap = np.abs(qn.L_star - ng.L_star).max()
    res = np.linalg.norm(gare_residual(game, qn.X_star))
    print(f"seed {seed}: qn {len(qn.trace) - 1:3d} rounds, ng {len(ng.trace) - 1:4d} rounds, "
          f"|L_qn - L_ng| = {gap:.1e}, GARE residual {res:.1e}")

# Every outer iterate keeps the closed loop stable without any projection,
# and the value matrix only grows from round to round.
recs = ng_outer(generate_instance(4, 2, 2, 0)).trace.records
print("max spectral radius along the run:", max(r.rho for r in recs))
print("smallest eigenvalue of X_j - X_{j-1}:",
      min(np.linalg.eigvalsh(c.X - p.X)[0] for p, c in zip(recs, recs[1:])))
