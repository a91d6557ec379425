"""
The follower's problem with an indefinite state weight
=======================================================

At the equilibrium the minimizer faces an LQR problem whose state weight
Q - L'R2 L can be indefinite. The three inner methods still converge, and
their error sequences show the expected rates: geometric for gradient and
natural gradient, digit doubling for quasi-Newton.
"""

import numpy as np

from lqnash import inner_solve, qn_outer
from lqnash.diagnostics import geometric_ratio
from lqnash.io import generate_instance

game = generate_instance(3, 2, 2, 101, indefinite_at_ne=True)
L = qn_outer(game, tol=1e-10).L_star
print("eigenvalues of Q - L'R2 L:", np.linalg.eigvalsh(game.Q - L.T @ game.R2 @ L))

ref = inner_solve(game, L, "qn", tol=1e-13).K_opt
for method in ("gradient", "ng", "qn"):
    rep = inner_solve(game, L, method, tol=1e-10, max_iter=20_000)
    errs = [np.linalg.norm(K - ref) for K in rep.gain_trace]
    print(f"{method:8s} {rep.iterations:5d} iterations, fitted ratio "
          f"{geometric_ratio(errs, floor=1e-12)}, max rho {max(rep.rho_trace):.3f}")
    if method == "qn":
        print("   quasi-Newton errors:", " ".join(f"{e:.1e}" for e in errs))
