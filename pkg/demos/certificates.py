"""
Checking a candidate equilibrium
================================

nash_certificate never raises; it reports stability, stationarity of both
players and which curvature assumption holds. Finite differences give an
independent check of the gradient and of the leader's curvature.
"""

import numpy as np

from lqnash import hessian_probe, nash_certificate, qn_outer
from lqnash.diagnostics import fd_gradient_check
from lqnash.io import generate_instance

game = generate_instance(3, 2, 1, 11)
sol = qn_outer(game, tol=1e-12)
print(nash_certificate(game, sol.K_star, sol.L_star).to_dict())

# Nudge the maximizer off the equilibrium and the certificate fails.
print("perturbed pass:", nash_certificate(game, sol.K_star, sol.L_star + 0.05).passed)

rng = np.random.default_rng(0)
print("gradient FD relative error:", fd_gradient_check(game, sol.K_star, sol.L_star + 0.01))
for _ in range(3):
    p = hessian_probe(game, sol.L_star, rng.standard_normal(sol.L_star.shape))
    print(f"leader curvature: formula {p.value:+.6f}, second difference {p.fd_value:+.6f}")
