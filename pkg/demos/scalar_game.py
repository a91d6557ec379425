"""
Solving a scalar zero-sum game
==============================

A one-state game is small enough to check by hand: the value x solves a
scalar Riccati equation, and every driver in the package should land on it.
"""

import numpy as np

from lqnash import ng_outer, ng_outer_leader_k, qn_outer
from lqnash.io import g1_preset

game = g1_preset()
print("A =", game.A.item(), " B1 =", game.B1.item(), " B2 =", game.B2.item(),
      " R2 =", game.R2.item())

# The fixed point of x = q + a^2 x / (1 + (b1^2/r1 - b2^2/r2) x), found by
# plain bisection on the residual so the check does not reuse solver code.
a, b1, b2, q, r1, r2 = 1.2, 1.0, 0.5, 1.0, 1.0, 5.0
lo, hi = 1.0, 10.0
for _ in range(200):
    mid = 0.5 * (lo + hi)
    res = q + a * a * mid / (1 + (b1 * b1 / r1 - b2 * b2 / r2) * mid) - mid
    lo, hi = (mid, hi) if res > 0 else (lo, mid)
x_ref = 0.5 * (lo + hi)
print(f"bisection value x* = {x_ref:.15f}")

for driver in (ng_outer, qn_outer, ng_outer_leader_k):
    sol = driver(game)
    print(f"{driver.__name__:18s} x* = {sol.X_star.item():.15f}  rounds = {len(sol.trace) - 1}"
          f"  certified = {sol.certificate.passed}")

# The equilibrium gains in closed form.
K = a * x_ref / (1 + 0.95 * x_ref)
print("K* =", K, " L* =", -0.1 * K)
