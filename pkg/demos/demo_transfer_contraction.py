"""
=============================================
Contraction of the transfer operator
=============================================

Quadratic differentials with simple poles at the marked points are pushed
forward by summing over inverse branches.  At ``lambda = pi i`` with marked
points ``{0, 1, -1, inf}`` the space is one-dimensional and the operator acts
on it by the factor ``2i/pi``.
"""

# %%

import math

import numpy as np

from expspider import ExpParams, QuadratureConfig, basis, contraction_estimate, norm
from expspider.qd_transfer import pushforward_rational, pushforward_values

params = ExpParams(0, math.pi * 1j)
(q,) = basis([0, 1, -1])
print("residues", q.residues, " moments", q.moments)

# %%
# The closed-form pushforward is a multiple of q.

pushed = pushforward_rational(params, q)
z = np.array([0.3 + 0.7j, 2 - 1j])
print("E_* q / q at two points:", pushed(z) / q(z), " expected", 2j / math.pi)

# %%
# The truncated branch sum converges to it, within its tail bound.

for M in (16, 64, 256):
    vals, tail = pushforward_values(params, q, z, M)
    print(f"M={M:4d}  error={np.max(np.abs(vals - pushed(z))):.2e}  tail bound={np.max(tail):.2e}")

# %%
# Norms come from a log-polar grid with patches around the poles.

for N in (16, 32, 64):
    print(f"N={N:3d}  ||q|| = {norm(q, QuadratureConfig(N)).value:.8f}")

# %%
# The estimate uses the basis plus 20 random unit combinations.

report = contraction_estimate(params, [0, 1, -1], M=64, quad=QuadratureConfig(32))
print(f"max ratio {report.max_ratio:.8f} (2/pi = {2 / math.pi:.8f}), "
      f"delta {report.delta:.4f}, error bound {report.error_bound:.1e}")
