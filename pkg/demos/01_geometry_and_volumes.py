"""Complex lines, their angle, and the volume of two crossing tubes.

Run with ``python3 demos/01_geometry_and_volumes.py``.
"""
import math

import numpy as np

from complextubes import cgeom, families, solids

rng = np.random.default_rng(0)

# %% The angle between two complex lines
# arccos|<u1, u2>| agrees with the brute-force minimum over phases and with
# the principal angles of the embedded real 2-planes (which come in a pair).
u1, u2 = families.sample_cp(2, 2, rng)
print("closed form      ", cgeom.line_angle(u1, u2))
print("phase grid (720) ", cgeom.definition1_angle(u1, u2))
print("principal angles ", cgeom.principal_angle_oracle(u1, u2))

# %% Two delta-neighbourhoods of lines through 0
# Their intersection has volume pi^2 delta^4 / sin^2(theta) in C^2.
for theta in (math.pi / 2, math.pi / 4, math.pi / 8):
    T1 = solids.line_neighbourhood_tube(np.array([1, 0], complex), 0.1, theta)
    T2 = solids.line_neighbourhood_tube(np.array([math.cos(theta), math.sin(theta)], complex), 0.1, theta)
    est = solids.intersection_volume_mc(T1, T2, samples=2 * 10**6, seed=1)
    exact = solids.intersection_volume_exact(theta, 0.1)
    print(f"theta={theta:.3f}  exact={exact:.4e}  mc={est.value:.4e} +- {est.standard_error:.1e}")

# %% Slices: a point of C^2 lies near the line through 0 and (1, r e^{iz})
# exactly when its first coordinate sits in a planar ball around R_z(y)/r.
y = rng.uniform(-1, 1, (6, 2))
r, z, d = np.full(6, 0.8), rng.uniform(0, 2 * np.pi, 6), np.full(6, 0.2)
x = cgeom.rotate2(y, z) / 0.8 + rng.uniform(-0.4, 0.4, (6, 2))
print("ball criterion   ", solids.slice_membership(x, y, r, z, d))
print("projection < d   ", solids.projection_residual(x, y, r, z) < d)
