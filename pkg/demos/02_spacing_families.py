"""Direction caps, spaced tube families and the dual-slab count.

Run with ``python3 demos/02_spacing_families.py``.
"""
import numpy as np

from complextubes import families
from complextubes.incidence import fit_exponent

# %% Caps of CP^1 of Fubini-Study radius 1/8
cp = families.cap_partition(2, 1 / 8)
print("caps at scale 1/8:", len(cp))

# %% A family with exactly N = 2 tubes per W^-1-tube (W = 4, delta = 1/32)
fam = families.generate_spaced_family(2, 1 / 32, 4, 2, seed=3)
rep = families.check_spacing(fam)
print(f"{len(fam)} tubes; per-cell counts {rep.histogram}; verdict {rep.verdict}")

# %% H0 = 1: at most one tube per cover cell
h0 = families.generate_h0_family(2, 1 / 32, 4, 1, seed=3)
print("exact-H0 family:", len(h0), "tubes, max per cell", families.check_spacing(h0).max)

# %% Families round-trip through a plain text format
assert families.TubeFamily.loads(fam.dumps()).dumps() == fam.dumps()
print(fam.dumps().splitlines()[0])

# %% A random point at distance sigma from 0 lies in about sigma^-2 dual slabs
pts = []
for sigma in np.arange(0.2, 0.81, 0.2):
    obs, pred = families.dual_slab_count_check(2, 1 / 64, sigma, 1000, 0)
    pts.append((sigma, obs))
    print(f"sigma={sigma:.1f}  observed={obs:6.2f}  sigma^-2={pred:6.2f}")
print("fitted exponent:", round(fit_exponent(pts), 3))
