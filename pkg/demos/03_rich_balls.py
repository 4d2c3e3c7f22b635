"""Counting r-rich delta-balls and checking the incidence bounds.

Run with ``python3 demos/03_rich_balls.py`` (about half a minute).
"""
from complextubes import families, incidence as inc

# %% Richness profile of a spaced family in C^2
delta = 1 / 32
fam = families.generate_spaced_family(2, delta, 4, 2, seed=1)
grid = inc.ball_grid(2, delta)
prof = inc.richness_profile(grid, fam)
print(f"{len(grid)} grid balls, {len(fam)} tubes")
print(prof.to_csv())

# %% Compare with the bound |P_r| <= C delta^-eps W^-2 r^-2 |T|^2 above the threshold
rep = inc.verify_bound(fam, prof, "t41", epsilon=0.1, constant=100)
for row in rep.rows:
    print(f"r={row['r']:3d}  |P_r|={row['count']:8d}  bound={row['bound']:.3e}  ratio={row['ratio']:.3f}")
print("verdict:", rep.verdict)

# %% Dyadic pigeonholing picks the value class carrying the most mass
# (input is (item, value) pairs)
cls = inc.dyadic_pigeonhole(enumerate([1, 1, 3, 3, 3, 20, 33]))
print("class k =", cls.k, "members", cls.members, "interval", cls.interval)

# %% Thin or thick: a bush of tubes through one point is captured by few balls
for kind in ("generic", "concentrated"):
    balls, big, E = inc.dichotomy_instance(2, 16, kind, 60, seed=5)
    r = inc.heavy_ball_check(balls, big, E, 0.1, 16)
    print(f"{kind:12s} E={E:3d} thin={r.thin_holds} (ratio {r.thin_ratio:.2f}) thick={r.thick_holds}")
