"""From complex distances to tube incidences in C^3.

Run with ``python3 demos/04_falconer.py`` (about ten seconds).
"""
import numpy as np

from complextubes import falconer as fc

s, delta = 1.5, 1 / 32

# %% Complex distances are not norms: (i, 0) is at distance -1 from 0
print("Delta((i,0),(0,0)) =", fc.complex_distance([1j, 0], [0, 0]))

# %% A sparse set: no delta^{s/4}-ball holds more than one delta-ball
ps = fc.generate_point_set(s, delta, 1, seed=1)
sp = fc.split(ps)
print(f"{len(ps)} balls, |E1|={len(sp.e1)}, |E2|={len(sp.e2)}, densest window {fc.max_window_count(ps)}")

# %% Quadruples with nearly equal distances, and the Cauchy-Schwarz bound
q = fc.count_quadruples(sp, delta).q_count
cover = fc.covering_number(fc.pair_values(sp), delta)
print(f"|Q|={q}  covering={cover}  (n1 n2)^2/|Q|={fc.cs_lower_bound(len(sp.e1), len(sp.e2), q):.1f}")

# %% Each quadruple in Q makes two auxiliary lines nearly meet
i1, i2, i3, i4 = fc.quadruples(sp, delta)[1]
rep = fc.verify_intersection_prop(sp.e1.centers[i1], sp.e2.centers[i2], sp.e2.centers[i3], sp.e1.centers[i4], delta)
print(f"branch {rep.branch}, |A|={rep.a_norm:.2e} < {rep.a_bound:.2e}, max cos {rep.max_cos:.3f}, holds {rep.holds}")

# %% Separated quadruples give lines that stay apart somewhere in the unit disc
p = np.array([[-0.6, 0], [-0.3, 0.2j], [0.6, 0.1], [0.4j + 0.6, -0.1]])
one = fc.verify_one_tube_claim(*p, s, delta)
print(f"case {one.case}, witness {one.witness}, separation {one.separation:.3f} >= {one.required:.4f}")

# %% The whole chain in one call
report, profile = fc.run_falconer(s, delta, 1, 0.5, seed=1)
print({k: report.to_dict()[k] for k in ("q_count", "incidence_sum", "covering_count", "cs_lower_bound", "target", "spacing_ok")})
