"""Determinant multiplicities, the function Phi, and point-pair statistics of orbits.

Run with:  python3 demos/02_pair_statistics.py
"""
import math

from fuchsian_orbits import assemble_holonomy, build_congruence, build_hecke, build_sl2z
from fuchsian_orbits.pairstats import (build_pair_table, det_pairs, friends, length_density, pair_correlation,
                                       partial_sum, phi_function)

sl2z = build_sl2z()
table = build_pair_table(sl2z, C=1e5)
print("sl2z multiplicities for c = 1..12:", [table.phi(c) for c in range(1, 13)])
print("Phi(t) for sl2z (c_Gamma = %.5f):" % table.c_gamma)
for t in (0.5, 5, 50, 500):
    v, b = phi_function(table, t, 1e5)
    print(f"  t={t:>5}: {v:.5f}  (tail bound {b:.1e})")
print(f"partial sum below 10^4 divided by 10^8: {partial_sum(table, 1e4) / 1e8:.5f}  (3/pi^2 = {3 / math.pi**2:.5f})")

hecke = build_hecke(5)
ht = build_pair_table(hecke, C=200)
print(f"\nhecke(5): smallest determinants {[round(float(c), 4) for c in ht.c_values[:5]]}")
print(f"  Phi(20) = {phi_function(ht, 20, 200)[0]:.5f}  vs c_Gamma = {ht.c_gamma:.5f}")

g2 = build_congruence(2)
cross = build_pair_table(g2, "inf", "0", C=30)
print(f"\nGamma(2), cusps inf and 0: zero determinant admissible? {cross.is_homothetic_pair}; "
      f"entries {dict(sorted((int(k), v) for k, v in cross.entries.items()))}")

# Pair statistics of a holonomy-like set built from two scaled copies of the hecke(5) orbit.
S = assemble_holonomy([(1.0, hecke), (1.7, hecke)])
R = 60.0
n = S.count(R)
print(f"\ntwo-component set, {n} points of norm <= {R:g}")
for eta in (0.4, 0.2, 0.1):
    print(f"  eta={eta}: friend pairs per point {friends(S, R, eta) / n:.4f}")
print(f"  pair correlation at s=1: {pair_correlation(S, R, 1.0, S.counting_constant):.3f} (pi = {math.pi:.3f})")
for D in (1, 4, 16):
    print(f"  pairs with |x^y| <= {D:>2}, |y| <= |x|: {det_pairs(S, R, D, 1.0)}")
bands = [(k, k + 0.5) for k in range(int(R))]
print(f"  fraction of lengths in half-unit bands: {length_density(S, bands, R):.3f}")
