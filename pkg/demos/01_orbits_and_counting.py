"""Discrete orbits of three lattices and how fast their counts approach the main term.

Run with:  python3 demos/01_orbits_and_counting.py
"""
import math

import numpy as np

from fuchsian_orbits import DiscreteOrbit, build_congruence, build_hecke, build_sl2z, c_gamma
from fuchsian_orbits.counting import congruence_count, discrepancy_experiment
from fuchsian_orbits.shapes import disk

# For the modular group the orbit of e1 is the set of primitive integer vectors.
sl2z = build_sl2z()
orbit = DiscreteOrbit(sl2z)
print("sl2z orbit points of norm <= 2:")
for x, y in orbit.points(2).xy:
    print(f"  ({x:+.0f}, {y:+.0f})")

# A Hecke group has irrational entries; points are kept exactly in Z[lambda].
hecke5 = build_hecke(5)
h_orbit = DiscreteOrbit(hecke5)
pts = h_orbit.points(3)
print(f"\nhecke(5): {len(pts)} orbit points of norm <= 3, first few exact numerators:")
for ex, xy in list(zip(pts.exact, pts.xy))[:4]:
    print(f"  numerators {ex.tolist()}  ->  ({xy[0]:+.4f}, {xy[1]:+.4f})")

# Counts divided by the area of the ball approach c_Gamma.
print("\ncount / (pi R^2) against c_Gamma")
for L in (sl2z, hecke5, build_congruence(2)):
    o = DiscreteOrbit(L)
    row = "  ".join(f"R={R:>4}: {o.count(R) / (math.pi * R * R):.5f}" for R in (50, 200, 800))
    print(f"  {L.name:7s} c={c_gamma(L):.5f}  {row}")

# Discrepancy of the disk count, with a log-log slope over the upper half of the radii.
rep = discrepancy_experiment(sl2z, orbit, disk(), np.eye(2), np.geomspace(200, 2000, 12))
print(f"\nsl2z disk discrepancy: fitted exponent {rep.fitted_exponent:.3f} "
      f"(envelope exponent {rep.target_exponent:.3f})")

# Congruence subgroups: an exact scan in a residue class against its main term.
for N in (2, 3, 5):
    exact, main = congruence_count(N, None, 500.0)
    print(f"Gamma({N}) R=500: exact {exact}, main term {main:.1f}, difference {exact - main:+.1f}")
