"""Monte Carlo over the space of lattices: first moment, pair moment, pair correlation.

Run with:  python3 demos/03_mean_value_checks.py
"""
from fuchsian_orbits import DiscreteOrbit, assemble_holonomy, build_congruence, build_hecke, build_sl2z
from fuchsian_orbits.haarmc import (avg_pair_correlation, first_moment_check, pair_moment_check,
                                    sample_mu_batch, second_moment_check)
from fuchsian_orbits.testfunctions import ball_indicator, pair_ball
import numpy as np


def show(rep):
    status = "pass" if rep.passed else "FAIL"
    print(f"  {rep.formula:14s} {rep.lattice:9s} estimate {rep.estimate:10.3f} +- {rep.stderr:7.3f}  "
          f"reference {rep.reference:10.3f}  z={rep.z_score:+.2f}  [{status}]")


sl2z = build_sl2z()
batch = sample_mu_batch(sl2z, 100_000, np.random.default_rng(0))
print(f"fundamental domain acceptance rate {batch.acceptance:.4f}; "
      f"implied covolume {batch.acceptance * 2 / np.sqrt(3):.5f} (pi/3 = {np.pi / 3:.5f})")

print("\nmean values at R = 5, 10^5 samples")
for L in (sl2z, build_hecke(5), build_congruence(3)):
    show(first_moment_check(L, None, 5.0, 100_000, seed=1))
show(pair_moment_check(sl2z, None, None, pair_ball(5.0), 100_000, seed=2))
rep = second_moment_check(sl2z, None, ball_indicator(5.0), 100_000, seed=3)
show(rep)
print("    breakdown:", {k: round(v, 3) for k, v in rep.breakdown.items()})
g2 = build_congruence(2)
rep = pair_moment_check(g2, DiscreteOrbit(g2, "inf"), DiscreteOrbit(g2, "0"), pair_ball(5.0), 100_000, seed=4)
show(rep)
print(f"    inequivalent cusps, diagonal term {rep.breakdown['diagonal']}")

print("\ncone-averaged pair correlation, R = 30, 3000 samples")
S = assemble_holonomy([(1.0, sl2z)])
for s in (0.5, 1.0, 2.0):
    show(avg_pair_correlation(sl2z, S, s, 30.0, 3000, seed=5))
