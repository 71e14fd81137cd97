"""Orbit counting, pair statistics and mean value checks for Fuchsian lattices."""
from .exact import NumberRing, RingElement, integer_ring, ring_for_hecke
from .fuchsian import (CuspData, ExactMatrix, GroupElement, Lattice, build_congruence, build_custom,
                       build_hecke, build_sl2z, c_gamma, lattice_from_config, reduce_point, scaling_factor)
from .orbit import DiscreteOrbit, HolonomySet, OrbitVector, assemble_holonomy, count, count_transformed, \
    enumerate_ball
from .shapes import BorelShape, annulus, disk, polygon, sector, square
from .testfunctions import TestFunction, ball_indicator, pair_ball, pair_det, pair_friend
from .pairstats import (PairTable, build_pair_table, correlation_integral, det_pairs, friends,
                        length_density, pair_correlation, partial_sum, phi_function)
from .haarmc import (avg_pair_correlation, first_moment_check, pair_moment_check, sample_cone, sample_mu,
                     second_moment_check, theta)
from .counting import congruence_count, discrepancy_experiment, second_moment_discrepancy

__version__ = "0.1.0"
