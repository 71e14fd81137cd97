import math

import numpy as np
import pytest
from scipy import integrate, stats

from fuchsian_orbits import DiscreteOrbit, assemble_holonomy
from fuchsian_orbits.haarmc import (ThetaCapError, avg_pair_correlation, ball_counts, first_moment_check,
                                    pair_moment_check, sample_cone, sample_cone_batch, sample_mu,
                                    sample_mu_batch, second_moment_check, theta, worker_streams)
from fuchsian_orbits.testfunctions import ball_indicator, pair_ball, pair_friend
from oracles import brute_friends, primitive_points


def _mobius(m, z):
    a, b, c, d = m.ravel()
    return (a * z + b) / (c * z + d)


# ---------------------------------------------------------------- samplers

@pytest.mark.parametrize("name", ["sl2z", "hecke5"])
def test_samples_in_domain(name, request):
    L = request.getfixturevalue(name)
    b = sample_mu_batch(L, 5000, np.random.default_rng(0))
    w = L.domain_width
    assert np.all(np.abs(b.z.real) <= w / 2 + 1e-12)
    assert np.all(np.abs(b.z) >= 1 - 1e-12)
    assert np.allclose(np.linalg.det(b.h), 1, atol=1e-10)
    assert np.allclose(np.linalg.det(b.g), 1, atol=1e-10)
    img = np.array([_mobius(h, 1j) for h in b.h[:500]])
    assert np.allclose(img, b.z[:500], atol=1e-10)
    assert np.allclose(b.g @ b.h, np.eye(2), atol=1e-9)


def test_single_samples(sl2z):
    rng = np.random.default_rng(2)
    s = sample_mu(sl2z, rng)
    assert abs(_mobius(s.h, 1j) - s.z) < 1e-10
    c = sample_cone(sl2z, rng)
    assert 0 < c.nu <= 1
    assert abs(np.linalg.det(c.A) - c.nu) < 1e-10


def test_acceptance_and_volume(sl2z):
    b = sample_mu_batch(sl2z, 200_000, np.random.default_rng(1))
    assert 0.6 < b.acceptance < 1.0
    envelope = 1.0 / math.sqrt(1 - 0.25)  # width 1 times the integral of y^-2 above y_floor
    assert abs(b.acceptance * envelope / (math.pi / 3) - 1) < 0.01


def test_mean_inverse_height(sl2z):
    b = sample_mu_batch(sl2z, 1_000_000, np.random.default_rng(4))
    v = 1.0 / b.z.imag
    est, se = v.mean(), v.std(ddof=1) / math.sqrt(len(v))
    num = integrate.dblquad(lambda y, x: y**-3, -0.5, 0.5, lambda x: math.sqrt(1 - x * x), lambda x: np.inf)[0]
    ref = num / (math.pi / 3)
    assert abs(est - ref) < 3 * se


def test_theta_angle_uniform(sl2z):
    b = sample_mu_batch(sl2z, 100_000, np.random.default_rng(5))
    hist, _ = np.histogram(b.theta, bins=20, range=(0, 2 * math.pi))
    assert stats.chisquare(hist).pvalue > 0.01


def test_cone_measure(sl2z):
    b = sample_cone_batch(sl2z, 100_000, np.random.default_rng(6))
    det = np.linalg.det(b.A)
    assert np.allclose(det, b.nu, atol=1e-10)
    for k, target in ((1, 0.5), (2, 1 / 3)):
        v = det**k
        assert abs(v.mean() - target) < 3 * v.std(ddof=1) / math.sqrt(len(v))
    assert stats.kstest(det, "uniform").pvalue > 0.01
    assert np.allclose(b.A / np.sqrt(det)[:, None, None], b.g)


def test_congruence_sampler_uses_coset_reps(gamma2):
    b = sample_mu_batch(gamma2, 20_000, np.random.default_rng(7))
    assert np.allclose(np.linalg.det(b.g), 1)
    # the six cosets appear with equal frequency
    reps = np.array([r.to_float() for r in gamma2.coset_reps])
    # g = h^{-1} tau, so tau = h g
    tau = b.h @ b.g
    idx = np.argmin(np.abs(tau[:, None] - reps[None]).reshape(len(b), len(reps), -1).sum(-1), axis=1)
    hist = np.bincount(idx, minlength=len(reps))
    assert stats.chisquare(hist).pvalue > 0.01


# ---------------------------------------------------------------- theta

def test_theta_examples(sl2z):
    orb = DiscreteOrbit(sl2z)
    assert theta(orb, ball_indicator(5), np.eye(2)) == orb.count(5)
    th = 0.7
    k = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    assert theta(orb, ball_indicator(5), k) == orb.count(5)
    A = np.diag([2.0, 0.5])
    assert theta(orb, ball_indicator(2), A) == len(primitive_points(2, matrix=A))


def test_theta_pair_functions(sl2z, hecke5):
    orb = DiscreteOrbit(sl2z)
    g = np.array([[1.2, 0.3], [-0.1, 0.8583333333333333]])
    n = theta(orb, ball_indicator(4), g)
    assert theta([orb, orb], pair_ball(4), g) == n * n
    xy = orb.points(20).xy @ g.T
    assert theta(orb, pair_friend(4, 1.1), g) == brute_friends(xy, 4, 1.1)
    with pytest.raises(ThetaCapError):
        theta(orb, pair_friend(1, 0.5), np.diag([1e-4, 1e4]))


def test_ball_counts_batch_matches_scalar(hecke5):
    orb = DiscreteOrbit(hecke5)
    b = sample_mu_batch(hecke5, 200, np.random.default_rng(8))
    batch = ball_counts(orb, b.g, 3.0)
    single = [theta(orb, ball_indicator(3.0), g) for g in b.g[:40]]
    assert np.array_equal(batch[:40], single)
    # and against direct enumeration
    for g, n in zip(b.g[:40], batch[:40]):
        rad = 3.0 * np.linalg.norm(np.linalg.inv(g), 2)
        xy = orb.points(rad * 1.001).xy @ g.T
        assert n == int((np.hypot(xy[:, 0], xy[:, 1]) <= 3.0).sum())


def test_left_invariance(sl2z):
    orb = DiscreteOrbit(sl2z)
    k = np.array([[1.1, 0.2], [0.05, 1 / 1.1 + 0.2 * 0.05 / 1.1]])
    assert abs(np.linalg.det(k) - 1) < 1e-12
    a = sample_mu_batch(sl2z, 10_000, np.random.default_rng(9))
    b = sample_mu_batch(sl2z, 10_000, np.random.default_rng(10))
    na = ball_counts(orb, a.g, 3.0)
    nb = ball_counts(orb, k[None] @ b.g, 3.0)
    assert stats.ks_2samp(na, nb).pvalue > 0.01


def test_worker_streams_independent():
    s = worker_streams(3, 4)
    draws = [r.random() for r in s]
    assert len(set(draws)) == 4
    assert [r.random() for r in worker_streams(3, 4)] != [r.random() for r in worker_streams(4, 4)]


# ---------------------------------------------------------------- checks

@pytest.mark.parametrize("name", ["sl2z", "hecke5", "gamma2", "gamma3"])
def test_first_moment(name, request):
    L = request.getfixturevalue(name)
    rep = first_moment_check(L, None, 3.0, 30_000, seed=1)
    assert rep.passed, rep
    assert rep.reference == pytest.approx(DiscreteOrbit(L).c_gamma * math.pi * 9)


def test_first_moment_other_cusp(gamma2):
    rep = first_moment_check(gamma2, DiscreteOrbit(gamma2, "0"), 3.0, 30_000, seed=2)
    assert rep.passed


def test_reproducible_and_worker_split(sl2z):
    a = first_moment_check(sl2z, None, 4.0, 5000, seed=11, workers=3)
    b = first_moment_check(sl2z, None, 4.0, 5000, seed=11, workers=3)
    assert a.estimate == b.estimate and a.stderr == b.stderr
    c = first_moment_check(sl2z, None, 4.0, 5000, seed=11, workers=1)
    assert c.estimate != a.estimate


def test_stderr_scaling(sl2z):
    se = [first_moment_check(sl2z, None, 4.0, n, seed=12).stderr * math.sqrt(n) for n in (1000, 10_000, 100_000)]
    assert max(se) / min(se) < 1.2


def test_tiny_radius(sl2z):
    rep = first_moment_check(sl2z, None, 1e-3, 100_000, seed=13)
    assert rep.reference == pytest.approx(6 / math.pi**2 * math.pi * 1e-6)
    assert rep.estimate < 1e-4


def test_reference_scale_fails(sl2z):
    assert not first_moment_check(sl2z, None, 3.0, 20_000, seed=1, reference_scale=1.2).passed


def test_pair_moment_sl2z(sl2z):
    rep = pair_moment_check(sl2z, None, None, pair_ball(5.0), 100_000, seed=3)
    assert rep.passed, rep
    assert rep.breakdown["diagonal"] == pytest.approx(6 / math.pi**2 * math.pi * 25)


def test_pair_moment_non_homothetic(gamma2):
    rep = pair_moment_check(gamma2, DiscreteOrbit(gamma2, "inf"), DiscreteOrbit(gamma2, "0"),
                            pair_ball(4.0), 50_000, seed=4)
    assert rep.breakdown["diagonal"] == 0.0 and not rep.breakdown["homothetic"]
    assert rep.passed, rep


def test_pair_moment_small_support_is_diagonal(sl2z):
    rep = pair_moment_check(sl2z, None, None, pair_ball(0.3), 50_000, seed=5)
    assert rep.breakdown["off_diagonal"] < 0.05 * rep.breakdown["diagonal"]
    assert rep.passed, rep


def test_pair_moment_rejects_other_functions(sl2z):
    with pytest.raises(NotImplementedError):
        pair_moment_check(sl2z, None, None, pair_friend(3, 1), 1000, seed=1)
    with pytest.raises(ValueError):
        pair_moment_check(sl2z, None, None, pair_ball(3), 10, seed=1)


def test_second_moment(sl2z):
    rep = second_moment_check(sl2z, None, ball_indicator(5.0), 50_000, seed=6)
    assert rep.passed, rep
    assert rep.breakdown["variance_excess"] >= 0
    assert abs(rep.breakdown["cone_first_moment"] / (6 / math.pi * 25) - 1) < 0.02


def test_second_moment_zero_function(sl2z):
    rep = second_moment_check(sl2z, None, ball_indicator(0.0), 1000, seed=1)
    assert rep.estimate == 0.0 and rep.reference == 0.0 and rep.passed


def test_avg_pair_correlation_small(sl2z):
    S = assemble_holonomy([(1.0, sl2z)])
    tiny = avg_pair_correlation(sl2z, S, 0.05, 20.0, 2000, seed=7)
    assert tiny.estimate < 0.05
    one = avg_pair_correlation(sl2z, S, 1.0, 20.0, 2000, seed=7)
    assert abs(one.estimate / math.pi - 1) < 0.25


def test_report_dict(sl2z):
    d = first_moment_check(sl2z, None, 2.0, 1000, seed=1).to_dict()
    for key in ("formula", "lattice", "params", "n", "seed", "estimate", "stderr", "reference",
                "reference_uncertainty", "z_score", "resample_rate"):
        assert key in d
