import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fuchsian_orbits.exact import (RingMismatchError, UnsupportedRingError, cyclotomic_polynomial,
                                   exact_signs, hecke_min_poly, integer_ring, ring_for_hecke)

# minimal polynomials of 2cos(pi/q), low degree first, worked out by hand
KNOWN_MIN_POLY = {
    3: (-1, 1),
    4: (-2, 0, 1),
    5: (-1, -1, 1),
    6: (-3, 0, 1),
    7: (1, -2, -1, 1),
    8: (2, 0, -4, 0, 1),
}


@pytest.mark.parametrize("q,poly", sorted(KNOWN_MIN_POLY.items()))
def test_min_poly_table(q, poly):
    assert hecke_min_poly(q) == poly


@pytest.mark.parametrize("q", range(3, 25))
def test_min_poly_has_root_and_degree(q):
    poly = hecke_min_poly(q)
    lam = 2 * math.cos(math.pi / q)
    assert abs(np.polyval(poly[::-1], lam)) < 1e-9
    # degree of 2cos(pi/q) is phi(2q)/2
    phi = sum(1 for k in range(1, 2 * q + 1) if math.gcd(k, 2 * q) == 1)
    assert len(poly) - 1 == phi // 2


def test_cyclotomic_small():
    assert cyclotomic_polynomial(1) == (-1, 1)
    assert cyclotomic_polynomial(4) == (1, 0, 1)
    assert cyclotomic_polynomial(10) == (1, -1, 1, -1, 1)


def test_ring_q3_is_integers():
    R = ring_for_hecke(3)
    assert R.degree == 1
    assert R.generator.embed() == 1.0
    assert R.from_int(7).embed() == 7.0


def test_ring_q5_golden_ratio():
    R = ring_for_hecke(5)
    lam = R.generator
    assert R.degree == 2
    assert R.min_poly == (-1, -1, 1)
    val, bound = lam.embed_with_bound()
    assert abs(val - (1 + math.sqrt(5)) / 2) <= max(bound, 1e-15)
    assert lam * lam == lam + 1


def test_ring_q4_sqrt2():
    R = ring_for_hecke(4)
    assert abs(R.generator.embed() - math.sqrt(2)) < 1e-15
    assert R.generator * R.generator == R.from_int(2)


def test_root_residual_is_tiny():
    import mpmath
    for q in (4, 5, 7, 9, 11):
        R = ring_for_hecke(q)
        with mpmath.workdps(60):
            assert abs(mpmath.polyval(list(reversed(R.min_poly)), R.embedding_root)) < mpmath.mpf(10) ** -30


def test_identities_and_zero():
    R = ring_for_hecke(7)
    a = R.element([3, -2, 5])
    assert a * 1 == a
    assert a + (-a) == R.zero
    assert (a - a).is_zero()
    assert R.zero.embed() == 0.0
    assert R.zero.sign() == 0


def test_ring_mismatch():
    with pytest.raises(RingMismatchError):
        ring_for_hecke(5).generator + ring_for_hecke(7).generator


def test_unsupported_degree():
    with pytest.raises(UnsupportedRingError):
        ring_for_hecke(61)
    with pytest.raises(ValueError):
        ring_for_hecke(2)


coeff = st.integers(min_value=-10**6, max_value=10**6)


@pytest.mark.parametrize("q", [5, 7, 9])
@settings(max_examples=60, deadline=None)
@given(a=st.lists(coeff, min_size=4, max_size=4), b=st.lists(coeff, min_size=4, max_size=4))
def test_embedding_is_multiplicative(q, a, b):
    R = ring_for_hecke(q)
    x, y = R.element(a[: R.degree]), R.element(b[: R.degree])
    vx, bx = x.embed_with_bound()
    vy, by = y.embed_with_bound()
    vxy, bxy = (x * y).embed_with_bound()
    slack = bxy + abs(vx) * by + abs(vy) * bx + bx * by
    # float rounding of the product of two embeddings
    slack += 4 * 2.0**-53 * (abs(vx * vy) + sum(abs(c) for c in (x * y).coeffs) * 4)
    assert abs(vxy - vx * vy) <= slack


@pytest.mark.parametrize("q", [4, 5, 7])
@settings(max_examples=60, deadline=None)
@given(a=st.lists(coeff, min_size=3, max_size=3), b=st.lists(coeff, min_size=3, max_size=3),
       c=st.lists(coeff, min_size=3, max_size=3))
def test_ring_axioms(q, a, b, c):
    R = ring_for_hecke(q)
    x, y, z = (R.element(v[: R.degree]) for v in (a, b, c))
    assert x * y == y * x
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert len((x * y).coeffs) == R.degree


@pytest.mark.parametrize("q", [5, 7])
@settings(max_examples=80, deadline=None)
@given(a=st.lists(st.integers(-50, 50), min_size=3, max_size=3))
def test_sign_consistent_with_exact_zero(q, a):
    R = ring_for_hecke(q)
    x = R.element(a[: R.degree])
    s = x.sign()
    if all(c == 0 for c in x.coeffs):
        assert s == 0
    else:
        assert s != 0
        val, bound = x.embed_with_bound()
        if abs(val) > bound:
            assert s == np.sign(val)


def test_sign_of_tiny_element():
    # Fibonacci combination F_{n} lam - F_{n+1} is tiny but nonzero
    R = ring_for_hecke(5)
    f = [0, 1]
    for _ in range(60):
        f.append(f[-1] + f[-2])
    x = R.element([-f[41], f[40]])
    assert abs(x.embed()) < 1e-7
    assert x.sign() == (1 if f[40] * (1 + math.sqrt(5)) / 2 > f[41] else -1)


def test_exact_signs_vectorized():
    R = ring_for_hecke(5)
    rng = np.random.default_rng(0)
    arr = rng.integers(-30, 30, size=(500, 2))
    arr[:5] = 0
    got = exact_signs(R, arr)
    want = [R.element(r).sign() for r in arr.tolist()]
    assert got.tolist() == want


def test_integer_ring_is_q3():
    assert integer_ring() is ring_for_hecke(3)
