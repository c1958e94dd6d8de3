import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffstam.convolution import (
    boxplus_coeffs,
    boxplus_permutation_average,
    boxplus_weights,
    convolve,
    omega,
)
from ffstam.errors import DegreeMismatch
from ffstam.realroot import DOUBLE, PolyCoeffs, PrecisionContext, RootConfig, roots_to_coeffs
from ffstam.reference import hermite_roots


def var(x):
    x = np.asarray([float(v) for v in x])
    return float(np.mean((x - x.mean()) ** 2))


def test_weights_match_factorial_formula():
    n = 5
    w = boxplus_weights(n)
    f = math.factorial
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = i + j
            assert w[i][j] == Fraction(f(n - i) * f(n - j), f(n) * f(n - k))


def test_n2_example():
    c = boxplus_coeffs(PolyCoeffs([1, 0, -1]), PolyCoeffs([1, 0, -1]))
    assert list(c.a) == [1, 0, -2]


def test_n2_brute_force():
    # (1/2)[(x-2)(x+2) + x*x] = x^2 - 2
    c = boxplus_permutation_average([-1, 1], [-1, 1])
    assert [Fraction(v) for v in c.a] == [1, 0, -2]


@pytest.mark.parametrize("n", [3, 6])
def test_identity_element(rng, n):
    a = roots_to_coeffs(np.sort(rng.standard_normal(n)))
    e = PolyCoeffs(np.eye(1, n + 1)[0])
    np.testing.assert_array_equal(boxplus_coeffs(a, e).a, a.a)


def test_exact_identity_element():
    a = PolyCoeffs(np.array([Fraction(1), Fraction(2, 3), Fraction(-5), Fraction(7, 2)], dtype=object))
    e = PolyCoeffs(np.array([Fraction(1), 0, 0, 0], dtype=object))
    assert list(boxplus_coeffs(a, e).a) == list(a.a)


def test_hermite_coefficients():
    # He_6 boxplus He_6 has roots sqrt(2) * sqrt(5) * h
    he6 = PolyCoeffs([1, 0, -15, 0, 45, 0, -15])
    c = boxplus_coeffs(he6, he6)
    gamma = omega(RootConfig(hermite_roots(6).array() * math.sqrt(5)),
                  RootConfig(hermite_roots(6).array() * math.sqrt(5)))
    np.testing.assert_allclose(gamma.roots, math.sqrt(10) * hermite_roots(6).array(), atol=1e-12)
    np.testing.assert_allclose(c.a, roots_to_coeffs(gamma).a, atol=1e-9)


def test_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        boxplus_coeffs(PolyCoeffs([1, 0]), PolyCoeffs([1, 0, 0]))
    with pytest.raises(DegreeMismatch):
        omega([0, 1], [0, 1, 2])


def test_omega_pair():
    np.testing.assert_allclose(omega([-1, 1], [-1, 1]).roots, [-math.sqrt(2), math.sqrt(2)])


def test_omega_identity(rng):
    a = np.sort(rng.standard_normal(5))
    np.testing.assert_allclose(omega(a, np.zeros(5)).roots, a, atol=1e-12)


@pytest.mark.parametrize("n", [6, 10])
@pytest.mark.parametrize("ctx", [DOUBLE, PrecisionContext(40)])
def test_hermite_fixed_point(n, ctx):
    h = hermite_roots(n, ctx)
    gamma = omega(h, h, ctx)
    np.testing.assert_allclose([float(v) for v in gamma.roots],
                               math.sqrt(2) * hermite_roots(n).array(), atol=1e-10)


def test_commutative_bitwise_float(rng):
    for n in (3, 7, 12):
        a = roots_to_coeffs(np.sort(rng.standard_normal(n)))
        b = roots_to_coeffs(np.sort(rng.standard_normal(n)))
        np.testing.assert_array_equal(boxplus_coeffs(a, b).a, boxplus_coeffs(b, a).a)


def test_commutative_exact():
    a = boxplus_permutation_average([0, 1, 3], [0, 0, 0]).a
    b = boxplus_permutation_average([-2, 2, 5], [0, 0, 0]).a
    pa, pb = PolyCoeffs(a), PolyCoeffs(b)
    assert list(boxplus_coeffs(pa, pb).a) == list(boxplus_coeffs(pb, pa).a)


def test_mp_lane_matches_float(rng):
    a, b = np.sort(rng.standard_normal(6)), np.sort(rng.standard_normal(6))
    hi = omega(a, b, PrecisionContext(50))
    np.testing.assert_allclose([float(v) for v in hi.roots], omega(a, b).roots, atol=1e-12)


def test_convolve_returns_coeffs_and_roots(rng):
    a, b = np.sort(rng.standard_normal(4)), np.sort(rng.standard_normal(4))
    res = convolve(a, b)
    np.testing.assert_allclose(roots_to_coeffs(res.gamma).a, res.coeffs.a, atol=1e-12)


int_roots = st.lists(st.integers(-6, 6), min_size=2, max_size=4)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_permutation_average_equivalence(data):
    alpha = sorted(data.draw(int_roots))
    n = len(alpha)
    beta = sorted(data.draw(st.lists(st.integers(-6, 6), min_size=n, max_size=n)))
    brute = [float(v) for v in boxplus_permutation_average(alpha, beta).a]
    fast = boxplus_coeffs(roots_to_coeffs(alpha), roots_to_coeffs(beta)).a
    scale = max(1.0, max(abs(v) for v in brute))
    assert np.max(np.abs(fast - np.array(brute))) <= 1e-12 * scale


def test_permutation_average_by_hand():
    # expand (1/n!) sum over S_3 independently with numpy polynomial products
    alpha, beta = [0, 1, 4], [-2, 0, 3]
    total = np.zeros(4)
    for perm in itertools.permutations(beta):
        total += np.poly([a + b for a, b in zip(alpha, perm)])
    std = total / 6
    expected = [(-1) ** k * c for k, c in enumerate(std)]
    got = [float(v) for v in boxplus_permutation_average(alpha, beta).a]
    np.testing.assert_allclose(got, expected, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.floats(-3, 3), st.integers(0, 10_000))
def test_translation_equivariance(n, c, seed):
    r = np.random.default_rng(seed)
    a = np.sort(r.standard_normal(n)) + 0.1 * np.arange(n)
    b = np.sort(r.standard_normal(n)) + 0.1 * np.arange(n)
    np.testing.assert_allclose(omega(a + c, b).roots, omega(a, b).roots + c, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10_000))
def test_variance_additivity(n, seed):
    r = np.random.default_rng(seed)
    a = np.sort(r.standard_normal(n)) + 0.2 * np.arange(n)
    b = np.sort(r.standard_normal(n)) + 0.2 * np.arange(n)
    ctx = PrecisionContext(30)
    gamma = omega(a, b, ctx)
    assert var(gamma.roots) == pytest.approx(var(a) + var(b), rel=1e-10)
