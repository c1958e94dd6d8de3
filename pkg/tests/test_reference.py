import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite_e, legendre
from scipy import integrate

from ffstam.errors import DegenerateConfig, InvalidFamilyParams
from ffstam.realroot import PrecisionContext
from ffstam.reference import (
    Family,
    classify_symmetries,
    default_library,
    family_reference,
    family_residual,
    hermite_distance,
    hermite_roots,
    joint_residual,
    normalize_shape,
    pair_diagnostics,
    reflect,
    semicircle_cdf,
    semicircle_quantiles,
    two_block_raw,
)


def norm(x):
    x = np.asarray(x, float)
    c = x - x.mean()
    return c / math.sqrt(np.mean(c**2))


class TestHermite:
    def test_n2(self):
        np.testing.assert_allclose(hermite_roots(2).array(), [-1, 1])

    def test_n6_table(self):
        np.testing.assert_allclose(hermite_roots(6).array(),
                                   [-1.4866, -0.8449, -0.2758, 0.2758, 0.8449, 1.4866], atol=1e-4)

    @pytest.mark.parametrize("n", [3, 8, 15])
    def test_raw_sum_of_squares(self, n):
        raw = hermite_roots(n).array() * math.sqrt(n - 1)
        assert np.sum(raw**2) == pytest.approx(n * (n - 1))

    @pytest.mark.parametrize("n", [4, 9, 20])
    def test_matches_numpy_oracle(self, n):
        oracle = np.sort(hermite_e.hermeroots([0] * n + [1])) / math.sqrt(n - 1)
        np.testing.assert_allclose(hermite_roots(n).array(), oracle, atol=1e-12)

    def test_high_precision_symmetric_unit_variance(self):
        ctx = PrecisionContext(60)
        h = list(hermite_roots(12, ctx).roots)
        assert abs(sum(h)) < 1e-55
        assert abs(sum(v * v for v in h) / 12 - 1) < 1e-55

    def test_invalid(self):
        with pytest.raises(ValueError):
            hermite_roots(1)


class TestNormalize:
    def test_examples(self):
        np.testing.assert_allclose(normalize_shape([-1, 1]).array(), [-1, 1])
        np.testing.assert_allclose(normalize_shape([0, 2]).array(), [-1, 1])
        np.testing.assert_allclose(normalize_shape([1, 2, 6]).array(),
                                   np.array([-2, -1, 3]) / math.sqrt(14 / 3))

    def test_degenerate(self):
        with pytest.raises(DegenerateConfig):
            normalize_shape([1.0, 1.0, 1.0])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=12))
    def test_idempotent(self, xs):
        x = np.array(xs)
        if np.std(x) < 1e-6:
            return
        once = normalize_shape(x).array()
        np.testing.assert_allclose(normalize_shape(once).array(), once, atol=1e-12)


class TestDistances:
    @pytest.mark.parametrize("n", [4, 7])
    def test_hermite_zero(self, n):
        h = hermite_roots(n).array()
        assert hermite_distance(h) == 0
        assert hermite_distance(h[::-1]) == pytest.approx(0, abs=1e-15)

    def test_uniform_direct(self):
        u = norm(np.arange(6))
        h = hermite_roots(6).array()
        expected = min(np.linalg.norm(u - h), np.linalg.norm(u - h[::-1])) / math.sqrt(6)
        assert hermite_distance(u) == pytest.approx(expected)
        assert expected > 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 12), st.floats(0.1, 10), st.floats(-5, 5))
    def test_affine_invariance(self, n, c, d):
        h = hermite_roots(n).array()
        assert hermite_distance(normalize_shape(c * h + d)) < 1e-10

    def test_pair_diagnostics(self):
        h = hermite_roots(6).array()
        d = pair_diagnostics(h, h)
        assert d.D == 0 and d.d_PQ == 0
        d = pair_diagnostics(h, -h[::-1])
        assert d.D == pytest.approx(0, abs=1e-28) and d.d_PQ == pytest.approx(0, abs=1e-15)
        a, b = np.array([-1.0, 1.0]), norm([-1.1, 1.1])
        assert pair_diagnostics(a, b).d_PQ == pytest.approx(np.linalg.norm(a - b) / math.sqrt(2))
        u = norm(np.arange(5.0)) ** 1
        d = pair_diagnostics(u, h[:5] if False else norm([0, 1, 2, 3, 7]))
        assert d.D == pytest.approx(d.d_H_alpha**2 + d.d_H_beta**2)


class TestFamilies:
    def test_uniform_n3(self):
        ref = family_reference(Family.UNIFORM, 3)
        c = math.sqrt(1.5)
        np.testing.assert_allclose(ref.ref_roots.array(), [-c, 0, c])

    def test_two_block_n4_large_gap(self):
        ref = family_reference(Family.TWO_BLOCK, 4, gap_ratio=50)
        x = ref.ref_roots.array()
        # blocks {0, 1} and {51, 52}: after normalisation two tight pairs near -1 and +1
        np.testing.assert_allclose(x, norm([0, 1, 51, 52]))
        assert x[1] < 0 < x[2] and x[1] - x[0] < 0.05

    def test_two_block_sizes(self):
        raw = two_block_raw(7, 3.0)
        np.testing.assert_allclose(np.diff(raw), [1, 1, 3, 1, 1, 1])

    def test_jacobi_legendre(self):
        nodes, _ = legendre.leggauss(7)
        ref = family_reference(Family.JACOBI, 7, a=0.0, b=0.0)
        np.testing.assert_allclose(ref.ref_roots.array(), norm(np.sort(nodes)), atol=1e-12)

    def test_semicircle_quantiles(self):
        q = semicircle_quantiles(8)
        dens = lambda x: math.sqrt(4 - x * x) / (2 * math.pi)
        for i, x in enumerate(q):
            mass = integrate.quad(dens, -2, x)[0]
            assert mass == pytest.approx((i + 0.5) / 8, abs=1e-10)
        assert semicircle_cdf(0.0) == pytest.approx(0.5)

    def test_library_normalized(self):
        for ref in default_library(6):
            x = ref.ref_roots.array()
            assert abs(x.mean()) < 1e-12 and np.mean(x**2) == pytest.approx(1)

    @pytest.mark.parametrize("kw", [dict(family=Family.JACOBI, n=5, a=-1.5, b=0.0),
                                    dict(family=Family.JACOBI, n=5),
                                    dict(family=Family.TWO_BLOCK, n=5, gap_ratio=-1.0),
                                    dict(family=Family.HERMITE, n=1)])
    def test_invalid_params(self, kw):
        with pytest.raises(InvalidFamilyParams):
            family_reference(**kw)


class TestResiduals:
    def test_exact_member(self):
        ref = family_reference(Family.SEMICIRCLE, 6)
        assert family_residual(2 * ref.ref_roots.array(), ref) == pytest.approx(0, abs=1e-14)

    def test_hermite_member(self):
        ref = family_reference(Family.HERMITE, 6)
        assert family_residual(hermite_roots(6), ref) == 0

    def test_orthogonal_boundary(self):
        ref = family_reference(Family.UNIFORM, 4)
        r = norm([1, -1, -1, 1])  # orthogonal to the uniform reference
        assert family_residual(r, ref) == pytest.approx(1.0)

    def test_negative_projection_boundary(self):
        ref = family_reference(Family.UNIFORM, 5)
        r = -ref.ref_roots.array()
        assert family_residual(r, ref) == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 10), st.integers(0, 10_000))
    def test_bounded_by_unit_scale(self, n, seed):
        r = norm(np.random.default_rng(seed).standard_normal(n))
        for ref in default_library(n)[:-1]:
            x = ref.ref_roots.array()
            assert family_residual(r, ref) <= np.linalg.norm(r - x) / math.sqrt(n) + 1e-12

    def test_two_block_fit_recovers_ratio(self):
        target = norm(two_block_raw(6, 4.0))
        ref = family_reference(Family.TWO_BLOCK, 6)
        assert family_residual(target, ref) < 1e-5

    def test_joint_modes(self):
        ref = family_reference(Family.SEMICIRCLE, 6)
        x = ref.ref_roots.array()
        for mode in ("A", "B"):
            assert joint_residual(x, x, ref, mode) == pytest.approx(0, abs=1e-12)
        assert joint_residual(2 * x + 5, x, ref, "A") == pytest.approx(0, abs=1e-12)
        assert joint_residual(2 * x + 5, x, ref, "B") > 1e-3

    def test_mode_b_by_least_squares(self):
        # solve the joint shift/scale fit independently with lstsq
        ref = family_reference(Family.UNIFORM, 5)
        x = ref.ref_roots.array()
        a, b = 2 * x + 5, x + 0.3 * np.sin(np.arange(5))
        pooled = np.concatenate([a, b])
        y = (pooled - pooled.mean()) / pooled.std()
        X = np.column_stack([np.ones(10), np.concatenate([x, x])])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        assert coef[1] > 0
        resid = y - X @ coef
        assert joint_residual(a, b, ref, "B") == pytest.approx(math.sqrt(resid @ resid / 5))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(3, 8), st.floats(0.2, 5), st.floats(0.2, 5), st.floats(-3, 3), st.integers(0, 10_000))
    def test_gauge_invariances(self, n, c1, c2, d, seed):
        r = np.random.default_rng(seed)
        a, b = np.sort(r.standard_normal(n)), np.sort(r.standard_normal(n))
        ref = family_reference(Family.SEMICIRCLE, n)
        base_a, base_b = joint_residual(a, b, ref, "A"), joint_residual(a, b, ref, "B")
        assert joint_residual(c1 * a + d, c2 * b - d, ref, "A") == pytest.approx(base_a, abs=1e-10)
        assert joint_residual(c1 * a + d, c1 * b + d, ref, "B") == pytest.approx(base_b, abs=1e-10)

    def test_mode_b_sensitive_to_distinct_scales(self, rng):
        a, b = np.sort(rng.standard_normal(6)), np.sort(rng.standard_normal(6))
        ref = family_reference(Family.SEMICIRCLE, 6)
        assert joint_residual(3 * a, b, ref, "B") != pytest.approx(joint_residual(a, b, ref, "B"))
        assert joint_residual(3 * a, b, ref, "A") == pytest.approx(joint_residual(a, b, ref, "A"))

    def test_unknown_mode(self):
        ref = family_reference(Family.UNIFORM, 3)
        with pytest.raises(ValueError):
            joint_residual([0, 1, 2], [0, 1, 2], ref, "C")


class TestSymmetries:
    def test_diagonal_matching(self):
        x = norm([-2, -1, 0, 1, 2])
        for t in (0.05, 0.1, 0.2):
            assert classify_symmetries(x, x, t).s3

    def test_hermite_antidiagonal(self):
        h = hermite_roots(6).array()
        f = classify_symmetries(h, h, 0.05)
        assert f.s4 and all(f.s1) and all(f.s2)

    def test_unequal_blocks_not_reflection_symmetric(self):
        x = norm(two_block_raw(7, 5.0))
        f = classify_symmetries(x, x, 0.05)
        assert f.s1 == (False, False)

    def test_reflect(self):
        np.testing.assert_allclose(reflect([0, 1, 5]), [-5, -1, 0])

    def test_s4_definition(self):
        a = norm([0, 1, 5, 6])
        b = norm([-6, -5, -1, 0])
        f = classify_symmetries(a, -a[::-1] * 1.0, 0.05)
        assert f.s4
        assert classify_symmetries(a, b, 0.1).s4 == (np.linalg.norm(a + b[::-1]) / 2 < 0.1)
