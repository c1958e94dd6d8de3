import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffstam.aht import (
    CAVEAT,
    Decision,
    Favoured,
    evalue,
    gap_statistic,
    log_evalue,
    order_statistic_bands,
    screen_family,
    summarize_elites,
)
from ffstam.errors import EmptyElites, InvalidCounts
from ffstam.reference import Family, family_reference, hermite_roots, two_block_raw
from ffstam.search import EliteBuffer, EliteEntry, _diag_values
from ffstam.reference import PairDiagnostics


def exact_evalue(s: int, m: int) -> Fraction:
    """2^(M+1) * Beta integral over [1/2, 1], via the binomial identity."""
    return Fraction(sum(comb(m + 1, k) for k in range(m - s + 1, m + 2)), (m + 1) * comb(m, s))


def make_buffer(pairs, p=1.5):
    n = len(pairs[0][0])
    buf = EliteBuffer(len(pairs), n, p)
    for i, (a, b) in enumerate(pairs):
        a, b = np.sort(np.asarray(a, float)), np.sort(np.asarray(b, float))
        buf.entries.append(EliteEntry(a, b, float(i), float(i), 0.0, PairDiagnostics(*_diag_values(a, b))))
    return buf


def noisy(base, count, scale, seed=0):
    rng = np.random.default_rng(seed)
    return [(base + scale * rng.standard_normal(base.size), base + scale * rng.standard_normal(base.size))
            for _ in range(count)]


class TestEvalue:
    def test_examples(self):
        assert evalue(1, 1) == pytest.approx(1.5)
        assert evalue(0, 1) == pytest.approx(0.5)
        assert evalue(0, 0) == pytest.approx(1.0)

    def test_all_wins_large(self):
        expect = math.log(2**129 - 1) - math.log(129)
        assert log_evalue(128, 128) == pytest.approx(expect, abs=1e-10)

    @pytest.mark.parametrize("m", [1, 2, 7, 30, 100, 333, 1000])
    def test_exact_oracle(self, m):
        for s in sorted({0, 1, m // 3, m // 2, m - 1, m}):
            ex = exact_evalue(s, m)
            lg = math.log(ex.numerator) - math.log(ex.denominator)
            assert log_evalue(s, m) == pytest.approx(lg, abs=1e-10)

    def test_far_tail(self):
        m = 4000
        ex = exact_evalue(0, m)
        assert log_evalue(0, m) == pytest.approx(math.log(ex.numerator) - math.log(ex.denominator), rel=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 400).flatmap(lambda m: st.tuples(st.just(m), st.integers(0, m - 1))))
    def test_monotone_in_wins(self, ms):
        m, s = ms
        assert log_evalue(s + 1, m) > log_evalue(s, m)

    @pytest.mark.parametrize("m", [2, 10, 50, 200])
    def test_half_wins_not_evidence(self, m):
        assert evalue(m // 2, m) <= 1.0

    @pytest.mark.parametrize("s,m", [(-1, 3), (4, 3), (1, -1), (1.5, 3), (True, 3)])
    def test_invalid(self, s, m):
        with pytest.raises(InvalidCounts):
            evalue(s, m)


class TestScreen:
    def test_hermite_elites_favour_hermite(self):
        h = hermite_roots(6).array()
        buf = make_buffer(noisy(h, 40, 0.01))
        res = screen_family(buf, family_reference(Family.TWO_BLOCK, 6))
        assert res.m_eff == 40 and res.wins == 0
        assert res.e_value == pytest.approx(1 / 41)
        assert res.decision is Decision.NO_REJECT and res.favoured is Favoured.HERMITE

    def test_two_block_elites_reject(self):
        base = two_block_raw(6, 4.0)
        buf = make_buffer(noisy(base, 10, 0.01, seed=1))
        res = screen_family(buf, family_reference(Family.TWO_BLOCK, 6))
        assert res.m_eff >= 10 and res.wins == res.m_eff
        assert res.e_value == pytest.approx((2**11 - 1) / 11)
        assert res.e_value >= 20
        assert res.decision is Decision.REJECT and res.favoured is Favoured.FAMILY
        assert res.csv_row()[-2:] == ["Reject_H0", "Family"]

    def test_reorder_invariant(self):
        pairs = noisy(hermite_roots(5).array(), 12, 0.2, seed=4)
        fam = family_reference(Family.UNIFORM, 5)
        r1 = screen_family(make_buffer(pairs), fam)
        r2 = screen_family(make_buffer(pairs[::-1]), fam)
        assert (r1.wins, r1.m_eff, r1.e_value) == (r2.wins, r2.m_eff, r2.e_value)

    def test_ties_dropped(self):
        # the Hermite reference screened against itself: every comparison ties
        h = hermite_roots(5).array()
        res = screen_family(make_buffer(noisy(h, 6, 0.1)), family_reference(Family.HERMITE, 5))
        assert res.m_eff == 0 and res.e_value == pytest.approx(1.0)
        assert res.favoured is Favoured.INCONCLUSIVE

    def test_top_truncation(self):
        h = hermite_roots(6).array()
        buf = make_buffer(noisy(h, 30, 0.01))
        assert screen_family(buf, family_reference(Family.UNIFORM, 6), top=10).m_eff == 10

    def test_empty(self):
        with pytest.raises(EmptyElites):
            screen_family(EliteBuffer(4, 4, 2.0), family_reference(Family.UNIFORM, 4))
        with pytest.raises(EmptyElites):
            summarize_elites(EliteBuffer(4, 4, 2.0))


class TestSummary:
    def test_two_block_population(self):
        base = two_block_raw(6, 4.0)
        buf = make_buffer(noisy(base, 20, 0.01, seed=2))
        summ = summarize_elites(buf)
        assert summ.best_family.startswith("TwoBlock")
        assert summ.consistency == 1.0
        assert summ.median_d_joint < 0.02
        assert summ.sym_fractions[("S3", 0.1)] == 1.0
        assert summ.caveat == CAVEAT and "optimizer-selected" in CAVEAT
        assert len(summ.csv_row(6, 1.5)) == 8

    def test_hermite_population_symmetries(self):
        h = hermite_roots(6).array()
        summ = summarize_elites(make_buffer([(h, h)] * 3))
        assert summ.best_family == "Hermite"
        for flag in ("S1", "S2", "S3", "S4"):
            assert summ.sym_fractions[(flag, 0.05)] == 1.0
        assert summ.best_D == pytest.approx(0, abs=1e-20)

    def test_mismatched_pairs(self):
        a = two_block_raw(6, 4.0)
        h = hermite_roots(6).array()
        summ = summarize_elites(make_buffer([(a, h)] * 4))
        assert summ.sym_fractions[("S3", 0.1)] == 0.0
        assert summ.size == 4

    def test_bands(self):
        h = hermite_roots(5).array()
        rows = order_statistic_bands(make_buffer(noisy(h, 50, 0.05)), "alpha")
        assert len(rows) == 5
        for i, row in enumerate(rows):
            assert row[0] == i + 1
            assert row[1:] == sorted(row[1:])
            assert abs(row[3] - h[i]) < 0.05


class TestGapStatistic:
    def test_examples(self):
        assert gap_statistic([0, 1, 2, 3]) == pytest.approx(1.0)
        assert gap_statistic([0, 1, 2, 12, 13]) == pytest.approx(10.0)
        assert 1 < gap_statistic(hermite_roots(6)) < 2

    def test_affine_invariant(self, rng):
        x = np.sort(rng.standard_normal(7))
        assert gap_statistic(3 * x - 1) == pytest.approx(gap_statistic(x))

    def test_small_n(self):
        with pytest.raises(ValueError):
            gap_statistic([0.0, 1.0])
