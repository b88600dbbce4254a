import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from benfrag.rng import Substream
from benfrag.significand import (
    BENFORD_FIRST_DIGIT,
    SignificandSample,
    benford_cdf,
    conformance,
    first_digit_chi2,
    frac,
    ks_distance,
    significand_from_log,
)


def test_significand_examples():
    assert significand_from_log(math.log10(123.45)) == pytest.approx(1.2345, rel=1e-14)
    assert significand_from_log(math.log10(0.00321)) == pytest.approx(3.21, rel=1e-14)
    assert significand_from_log(math.log2(3.0), base=2.0) == pytest.approx(1.5, rel=1e-15)
    assert significand_from_log(-3.0) == 1.0
    with pytest.raises(ValueError):
        significand_from_log(-math.inf)


def test_frac_wraps_to_zero():
    assert frac(-1e-18) == 0.0
    assert frac(2.75) == 0.75 and frac(-0.25) == 0.75
    assert frac(-2.4935) == pytest.approx(0.5065, abs=1e-12)


def test_benford_cdf_values():
    assert benford_cdf(2) == pytest.approx(0.3010300, abs=1e-7)
    assert benford_cdf(1) == 0.0 and benford_cdf(10) == 1.0
    assert benford_cdf(2.0, base=2.0) == 1.0
    D = np.linspace(1, 10, 1001)
    assert np.all(np.diff(benford_cdf(D)) > 0)
    with pytest.raises(ValueError):
        benford_cdf(0.5)
    with pytest.raises(ValueError):
        benford_cdf(11)


def test_single_point_ks():
    s = SignificandSample(np.array([math.log10(math.sqrt(10))]))
    assert conformance(s, first_digit=False).ks_distance == pytest.approx(0.5, abs=1e-15)


def test_chi2_zero_at_expected_counts():
    N = 1e6
    assert first_digit_chi2(N * BENFORD_FIRST_DIGIT) == pytest.approx(0.0, abs=1e-18)
    assert first_digit_chi2(np.round(N * BENFORD_FIRST_DIGIT)) < 1e-3


def test_chi2_matches_scipy():
    rng = np.random.default_rng(1)
    counts = rng.multinomial(5000, BENFORD_FIRST_DIGIT / BENFORD_FIRST_DIGIT.sum())
    ref = stats.chisquare(counts, counts.sum() * BENFORD_FIRST_DIGIT).statistic
    assert first_digit_chi2(counts) == pytest.approx(ref, rel=1e-12)


def test_ks_matches_scipy():
    u = Substream(9).uniform(4000) ** 1.3
    assert ks_distance(u) == pytest.approx(stats.kstest(u, "uniform").statistic, abs=1e-14)


def test_exact_benford_sample_conforms():
    # X = B^U with U uniform is exactly Benford
    u = Substream(123).uniform(100_000)
    rep = conformance(SignificandSample(u + 7.0))
    assert rep.ks_distance <= 0.0095
    assert rep.sample_size == 100_000
    assert rep.chi2_first_digit < stats.chi2.ppf(0.999, 8)


def test_powers_of_two():
    # frac(j log10 2) is equidistributed
    j = np.arange(1, 10_001)
    rep = conformance(SignificandSample(j * math.log10(2)))
    assert rep.ks_distance <= 0.01
    # exact count from big-integer arithmetic: 3010 of 2^1..2^10000 start with 1
    assert rep.digit_counts[0] == 3010


def test_far_from_benford():
    # significands uniform on [1, 10): the KS distance is the sup of log10 D - (D-1)/9
    D = 1 + 9 * Substream(4).uniform(50_000)
    rep = conformance(SignificandSample(np.log10(D)))
    oracle = max(math.log10(x) - (x - 1) / 9 for x in np.linspace(1, 10, 100_001))
    assert rep.ks_distance == pytest.approx(oracle, abs=0.01)


@settings(max_examples=50, deadline=None)
@given(shift=st.integers(-300, 300), seed=st.integers(0, 2**32))
def test_integer_shift_invariance(shift, seed):
    lv = Substream(seed).uniform(200) * 5 - 3
    a = conformance(SignificandSample(lv))
    b = conformance(SignificandSample(lv + shift))
    assert a.ks_distance == pytest.approx(b.ks_distance, abs=1e-9)


def test_ecdf():
    s = SignificandSample(np.log10([1.5, 2.5, 9.0]))
    assert list(s.ecdf([1.0, 2.0, 3.0, 10.0])) == pytest.approx([0, 1 / 3, 2 / 3, 1])


def test_base_restrictions():
    s = SignificandSample(np.array([0.3, 0.7]), base=2.0)
    rep = conformance(s)
    assert rep.chi2_first_digit is None and rep.rows() == [("ks_distance", rep.ks_distance)]
    with pytest.raises(ValueError, match="base 10"):
        conformance(s, first_digit=True)
    with pytest.raises(ValueError):
        SignificandSample(np.array([math.nan]))
