import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from benfrag import spectral
from benfrag.distributions import Beta, LogUniform, UniformUnit, char_fn_normalized, sample_log_array
from benfrag.rng import Substream
from benfrag.spectral import (
    MaxDensityModel,
    QuadratureError,
    SpectralProfile,
    WindowSet,
    cdf_from_char_fn,
    invert_char_fn,
    max_density,
    mellin_condition_sum,
    sinc,
    std_normal_cdf,
    std_normal_pdf,
    window_probability,
)

NORM_LU = LogUniform.normalized()
PHI0 = 0.398942280401432678
X = np.linspace(-6, 6, 241)


def test_sinc_examples():
    assert sinc(0.0) == 1.0
    assert abs(sinc(math.pi)) <= 1e-15
    u = np.linspace(1, 200, 5000)
    assert np.all(np.abs(sinc(u)) <= 1 / u)
    assert np.array_equal(sinc(u), sinc(-u))


def test_normal_cdf():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(8.0) == pytest.approx(1.0, abs=1e-15)
    assert std_normal_cdf(30.0) == 1.0
    mpmath.mp.dps = 30
    for x in (1.0, -2.3, 0.4, 5.1):
        assert std_normal_cdf(x) == pytest.approx(float(mpmath.ncdf(x)), abs=1e-15)
    assert std_normal_cdf(1.0) == pytest.approx(0.8413447, abs=1e-7)
    x = np.linspace(-10, 10, 2001)
    assert np.all(std_normal_cdf(x) + std_normal_cdf(-x) == 1.0)
    assert np.all(np.diff(std_normal_cdf(np.linspace(-8, 5, 1001))) > 0)
    # the upper tail saturates at 1.0 in double precision
    assert np.all(np.diff(std_normal_cdf(np.linspace(-40, 40, 4001))) >= 0)


def test_normal_pdf_integrates_to_one():
    xs = np.linspace(-12, 12, 4801)
    assert integrate.trapezoid(std_normal_pdf(xs), xs) == pytest.approx(1.0, abs=1e-6)


def test_inversion_near_gaussian_at_100():
    r = invert_char_fn(SpectralProfile(100), NORM_LU, [0.0])
    assert abs(r.density[0] - PHI0) <= 0.01
    assert r.imag_residual <= 1e-10
    assert r.tail_bound < 1e-8


def test_inversion_matches_exact_irwin_hall():
    # n = 3 standardized uniform sum has a piecewise-quadratic density
    n = 3
    a = math.sqrt(3)
    r = invert_char_fn(SpectralProfile(n, k_max=400.0), NORM_LU, [0.0, 0.5])
    # sum of three U(-a, a); at 0 the density is 3/(8a), scaled by sqrt(3)
    def irwin(s):  # density of sum of 3 U(0,1) at s in [1, 2]
        return (-2 * s * s + 6 * s - 3) / 2
    for x, got in zip((0.0, 0.5), r.density):
        s = (x * math.sqrt(n) + 3 * a) / (2 * a)
        expect = irwin(s) * math.sqrt(n) / (2 * a)
        assert got == pytest.approx(expect, abs=2e-3)


def test_rate_400_vs_100():
    e100 = invert_char_fn(SpectralProfile(100), NORM_LU, X).sup_error
    e400 = invert_char_fn(SpectralProfile(400), NORM_LU, X).sup_error
    assert e400 <= 2 * e100 / 4


def test_density_integrates_to_one():
    xs = np.linspace(-10, 10, 801)
    r = invert_char_fn(SpectralProfile(50), NORM_LU, xs)
    assert integrate.trapezoid(r.density, xs) == pytest.approx(1.0, abs=1e-6)


def test_cdf_inversion_matches_integral_of_density():
    p = SpectralProfile(30)
    xs = np.array([-1.0, 0.0, 0.7, 2.0])
    F = cdf_from_char_fn(p, NORM_LU, xs)
    assert F[1] == pytest.approx(0.5, abs=1e-9)
    dens = lambda t: invert_char_fn(p, NORM_LU, [t]).density[0]
    assert F[2] - F[0] == pytest.approx(integrate.quad(dens, -1.0, 0.7)[0], abs=1e-7)
    assert np.all(np.diff(F) > 0)


def test_other_families_invert():
    for d in (UniformUnit(), Beta(alpha=2, beta=3)):
        r = invert_char_fn(SpectralProfile(200), d, X)
        assert r.sup_error < 0.02


def test_quadrature_error_on_non_hermitian_transform(monkeypatch):
    monkeypatch.setattr(spectral, "char_fn_normalized", lambda d, n, k: np.exp(-0.5 * k * k) * (1 + 0.01j))
    with pytest.raises(QuadratureError, match="imaginary residue"):
        invert_char_fn(SpectralProfile(10), NORM_LU, [0.3])


def test_profile_validation():
    with pytest.raises(ValueError):
        SpectralProfile(100, bandwidth_eps=0.125)
    with pytest.raises(ValueError):
        SpectralProfile(10**6, k_max=1.0)
    assert SpectralProfile(3).k_max == 3.0 and SpectralProfile(10**4).k_max == 40.0


def test_max_density():
    xs = np.array([-1.0, 0.2, 1.5])
    m1 = MaxDensityModel(m=1)
    assert np.array_equal(max_density(m1, xs), std_normal_pdf(xs))
    num1 = MaxDensityModel(m=1, mode="numeric", n=40, dist=NORM_LU)
    assert np.allclose(max_density(num1, xs), invert_char_fn(SpectralProfile(40), NORM_LU, xs).density)
    assert max_density(MaxDensityModel(m=2), 0.0) == pytest.approx(PHI0, abs=1e-15)
    xs = np.linspace(-10, 10, 4001)
    for m in (1, 2, 3, 7):
        assert integrate.trapezoid(max_density(MaxDensityModel(m=m), xs), xs) == pytest.approx(1.0, abs=1e-4)


def test_window_full_period():
    for m in (1, 3):
        assert window_probability(MaxDensityModel(m=m), WindowSet(0.0, 1.0, 400)) == pytest.approx(1.0, abs=1e-6)


def test_window_log10_2():
    w = window_probability(MaxDensityModel(m=3), WindowSet(0.0, math.log10(2), 400))
    assert w == pytest.approx(math.log10(2), abs=0.01)


def test_window_translation_invariance():
    model = MaxDensityModel(m=3)
    base = window_probability(model, WindowSet(0.0, 0.3, 400))
    for c in (0.1, 0.45, 0.7):
        assert window_probability(model, WindowSet(c, c + 0.3, 400)) == pytest.approx(base, abs=0.01)


def test_window_m1_equidistribution():
    # m = 1: frac of a Gaussian with sd sqrt(n) is nearly uniform
    assert window_probability(MaxDensityModel(m=1), WindowSet(0.2, 0.55, 100)) == pytest.approx(0.35, abs=1e-9)


def test_window_numeric_mode():
    model = MaxDensityModel(m=3, mode="numeric", n=100, dist=NORM_LU)
    assert window_probability(model, WindowSet(0.0, math.log10(2), 100)) == pytest.approx(math.log10(2), abs=0.01)
    with pytest.raises(ValueError):
        window_probability(model, WindowSet(0.0, 0.5, 400))


@pytest.mark.parametrize("n", [16, 64, 256, 1024])
def test_mid_band_suppression(n):
    k = n**0.25
    assert abs(char_fn_normalized(NORM_LU, n, k)) <= math.exp(-math.sqrt(n) / 2.1) + 1e-12


def test_ecf_matches_closed_form():
    N = 1_000_000
    for n in (5, 10, 50):
        s = Substream(500 + n)
        z = np.concatenate([sample_log_array(NORM_LU, s, (N // 10, n)).sum(axis=1) for _ in range(10)]) / math.sqrt(n)
        for k in (0.5, 1.0, 2.0, 4.0):
            assert abs(char_fn_normalized(NORM_LU, n, k) - np.mean(np.exp(1j * k * z))) <= 5e-3


def test_mellin_uniform_first_term():
    ms = mellin_condition_sum(UniformUnit(), 1, 5, "original")
    assert ms.terms[0] == pytest.approx(1 / math.sqrt(1 + (2 * math.pi / math.log(10)) ** 2), abs=1e-9)
    assert ms.terms[0] == pytest.approx(0.344090049004831, abs=1e-12)
    assert ms.max_term == ms.terms[0]


def test_mellin_loguniform_char_fn_grid():
    d = LogUniform(a=-1.3, b=-0.2)
    ms = mellin_condition_sum(d, 1, 30, "char_fn")
    ell = np.arange(1, 31)
    assert np.allclose(ms.terms, np.abs(sinc(ell * 1.1 / 2)), atol=1e-13)
    ms3 = mellin_condition_sum(d, 3, 30, "char_fn")
    assert np.allclose(ms3.terms, np.abs(sinc(ell * 1.1 / 2)) ** 3, atol=1e-13)


@pytest.mark.parametrize("dist", [UniformUnit(), LogUniform(a=-1.3, b=-0.2), Beta(alpha=2, beta=3)], ids=repr)
@pytest.mark.parametrize("grid", ["original", "char_fn"])
def test_mellin_sums_decrease_in_n(dist, grid):
    sums = [mellin_condition_sum(dist, n, 50, grid).partial_sum for n in range(1, 16)]
    assert all(b <= a for a, b in zip(sums, sums[1:]))
    assert sums[-1] < sums[0]


def test_mellin_sum_falls_and_certifies():
    ms = mellin_condition_sum(UniformUnit(), 20, 50, "original")
    assert ms.partial_sum < 1e-6 and ms.certified
    assert ms.partial_sums[-1] == pytest.approx(ms.partial_sum)
    # n = 1 terms decay like 1/ell, so no finite ell_max certifies the tail
    assert not mellin_condition_sum(UniformUnit(), 1, 50).certified
    with pytest.raises(ValueError):
        mellin_condition_sum(UniformUnit(), 1, 0)
