"""Characteristic functions, their inversion, and the max-of-m significand window.

Notation: ``Z`` is the standardized sum of ``n`` log-cuts, ``f_n`` its
density and ``fhat_n`` its characteristic function; ``phi``/``Phi`` are the
standard normal density and CDF; ``g_n = m F_n^(m-1) f_n`` is the density of
the largest of ``m`` independent copies of ``Z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .distributions import LogUniform, ProportionDistribution, UniformUnit, char_fn_normalized

__all__ = [
    "InversionResult",
    "MaxDensityModel",
    "MellinSum",
    "QuadratureError",
    "SpectralProfile",
    "WindowSet",
    "cdf_from_char_fn",
    "invert_char_fn",
    "max_density",
    "mellin_condition_sum",
    "sinc",
    "std_normal_cdf",
    "std_normal_pdf",
    "window_probability",
]

IMAG_TOL = 1e-10
STEP_TOL = 1e-9
_MAX_PANELS = 1 << 16
_X_CHUNK = 256


class QuadratureError(RuntimeError):
    """A numerical certificate (imaginary residue, step convergence) failed."""


def sinc(u):
    """``sin(u) / u`` with ``sinc(0) = 1`` (unnormalized)."""
    u = np.asarray(u, dtype=float)
    out = np.sinc(u / np.pi)
    return float(out) if out.ndim == 0 else out


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def std_normal_cdf(x):
    """Standard normal CDF through ``erfc``.

    Evaluated as ``erfc(-x / sqrt 2) / 2`` for ``x <= 0`` and as
    ``1 - Phi(-x)`` for ``x > 0``, so ``Phi(-x) = 1 - Phi(x)`` holds by
    construction and the lower tail keeps full relative precision.
    """
    x = np.asarray(x, dtype=float)
    lower = 0.5 * special.erfc(np.abs(x) / math.sqrt(2.0))
    out = np.where(x <= 0, lower, 1.0 - lower)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectralProfile:
    """Frequency-domain settings for ``n`` steps.

    ``k_max`` defaults to ``min(sqrt(3 n), 40)``.  ``bandwidth_eps`` is the
    low-frequency band exponent: ``|k| <= n**eps`` carries the Gaussian
    approximation, and it must stay below 1/8.
    """

    n: int
    bandwidth_eps: float = 0.1
    k_max: float | None = None
    grid_step: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not 0 < self.bandwidth_eps < 0.125:
            raise ValueError("bandwidth_eps must lie in (0, 1/8)")
        k = min(math.sqrt(3.0 * self.n), 40.0) if self.k_max is None else float(self.k_max)
        if k < self.n**self.bandwidth_eps:
            raise ValueError("k_max must be at least n**bandwidth_eps")
        object.__setattr__(self, "k_max", k)

    @property
    def low_band(self) -> float:
        return self.n**self.bandwidth_eps


def _tail_bound(dist: ProportionDistribution, n: int, k_max: float) -> float:
    """Bound on ``(1/2pi) int_{|k|>k_max} |fhat_n(k)| dk``.

    Uses ``|sinc(u)| <= 1/|u|`` for log-uniform cuts and
    ``|1/(1 + i y)| <= 1/|y|`` for unit-uniform cuts.  Other families get
    ``nan`` (no certificate).
    """
    if n < 2:
        return math.inf
    if isinstance(dist, LogUniform):
        # |fhat_n(k)| <= (k sqrt3 / sqrt n)^-n
        c = math.sqrt(n / 3.0)
    elif isinstance(dist, UniformUnit):
        # |fhat_n(k)| <= (k / sqrt n)^-n  (sigma = 1 / ln B scales out)
        c = math.sqrt(n)
    else:
        return math.nan
    if k_max <= c:
        return math.inf
    log_b = math.log(2.0) + n * math.log(c) + (1 - n) * math.log(k_max) - math.log(n - 1)
    return math.exp(log_b) / (2 * math.pi)


@dataclass(frozen=True)
class InversionResult:
    x: np.ndarray
    density: np.ndarray
    imag_residual: float
    grid_step: float
    tail_bound: float
    profile: SpectralProfile = field(repr=False)

    @property
    def phi(self) -> np.ndarray:
        return std_normal_pdf(self.x)

    @property
    def abs_err(self) -> np.ndarray:
        return np.abs(self.density - self.phi)

    @property
    def sup_error(self) -> float:
        return float(np.max(self.abs_err))


def _trapezoid_inverse(dist, n, x, k_max, panels):
    h = k_max / panels
    k = np.arange(-panels, panels + 1) * h
    w = np.full(k.size, h)
    w[0] = w[-1] = 0.5 * h
    fh = char_fn_normalized(dist, n, k) * w
    out = np.empty(x.size, dtype=complex)
    for lo in range(0, x.size, _X_CHUNK):
        xs = x[lo : lo + _X_CHUNK]
        out[lo : lo + _X_CHUNK] = np.exp(-1j * np.outer(xs, k)) @ fh
    return out / (2.0 * math.pi)


def invert_char_fn(profile: SpectralProfile, dist: ProportionDistribution, x_grid) -> InversionResult:
    """Density ``f_n`` on ``x_grid`` by trapezoid Fourier inversion over ``|k| <= k_max``.

    The step is halved until successive passes agree to ``1e-9`` everywhere
    (or ``profile.grid_step`` is used as given).  Raises
    :class:`QuadratureError` if the imaginary residue exceeds ``1e-10`` or the
    step refinement does not settle.
    """
    n = profile.n
    x = np.atleast_1d(np.asarray(x_grid, dtype=float))
    K = profile.k_max
    if profile.grid_step is not None:
        panels = max(1, int(math.ceil(K / profile.grid_step)))
        vals = _trapezoid_inverse(dist, n, x, K, panels)
    else:
        panels = 32
        prev = _trapezoid_inverse(dist, n, x, K, panels)
        while True:
            panels *= 2
            vals = _trapezoid_inverse(dist, n, x, K, panels)
            if np.max(np.abs(vals - prev)) < STEP_TOL:
                break
            if panels >= _MAX_PANELS:
                raise QuadratureError("trapezoid refinement did not converge")
            prev = vals
    resid = float(np.max(np.abs(vals.imag)))
    if resid > IMAG_TOL:
        raise QuadratureError(f"imaginary residue {resid:.3g} exceeds {IMAG_TOL:g}")
    return InversionResult(
        x=x,
        density=vals.real,
        imag_residual=resid,
        grid_step=K / panels,
        tail_bound=_tail_bound(dist, n, K),
        profile=profile,
    )


def _midpoint_cdf(dist, n, x, k_max, panels):
    h = k_max / panels
    k = (np.arange(panels) + 0.5) * h
    fh = char_fn_normalized(dist, n, k) * (h / k)
    out = np.empty(x.size)
    for lo in range(0, x.size, _X_CHUNK):
        xs = x[lo : lo + _X_CHUNK]
        out[lo : lo + _X_CHUNK] = (np.exp(-1j * np.outer(xs, k)) @ fh).imag
    return 0.5 - out / math.pi


def cdf_from_char_fn(profile: SpectralProfile, dist: ProportionDistribution, x_grid) -> np.ndarray:
    """``F_n`` on ``x_grid`` by Gil-Pelaez inversion (midpoint rule, step halving)."""
    x = np.atleast_1d(np.asarray(x_grid, dtype=float))
    K = profile.k_max
    panels = 64
    prev = _midpoint_cdf(dist, profile.n, x, K, panels)
    while True:
        panels *= 2
        vals = _midpoint_cdf(dist, profile.n, x, K, panels)
        if np.max(np.abs(vals - prev)) < STEP_TOL:
            return np.clip(vals, 0.0, 1.0)
        if panels >= _MAX_PANELS:
            raise QuadratureError("CDF refinement did not converge")
        prev = vals


@dataclass(frozen=True)
class MaxDensityModel:
    """Density of the largest of ``m`` iid standardized log-sums.

    ``mode="gaussian"`` uses the limit ``m Phi^(m-1) phi``; ``mode="numeric"``
    inverts the characteristic function of ``dist`` at ``n`` steps.
    """

    m: int
    mode: str = "gaussian"
    n: int | None = None
    dist: ProportionDistribution | None = None
    bandwidth_eps: float = 0.1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.mode not in ("gaussian", "numeric"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "numeric" and (self.n is None or self.dist is None):
            raise ValueError("numeric mode needs n and dist")

    def profile(self, n: int | None = None) -> SpectralProfile:
        return SpectralProfile(n=self.n if n is None else n, bandwidth_eps=self.bandwidth_eps)

    def base_pdf(self, x) -> np.ndarray:
        if self.mode == "gaussian":
            return std_normal_pdf(x)
        return invert_char_fn(self.profile(), self.dist, x).density

    def base_cdf(self, x) -> np.ndarray:
        if self.mode == "gaussian":
            return std_normal_cdf(x)
        return cdf_from_char_fn(self.profile(), self.dist, x)


def max_density(model: MaxDensityModel, x):
    """``g(x) = m F(x)^(m-1) f(x)`` for the model's base law."""
    xa = np.asarray(x, dtype=float)
    f = model.base_pdf(np.atleast_1d(xa))
    if model.m == 1:
        out = f
    else:
        out = model.m * model.base_cdf(np.atleast_1d(xa)) ** (model.m - 1) * f
    out = np.asarray(out).reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WindowSet:
    """``E_n``: the union of ``((j + a)/sqrt n, (j + b)/sqrt n)`` over integers ``j``.

    In significand terms this is the event ``frac(sqrt(n) Z) in (a, b)``.
    """

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not 0 <= self.a < self.b <= 1:
            raise ValueError("need 0 <= a < b <= 1")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def support(self) -> float:
        return math.sqrt(3.0 * self.n)

    def intervals(self) -> tuple[np.ndarray, np.ndarray]:
        """Interval endpoints, clipped to ``[-sqrt(3n), sqrt(3n)]``."""
        rn = math.sqrt(self.n)
        L = self.support
        j = np.arange(math.floor(-L * rn - self.b) - 1, math.ceil(L * rn - self.a) + 2)
        lo = np.clip((j + self.a) / rn, -L, L)
        hi = np.clip((j + self.b) / rn, -L, L)
        keep = hi > lo
        return lo[keep], hi[keep]


def window_probability(model: MaxDensityModel, window: WindowSet) -> float:
    """Integral of the max density over ``E_n``, as a sum of ``F^m`` increments."""
    lo, hi = window.intervals()
    if model.mode == "numeric" and model.n != window.n:
        raise ValueError("numeric model and window must share n")
    pts = np.concatenate([lo, hi])
    G = model.base_cdf(pts) ** model.m
    return float(math.fsum(G[lo.size :] - G[: lo.size]))


@dataclass(frozen=True)
class MellinSum:
    grid: str
    n: int
    ell: np.ndarray
    terms: np.ndarray
    partial_sum: float
    max_term: float
    tail_bound: float
    certified: bool

    @property
    def partial_sums(self) -> np.ndarray:
        """Running sums over ``ell = 1..ell_max`` (both signs counted)."""
        return np.cumsum(2.0 * self.terms)


def _envelope(dist: ProportionDistribution, omega: float):
    """``(c, q)`` with ``|single-cut term at ell| <= (c / ell) ** q`` for large ell.

    ``omega`` is the frequency spacing of the grid in ``log_B P``.  The Beta
    envelope is the leading asymptotic of ``|E[P^(iy)]|``, not a strict bound.
    """
    lb = dist.ln_base
    if isinstance(dist, UniformUnit):
        return lb / omega, 1.0
    if isinstance(dist, LogUniform):
        return 2.0 / (dist.width * omega), 1.0
    a, b = dist.alpha, dist.beta  # type: ignore[attr-defined]
    c = math.exp((special.gammaln(a + b) - special.gammaln(a)) / b) * lb / omega
    return c, b


def mellin_condition_sum(
    dist: ProportionDistribution,
    n: int,
    ell_max: int,
    grid: str = "original",
    tol_abs: float = 1e-12,
    tol_rel: float = 1e-3,
) -> MellinSum:
    """Partial sum over ``0 < |ell| <= ell_max`` of the Mellin-condition terms.

    ``grid="original"``: terms ``|M[f](1 - 2 pi i ell / ln B)| ** n``, i.e. the
    characteristic function of ``log_B P`` at ``2 pi ell``.

    ``grid="char_fn"``: terms ``|fhat_n(ell sqrt(n) sigma_P)|``, which equals
    ``|E exp(i ell log_B P)| ** n`` (the transform at integer frequencies
    ``ell``); with unit-variance cuts this is ``|fhat_n(ell sqrt n)|``.

    The tail beyond ``ell_max`` is bounded from the family's decay envelope;
    ``certified`` says whether that bound is below ``max(tol_abs, tol_rel *
    partial_sum)``.
    """
    if ell_max < 1:
        raise ValueError("ell_max must be at least 1")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    ell = np.arange(1, ell_max + 1, dtype=float)
    if grid == "original":
        s = 1.0 - 2j * np.pi * ell / dist.ln_base
        single = np.abs(dist.mellin(s))
        terms = np.exp(n * np.log(single))
        omega = 2 * math.pi
    elif grid == "char_fn":
        sig = dist.log_moments().sigma_p
        terms = np.abs(char_fn_normalized(dist, n, ell * math.sqrt(n) * sig))
        omega = 1.0
    else:
        raise ValueError(f"unknown grid {grid!r}")
    # the sum is symmetric in ell since |fhat(-k)| = |fhat(k)|
    partial = 2.0 * math.fsum(terms)
    c, q = _envelope(dist, omega)
    p = q * n
    if p <= 1 or ell_max <= c:
        tail = math.inf
    else:
        tail = 2.0 * math.exp(p * math.log(c / ell_max)) * ell_max / (p - 1)
    certified = tail <= max(tol_abs, tol_rel * partial)
    return MellinSum(
        grid=grid,
        n=int(n),
        ell=ell.astype(int),
        terms=terms,
        partial_sum=partial,
        max_term=float(terms.max()),
        tail_bound=tail,
        certified=bool(certified),
    )
