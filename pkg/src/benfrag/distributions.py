"""Proportion-cut laws and their base-B log-moments.

A proportion cut is a continuous random variable ``P`` in (0, 1) that
multiplies a side length at each fragmentation step.  Everything downstream
works with ``log_B P`` rather than ``P``, so each family here knows how to

* turn a Uniform(0,1) draw into a draw of ``log_B P`` (inverse CDF),
* report the mean, variance and third absolute central moment of ``log_B P``,
* evaluate the characteristic function of ``log_B P`` and the Mellin
  transform of the density of ``P``.

Three families are provided: :class:`UniformUnit`, :class:`LogUniform` and
:class:`Beta`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np
from scipy import integrate, special

__all__ = [
    "Beta",
    "LogMoments",
    "LogUniform",
    "ProportionDistribution",
    "ReducedPrecisionWarning",
    "UniformUnit",
    "char_fn_normalized",
    "distribution_from_dict",
    "log_moments",
    "sample_log",
    "sample_log_array",
]

QUAD_TOL = 1e-10


class ReducedPrecisionWarning(RuntimeWarning):
    """A quadrature-based value could not be certified to the requested tolerance."""


@dataclass(frozen=True)
class LogMoments:
    """Moments of ``log_B P``: mean, variance and third absolute central moment."""

    mu_p: float
    sigma_p2: float
    rho3: float

    def __post_init__(self):
        if not self.sigma_p2 > 0:
            raise ValueError(f"sigma_p2 must be positive, got {self.sigma_p2}")
        # Lyapunov: E|X|^3 >= (E X^2)^{3/2}; allow rounding slack
        if self.rho3 < self.sigma_p2**1.5 * (1 - 1e-9):
            raise ValueError("rho3 violates the Lyapunov moment ordering")

    @property
    def sigma_p(self) -> float:
        return math.sqrt(self.sigma_p2)


@dataclass(frozen=True)
class ProportionDistribution:
    """Base class for proportion-cut laws; ``base`` is the logarithm base B."""

    base: float = 10.0

    family: ClassVar[str] = ""

    def __post_init__(self):
        if not (math.isfinite(self.base) and self.base > 1):
            raise ValueError(f"base must be a finite real > 1, got {self.base}")

    @property
    def ln_base(self) -> float:
        return math.log(self.base)

    # -- interface implemented by the families ---------------------------
    def log_from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF of ``log_B P`` evaluated at Uniform(0,1) draws ``u``."""
        raise NotImplementedError

    def log_moments(self) -> LogMoments:
        raise NotImplementedError

    def log_char_fn(self, k):
        """Characteristic function ``E[exp(i k log_B P)]`` (vectorized in ``k``)."""
        raise NotImplementedError

    def mellin(self, s):
        """Mellin transform ``E[P^(s-1)]`` of the density of ``P``."""
        raise NotImplementedError

    def pdf(self, t):
        """Density of ``P`` on (0, 1)."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "base": self.base}

    def _u_support(self) -> tuple[float, float]:
        """Support of ``u = -ln P``."""
        return 0.0, math.inf

    # -- quadrature helpers (shared) ----------------------------------------
    def _log_expectation(self, h) -> float:
        """``E[h(log_B P)]`` by adaptive quadrature in ``u = -ln P``.

        The substitution ``t = exp(-u)`` moves the log singularity at 0 to
        infinity; the integral is split at ``u = 1`` so a singular density at
        ``t = 1`` sits on an endpoint.
        """
        lb = self.ln_base

        def integrand(u):
            t = math.exp(-u)
            return h(-u / lb) * float(self.pdf(t)) * t

        total = 0.0
        for lo, hi in ((0.0, 1.0), (1.0, math.inf)):
            val, err = integrate.quad(integrand, lo, hi, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=500)
            if not err <= 10 * QUAD_TOL * max(1.0, abs(val)):
                raise RuntimeError(f"log-moment quadrature did not converge (error estimate {err:.3g})")
            total += val
        return total

    def quadrature_moments(self) -> LogMoments:
        mu = self._log_expectation(lambda x: x)
        var = self._log_expectation(lambda x: (x - mu) ** 2)
        rho3 = self._log_expectation(lambda x: abs(x - mu) ** 3)
        return LogMoments(mu, var, rho3)

    def quadrature_char_fn(self, k: float) -> complex:
        """``E[exp(i k log_B P)]`` by oscillatory (QAWF) quadrature.

        Emits :class:`ReducedPrecisionWarning` when the error estimate exceeds
        ``1e-8``; the value is still returned.
        """
        lb = self.ln_base
        w = float(k) / lb
        if w == 0.0:
            return complex(1.0)

        def g(u):
            t = math.exp(-u)
            return float(self.pdf(t)) * t

        # E[exp(-i w u)] with u = -ln P
        lo, hi = self._u_support()
        kw = {"limlst": 200} if math.isinf(hi) else {"limit": 400}
        re, re_err = integrate.quad(g, lo, hi, weight="cos", wvar=abs(w), **kw)
        im, im_err = integrate.quad(g, lo, hi, weight="sin", wvar=abs(w), **kw)
        if max(re_err, im_err) > 1e-8:
            warnings.warn(
                f"characteristic function at k={k} has quadrature error {max(re_err, im_err):.2g}",
                ReducedPrecisionWarning,
                stacklevel=2,
            )
        return complex(re, -math.copysign(1.0, w) * im)


@dataclass(frozen=True)
class UniformUnit(ProportionDistribution):
    """P ~ Uniform(0, 1)."""

    family: ClassVar[str] = "uniform"

    def log_from_uniform(self, u):
        return np.log(u) / self.ln_base

    def log_moments(self) -> LogMoments:
        lb = self.ln_base
        # -ln U ~ Exp(1): mean 1, variance 1, E|X-1|^3 = 12/e - 2
        return LogMoments(-1.0 / lb, 1.0 / lb**2, (12.0 / math.e - 2.0) / lb**3)

    def log_char_fn(self, k):
        return 1.0 / (1.0 + 1j * np.asarray(k, dtype=float) / self.ln_base)

    def mellin(self, s):
        return 1.0 / np.asarray(s, dtype=complex)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t > 0) & (t < 1), 1.0, 0.0)


@dataclass(frozen=True)
class LogUniform(ProportionDistribution):
    """``log_B P ~ Uniform(a, b)``.

    Physical cuts need ``a < b <= 0``.  ``statistical=True`` waives the upper
    bound so that centred laws such as ``Uniform(-sqrt(3), sqrt(3))`` can be
    used; boxes then no longer shrink monotonically.
    """

    a: float = -1.0
    b: float = 0.0
    statistical: bool = False

    family: ClassVar[str] = "loguniform"

    def __post_init__(self):
        super().__post_init__()
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError(f"LogUniform needs finite a < b, got a={self.a}, b={self.b}")
        if self.b > 0 and not self.statistical:
            raise ValueError("LogUniform needs b <= 0 so that B**b <= 1 (set statistical=True to waive)")

    @classmethod
    def normalized(cls, base: float = 10.0) -> "LogUniform":
        """The mean-0, variance-1 law ``Uniform(-sqrt(3), sqrt(3))``."""
        r = math.sqrt(3.0)
        return cls(base=base, a=-r, b=r, statistical=True)

    @property
    def width(self) -> float:
        return self.b - self.a

    def log_from_uniform(self, u):
        return self.a + self.width * np.asarray(u)

    def log_moments(self) -> LogMoments:
        w = self.width
        return LogMoments(0.5 * (self.a + self.b), w * w / 12.0, w**3 / 32.0)

    def log_char_fn(self, k):
        k = np.asarray(k, dtype=float)
        mid = 0.5 * (self.a + self.b)
        return np.exp(1j * k * mid) * np.sinc(k * self.width / (2 * np.pi))

    def mellin(self, s):
        # E[B^{(s-1) X}] for X ~ Uniform(a, b)
        z = (np.asarray(s, dtype=complex) - 1.0) * self.ln_base
        zw = z * self.width
        safe = np.where(zw == 0, 1.0, zw)
        ratio = np.where(zw == 0, 1.0, np.expm1(zw) / safe)
        return np.exp(z * self.a) * ratio

    def _u_support(self):
        return -self.b * self.ln_base, -self.a * self.ln_base

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.base**self.a, self.base**self.b
        inside = (t >= lo) & (t <= hi) & (t > 0)
        return np.where(inside, 1.0 / (np.where(inside, t, 1.0) * self.ln_base * self.width), 0.0)

    def to_dict(self):
        d = super().to_dict()
        d.update(a=self.a, b=self.b)
        if self.statistical:
            d["statistical"] = True
        return d


@dataclass(frozen=True)
class Beta(ProportionDistribution):
    """P ~ Beta(alpha, beta)."""

    alpha: float = 1.0
    beta: float = 1.0

    family: ClassVar[str] = "beta"

    def __post_init__(self):
        super().__post_init__()
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"Beta {name} must be a finite positive real, got {v}")

    def log_from_uniform(self, u):
        return np.log(special.betaincinv(self.alpha, self.beta, u)) / self.ln_base

    def log_moments(self) -> LogMoments:
        return self.quadrature_moments()

    def _mellin_shift(self, z):
        # E[P^z] = B(alpha + z, beta) / B(alpha, beta)
        a, b = self.alpha, self.beta
        z = np.asarray(z, dtype=complex)
        return np.exp(
            special.loggamma(a + z) + special.loggamma(a + b) - special.loggamma(a) - special.loggamma(a + b + z)
        )

    def log_char_fn(self, k):
        k = np.asarray(k, dtype=float)
        return np.where(k == 0, 1.0 + 0j, self._mellin_shift(1j * k / self.ln_base))

    def mellin(self, s):
        return self._mellin_shift(np.asarray(s, dtype=complex) - 1.0)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < 1)
        tc = np.where(inside, t, 0.5)
        logf = (
            (self.alpha - 1) * np.log(tc)
            + (self.beta - 1) * np.log1p(-tc)
            - special.betaln(self.alpha, self.beta)
        )
        return np.where(inside, np.exp(logf), 0.0)

    def to_dict(self):
        d = super().to_dict()
        d.update(alpha=self.alpha, beta_param=self.beta)
        return d


_FAMILIES = {cls.family: cls for cls in (UniformUnit, LogUniform, Beta)}
_KEYS = {
    "uniform": {"base"},
    "loguniform": {"base", "a", "b", "statistical"},
    "beta": {"base", "alpha", "beta_param"},
}


def distribution_from_dict(spec: dict[str, Any]) -> ProportionDistribution:
    """Build a distribution from its JSON form; unknown keys are rejected."""
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in _FAMILIES:
        raise ValueError(f"unknown distribution family {family!r}; expected one of {sorted(_FAMILIES)}")
    extra = set(spec) - _KEYS[family]
    if extra:
        raise ValueError(f"unknown keys for {family!r} distribution: {sorted(extra)}")
    if family == "beta":
        if "beta_param" in spec:
            spec["beta"] = spec.pop("beta_param")
    return _FAMILIES[family](**spec)


def log_moments(dist: ProportionDistribution) -> LogMoments:
    return dist.log_moments()


def sample_log(dist: ProportionDistribution, rng_stream) -> float:
    """One draw of ``log_B P`` taken from ``rng_stream`` (a :class:`~benfrag.rng.Substream`)."""
    return float(dist.log_from_uniform(rng_stream.uniform()))


def sample_log_array(dist: ProportionDistribution, rng_stream, size) -> np.ndarray:
    return np.asarray(dist.log_from_uniform(rng_stream.uniform(size)), dtype=float)


def char_fn_normalized(dist: ProportionDistribution, n: int, k, method: str = "closed"):
    """Characteristic function of the standardized sum of ``n`` log-cuts.

    ``Z = (sum_{t<=n} log_B P_t - n mu) / (sqrt(n) sigma)``.  For
    :class:`LogUniform` this is ``sinc(k sqrt(3) / sqrt(n)) ** n`` exactly.
    ``method="quadrature"`` evaluates the single-cut transform numerically
    instead of in closed form (scalar ``k`` only).
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    k = np.asarray(k, dtype=float)
    if isinstance(dist, LogUniform) and method == "closed":
        u = k * math.sqrt(3.0) / math.sqrt(n)
        return np.sinc(u / np.pi).astype(complex) ** n
    mom = dist.log_moments()
    sig = mom.sigma_p
    arg = k / (math.sqrt(n) * sig)
    if method == "closed":
        g = dist.log_char_fn(arg)
    elif method == "quadrature":
        g = np.vectorize(dist.quadrature_char_fn, otypes=[complex])(arg)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = g**n * np.exp(-1j * k * math.sqrt(n) * mom.mu_p / sig)
    return np.where(k == 0, 1.0 + 0j, out)
