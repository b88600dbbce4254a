"""Significands from log-space values and Benford conformance statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BENFORD_FIRST_DIGIT",
    "BenfordReport",
    "SignificandSample",
    "benford_cdf",
    "conformance",
    "first_digit_chi2",
    "frac",
    "ks_distance",
    "significand_from_log",
]

BENFORD_FIRST_DIGIT = np.log10(1.0 + 1.0 / np.arange(1, 10))


def frac(x):
    """Fractional part ``x - floor(x)`` in [0, 1).

    Rounding can make ``x - floor(x)`` equal 1.0 for tiny negative ``x``; such
    values wrap to 0 so the significand stays in ``[1, B)``.
    """
    x = np.asarray(x, dtype=float)
    f = x - np.floor(x)
    f = np.where(f >= 1.0, 0.0, f)
    return float(f) if f.ndim == 0 else f


def significand_from_log(log_value, base: float = 10.0):
    """Significand ``B ** frac(log_value)`` of the number ``B ** log_value``."""
    lv = np.asarray(log_value, dtype=float)
    if not np.all(np.isfinite(lv)):
        raise ValueError("log value must be finite")
    return np.power(base, frac(lv))


def benford_cdf(D, base: float = 10.0):
    """Benford CDF of the significand, ``log_B D`` on ``[1, B]``."""
    Da = np.asarray(D, dtype=float)
    if np.any((Da < 1) | (Da > base)):
        raise ValueError(f"D must lie in [1, {base}]")
    out = np.log(Da) / math.log(base)
    return float(out) if out.ndim == 0 else out


def ks_distance(u: np.ndarray) -> float:
    """One-sample KS distance of fractional parts ``u`` from Uniform[0, 1).

    The significand CDF under Benford is ``log_B D``, which in terms of
    ``u = log_B(significand)`` is the identity, so this is the KS distance of
    the significands from Benford's law.
    """
    u = np.sort(np.asarray(u, dtype=float).ravel())
    n = u.size
    if n == 0:
        raise ValueError("empty sample")
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - u)
    d_minus = np.max(u - (i - 1) / n)
    return float(min(1.0, max(d_plus, d_minus, 0.0)))


def first_digit_chi2(counts) -> float:
    """Pearson chi-square of nine first-digit counts against Benford's law."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (9,):
        raise ValueError("need counts for digits 1..9")
    expected = counts.sum() * BENFORD_FIRST_DIGIT
    return float(np.sum((counts - expected) ** 2 / expected))


@dataclass(frozen=True, eq=False)
class SignificandSample:
    """Positive quantities held as base-B logarithms."""

    log_values: np.ndarray
    base: float = 10.0
    fracs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lv = np.asarray(self.log_values, dtype=float).ravel()
        if not np.all(np.isfinite(lv)):
            raise ValueError("log values must be finite")
        if not self.base > 1:
            raise ValueError("base must exceed 1")
        object.__setattr__(self, "log_values", lv)
        object.__setattr__(self, "fracs", frac(lv))

    def __len__(self) -> int:
        return self.log_values.size

    @property
    def significands(self) -> np.ndarray:
        return np.power(self.base, self.fracs)

    def ecdf(self, D) -> np.ndarray:
        """Empirical CDF of the significand at ``D``."""
        t = np.log(np.asarray(D, dtype=float)) / math.log(self.base)
        return np.searchsorted(np.sort(self.fracs), t, side="right") / len(self)

    def first_digits(self) -> np.ndarray:
        if self.base != 10:
            raise ValueError("first digits are only defined here for base 10")
        # fracs < 1 strictly, so the digit is in 1..9
        return np.clip(np.floor(self.significands).astype(int), 1, 9)

    def digit_counts(self) -> np.ndarray:
        return np.bincount(self.first_digits(), minlength=10)[1:]


@dataclass(frozen=True)
class BenfordReport:
    ks_distance: float
    sample_size: int
    base: float
    chi2_first_digit: float | None = None
    mad_digits: float | None = None
    digit_counts: tuple[int, ...] | None = None

    @property
    def digit_frequencies(self) -> np.ndarray | None:
        if self.digit_counts is None:
            return None
        c = np.asarray(self.digit_counts, dtype=float)
        return c / c.sum()

    def rows(self) -> list[tuple[str, float]]:
        out = [("ks_distance", self.ks_distance)]
        if self.chi2_first_digit is not None:
            out.append(("chi2_first_digit", self.chi2_first_digit))
            out.append(("mad_digits", self.mad_digits))
        return out


def conformance(sample: SignificandSample, first_digit: bool | None = None) -> BenfordReport:
    """Benford conformance of a significand sample.

    The KS distance is always computed.  First-digit chi-square and MAD are
    computed for base 10 by default; asking for them in another base raises.
    """
    if len(sample) < 1:
        raise ValueError("sample must contain at least one value")
    if first_digit is None:
        first_digit = sample.base == 10
    elif first_digit and sample.base != 10:
        raise ValueError("first-digit chi-square is only defined for base 10")
    ks = ks_distance(sample.fracs)
    if not first_digit:
        return BenfordReport(ks, len(sample), sample.base)
    counts = sample.digit_counts()
    freqs = counts / counts.sum()
    return BenfordReport(
        ks_distance=ks,
        sample_size=len(sample),
        base=sample.base,
        chi2_first_digit=first_digit_chi2(counts),
        mad_digits=float(np.mean(np.abs(freqs - BENFORD_FIRST_DIGIT))),
        digit_counts=tuple(int(c) for c in counts),
    )
