"""d-volumes of box frames, the maximum d-product and its gap, in log space.

For a box with sides ``s_1..s_m`` the d-volume is ``2**(m-d) * e_d(s)`` where
``e_d`` is the degree-d elementary symmetric polynomial.  ``e_d`` is built
with the recurrence ``e_j <- e_j + s_i * e_{j-1}`` using log-add-exp, so boxes
with sides around ``B**-400`` are no problem.

Subsets are 0-based index tuples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fragmentation import LogBox

__all__ = [
    "FrameVolumes",
    "MAX_MATERIALIZED_M",
    "batch_frame_stats",
    "frame_volumes",
    "log_add_exp",
    "log_elementary_symmetric",
    "max_product_subset",
]

MAX_MATERIALIZED_M = 20


def log_add_exp(x, y, base: float = math.e):
    """``log_B(B**x + B**y)`` as ``max + log_B(1 + B**-|x - y|)``.

    Exact when either argument is ``-inf``.  Works elementwise on arrays.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    lb = math.log(base)
    with np.errstate(invalid="ignore"):
        diff = np.where(np.isneginf(lo), -np.inf, lo - hi)
    out = np.where(np.isneginf(lo), hi, hi + np.log1p(np.exp(diff * lb)) / lb)
    return float(out) if out.ndim == 0 else out


def log_elementary_symmetric(log_sides, d: int, base: float = math.e):
    """``log_B e_d`` of the sides, vectorized over leading axes.

    ``log_sides`` has shape ``(..., m)``.  For ``d == m`` the result is the
    plain sum of the log-sides (no log-add-exp rounding).
    """
    ls = np.asarray(log_sides, dtype=float)
    m = ls.shape[-1]
    if not 1 <= d <= m:
        raise ValueError(f"d must satisfy 1 <= d <= m={m}, got {d}")
    if d == m:
        return ls.sum(axis=-1)
    lead = ls.shape[:-1]
    e = [np.zeros(lead)] + [np.full(lead, -np.inf) for _ in range(d)]
    for i in range(m):
        s = ls[..., i]
        for j in range(min(d, i + 1), 0, -1):
            e[j] = log_add_exp(e[j], s + e[j - 1], base)
    return np.asarray(e[d])


def max_product_subset(log_sides: Sequence[float], d: int) -> tuple[tuple[int, ...], float, float]:
    """The d-subset with the largest product, its log, and the gap to the runner-up.

    The maximizing subset holds the d largest sides; ties go to the
    lexicographically smallest index set.  The runner-up swaps the smallest
    included side for the largest excluded one, so the gap is the difference
    between the d-th and (d+1)-th largest log-sides (``inf`` when ``d == m``).
    """
    ls = np.asarray(log_sides, dtype=float)
    m = ls.size
    if not 1 <= d <= m:
        raise ValueError(f"d must satisfy 1 <= d <= m={m}, got {d}")
    order = np.argsort(-ls, kind="stable")
    subset = tuple(sorted(int(i) for i in order[:d]))
    log_max = float(math.fsum(ls[list(subset)]))
    gap = math.inf if d == m else float(ls[order[d - 1]] - ls[order[d]])
    return subset, log_max, gap


@dataclass(frozen=True)
class FrameVolumes:
    """Log-space frame statistics of one box for one dimension ``d``."""

    m: int
    d: int
    base: float
    log_vd: float
    log_Vd: float
    log_max: float
    argmax_subset: tuple[int, ...]
    gap: float
    log_products: dict[tuple[int, ...], float] | None = None

    @property
    def wafer_excess(self) -> float:
        """``v_d / max - 1``: sum over non-maximal d-products relative to the max."""
        return math.expm1((self.log_vd - self.log_max) * math.log(self.base))

    def is_wafer(self, delta: float) -> bool:
        return self.wafer_excess <= delta


def frame_volumes(box: LogBox | Sequence[float], d: int, base: float = 10.0) -> FrameVolumes:
    """d-volume, maximum d-product and gap of ``box``.

    ``log_products`` (every d-subset's log-product) is only filled in for
    ``m <= 20``.
    """
    ls = np.asarray(box.log_sides if isinstance(box, LogBox) else box, dtype=float)
    m = ls.size
    if not 1 <= d <= m:
        raise ValueError(f"d must satisfy 1 <= d <= m={m}, got {d}")
    subset, log_max, gap = max_product_subset(ls, d)
    log_vd = float(log_elementary_symmetric(ls, d, base))
    if d == m:
        log_max = log_vd
    # the sum can never be below its largest term; clip rounding
    log_vd = max(log_vd, log_max)
    products = None
    if m <= MAX_MATERIALIZED_M:
        products = {I: float(math.fsum(ls[list(I)])) for I in itertools.combinations(range(m), d)}
    return FrameVolumes(
        m=m,
        d=d,
        base=base,
        log_vd=log_vd,
        log_Vd=log_vd + (m - d) * math.log(2.0) / math.log(base),
        log_max=log_max,
        argmax_subset=subset,
        gap=gap,
        log_products=products,
    )


def batch_frame_stats(log_sides: np.ndarray, d: int, base: float = 10.0) -> dict[str, np.ndarray]:
    """Frame statistics for a stack of boxes of shape ``(..., m)``.

    Returns arrays ``log_vd``, ``log_Vd``, ``log_max``, ``gap`` and
    ``wafer_excess`` (``v_d / max - 1``).
    """
    ls = np.asarray(log_sides, dtype=float)
    m = ls.shape[-1]
    if not 1 <= d <= m:
        raise ValueError(f"d must satisfy 1 <= d <= m={m}, got {d}")
    srt = -np.sort(-ls, axis=-1)
    log_max = srt[..., :d].sum(axis=-1)
    gap = np.full(ls.shape[:-1], np.inf) if d == m else srt[..., d - 1] - srt[..., d]
    log_vd = log_elementary_symmetric(ls, d, base)
    if d == m:
        log_max = log_vd
    log_vd = np.maximum(log_vd, log_max)
    lb = math.log(base)
    excess = np.expm1((log_vd - log_max) * lb)
    return {
        "log_vd": log_vd,
        "log_Vd": log_vd + (m - d) * math.log(2.0) / lb,
        "log_max": log_max,
        "gap": gap,
        "wafer_excess": excess,
    }
