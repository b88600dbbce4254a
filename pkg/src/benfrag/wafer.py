"""Monte Carlo checks of how often the d-volume is pinned to its largest term.

A trial is a *delta-wafer* at step n when ``max_d <= v_d <= (1 + delta) max_d``,
i.e. the non-maximal d-products add up to at most ``delta`` times the
maximal one.  All statistics for several ``n`` are taken from the same set of
trajectories observed at different times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import ProportionDistribution
from .fragmentation import LinearProcessConfig, simulate_final_sides
from .frames import batch_frame_stats

__all__ = [
    "WaferConfig",
    "WaferReport",
    "WaferRow",
    "alpha_threshold",
    "decay_slope",
    "delta_at",
    "gap_distribution",
    "overflow_probability",
    "wafer_probability",
]


@dataclass(frozen=True)
class WaferConfig:
    """Wafer experiment setup.

    ``delta_schedule`` is ``"fixed"`` (use ``delta`` at every n) or
    ``"decaying"`` (``delta_n = exp(-n**0.25)``).  ``n_values`` lists the
    steps at which trajectories are inspected; it defaults to ``(n_steps,)``.
    """

    m: int
    d: int
    dist: ProportionDistribution
    n_steps: int
    trials: int
    seed: int = 0
    delta: float = 1e-3
    delta_schedule: str = "fixed"
    n_values: tuple[int, ...] | None = None
    initial_log_sides: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 1 <= self.d <= self.m:
            raise ValueError(f"d must satisfy 1 <= d <= m, got d={self.d}, m={self.m}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.delta_schedule not in ("fixed", "decaying"):
            raise ValueError(f"unknown delta schedule {self.delta_schedule!r}")
        if self.delta_schedule == "fixed" and not 0 <= self.delta < self.dist.base:
            raise ValueError("fixed delta must be non-negative and below the base")
        ns = (self.n_steps,) if self.n_values is None else tuple(sorted(int(n) for n in self.n_values))
        if any(n < 0 for n in ns):
            raise ValueError("n values must be non-negative")
        object.__setattr__(self, "n_values", ns)

    @property
    def base(self) -> float:
        return self.dist.base

    @property
    def n_subsets(self) -> int:
        return math.comb(self.m, self.d)

    def process(self) -> LinearProcessConfig:
        return LinearProcessConfig(
            m=self.m,
            dist=self.dist,
            n_steps=max(self.n_values),
            initial_log_sides=self.initial_log_sides,
            seed=self.seed,
        )


def delta_at(cfg: WaferConfig, n: int) -> float:
    if cfg.delta_schedule == "fixed":
        return cfg.delta
    return math.exp(-(n**0.25))


def alpha_threshold(delta: float, n_subsets: int, base: float = 10.0) -> float:
    """``-log_B(delta / C(m, d))``: a gap this large forces a delta-wafer."""
    if delta <= 0:
        return math.inf
    return -math.log(delta / n_subsets) / math.log(base)


@dataclass(frozen=True)
class WaferRow:
    n: int
    delta: float
    p_wafer: float
    p_overflow: float
    p_gap_above_alpha: float
    mean_gap: float
    median_gap: float
    min_gap: float
    alpha_n: float
    trials: int
    seed: int


@dataclass(frozen=True)
class WaferReport:
    rows: tuple[WaferRow, ...]
    gaps: dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    def row(self, n: int) -> WaferRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    @property
    def p_wafer(self) -> float:
        return self.rows[-1].p_wafer


def _frame_stats(cfg: WaferConfig, workers: int = 1):
    sides = simulate_final_sides(cfg.process(), cfg.trials, checkpoints=cfg.n_values, workers=workers)
    return {n: batch_frame_stats(sides[i], cfg.d, cfg.base) for i, n in enumerate(cfg.n_values)}


def _overflow(log_max: np.ndarray, delta: float, base: float) -> np.ndarray:
    # (1 + delta) * S_B(max) >= B  <=>  frac(log max) + log_B(1 + delta) >= 1
    f = log_max - np.floor(log_max)
    f = np.where(f >= 1.0, 0.0, f)
    return f + math.log1p(delta) / math.log(base) >= 1.0


def wafer_probability(cfg: WaferConfig, workers: int = 1) -> WaferReport:
    """Fraction of delta-wafers (and related statistics) at every ``n`` in ``cfg``."""
    rows = []
    gaps = {}
    for n, st in _frame_stats(cfg, workers).items():
        delta = delta_at(cfg, n)
        alpha = alpha_threshold(delta, cfg.n_subsets, cfg.base)
        gap = st["gap"]
        finite = np.isfinite(gap)
        rows.append(
            WaferRow(
                n=n,
                delta=delta,
                p_wafer=float(np.mean(st["wafer_excess"] <= delta)),
                p_overflow=float(np.mean(_overflow(st["log_max"], delta, cfg.base))),
                p_gap_above_alpha=float(np.mean(gap >= alpha)),
                mean_gap=float(np.mean(gap)) if finite.all() else math.inf,
                median_gap=float(np.median(gap)) if finite.all() else math.inf,
                min_gap=float(np.min(gap)),
                alpha_n=alpha,
                trials=cfg.trials,
                seed=cfg.seed,
            )
        )
        gaps[n] = gap
    return WaferReport(tuple(rows), gaps)


def gap_distribution(cfg: WaferConfig, workers: int = 1) -> dict[int, dict]:
    """Per-trial gaps and their quantiles for each ``n``.

    Raises when ``d == m``: there is a single d-product and no runner-up.
    """
    if cfg.n_subsets < 2:
        raise ValueError("gap undefined for d=m: only one d-product exists")
    out = {}
    for n, st in _frame_stats(cfg, workers).items():
        g = st["gap"]
        q = np.quantile(g, [0.05, 0.25, 0.5, 0.75, 0.95])
        out[n] = {
            "gaps": g,
            "quantiles": dict(zip((0.05, 0.25, 0.5, 0.75, 0.95), q.tolist())),
            "median": float(q[2]),
            "mean": float(np.mean(g)),
            "alpha_n": alpha_threshold(delta_at(cfg, n), cfg.n_subsets, cfg.base),
        }
    return out


def overflow_probability(cfg: WaferConfig, workers: int = 1) -> float:
    """Fraction of trials where ``(1 + delta) S_B(max_d)`` reaches ``B``, at the last ``n``."""
    n = cfg.n_values[-1]
    st = _frame_stats(cfg, workers)[n]
    return float(np.mean(_overflow(st["log_max"], delta_at(cfg, n), cfg.base)))


def decay_slope(n_values: Sequence[float], p_wafer: Sequence[float]) -> float:
    """Least-squares slope of ``log(1 - p_wafer)`` against ``log n``."""
    n = np.asarray(n_values, dtype=float)
    miss = 1.0 - np.asarray(p_wafer, dtype=float)
    if np.any(miss <= 0):
        raise ValueError("every n needs at least one non-wafer trial to fit a slope")
    slope, _ = np.polyfit(np.log(n), np.log(miss), 1)
    return float(slope)
