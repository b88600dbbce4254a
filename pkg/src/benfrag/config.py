"""Experiment configuration: JSON schema, loading and validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any

from .distributions import ProportionDistribution, distribution_from_dict
from .fragmentation import MAX_IN_MEMORY_DEPTH

__all__ = ["COMMANDS", "ConfigError", "ExperimentConfig", "validate"]

COMMANDS = ("simulate", "conformance", "wafer", "charfn", "mellin", "maxside", "branching")
MAX_CONFORMANCE_LEAVES = 1 << 24


class ConfigError(ValueError):
    """Raised with the full list of violations when a config does not validate."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class ExperimentConfig:
    """One experiment; serialized as a flat JSON object.

    ``d`` defaults to ``m``.  ``n`` is the step count (levels for branching
    runs); ``n_values`` optionally lists several step counts for ``wafer``.
    ``trials`` counts trajectories for linear runs and trees for branching
    runs.
    """

    command: str = "simulate"
    mode: str = "linear"
    m: int = 2
    d: int | None = None
    n: int = 50
    n_values: list[int] | None = None
    trials: int = 1000
    seed: int = 0
    streaming: bool = False
    distribution: dict[str, Any] = field(default_factory=lambda: {"family": "uniform", "base": 10.0})
    axis_distributions: list[dict[str, Any]] | None = None
    allow_heterogeneous: bool = False
    delta: float = 1e-3
    delta_schedule: str = "fixed"
    epsilon: float = 0.1
    x_min: float = -6.0
    x_max: float = 6.0
    x_points: int = 241
    ell_max: int = 50
    grid: str = "original"
    window: list[float] = field(default_factory=lambda: [0.0, math.log10(2.0)])
    max_mode: str = "gaussian"
    s_values: list[float] = field(default_factory=lambda: [2.0, 5.0])
    output_path: str | None = None
    output_format: str = "csv"
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(["config must be a JSON object"])
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"invalid JSON: {exc}"]) from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def dim(self) -> int:
        return self.m if self.d is None else self.d

    def dist(self) -> ProportionDistribution:
        return distribution_from_dict(self.distribution)

    def axis_dists(self) -> tuple[ProportionDistribution, ...]:
        if self.axis_distributions is None:
            return (self.dist(),) * self.m
        return tuple(distribution_from_dict(d) for d in self.axis_distributions)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg: ExperimentConfig) -> list[str]:
    """Every problem with ``cfg``; an empty list means it is runnable."""
    out: list[str] = []
    if cfg.command not in COMMANDS:
        out.append(f"unknown command {cfg.command!r}; expected one of {', '.join(COMMANDS)}")
    if cfg.mode not in ("linear", "branching"):
        out.append(f"mode must be 'linear' or 'branching', got {cfg.mode!r}")
    if cfg.output_format not in ("csv", "json"):
        out.append(f"output_format must be 'csv' or 'json', got {cfg.output_format!r}")

    for name in ("m", "n", "trials", "seed", "workers", "x_points", "ell_max"):
        if not _is_int(getattr(cfg, name)):
            out.append(f"{name} must be an integer")
    if out and any("must be an integer" in v for v in out):
        return out

    if cfg.m < 1:
        out.append("m must be at least 1")
    if cfg.d is not None and not _is_int(cfg.d):
        out.append("d must be an integer")
    elif cfg.dim < 1:
        out.append("d must be at least 1")
    elif cfg.dim > cfg.m:
        out.append(f"d exceeds m (d={cfg.dim}, m={cfg.m})")
    if cfg.n < 0 or (cfg.n < 1 and (cfg.mode == "branching" or cfg.command in ("charfn", "mellin", "maxside"))):
        out.append(f"n must be positive, got {cfg.n}")
    if cfg.trials < 1:
        out.append(f"trials must be at least 1, got {cfg.trials}")
    if not 0 <= cfg.seed < 2**64:
        out.append("seed must be a 64-bit unsigned integer")
    if cfg.workers < 1:
        out.append("workers must be at least 1")

    if cfg.n_values is not None:
        if not cfg.n_values or not all(_is_int(v) and v >= 1 for v in cfg.n_values):
            out.append("n_values must be a non-empty list of positive integers")

    if cfg.delta_schedule not in ("fixed", "decaying"):
        out.append(f"delta_schedule must be 'fixed' or 'decaying', got {cfg.delta_schedule!r}")
    if not (_is_real(cfg.delta) and 0 < cfg.delta < 1):
        out.append(f"delta must lie in (0, 1), got {cfg.delta}")
    if not (_is_real(cfg.epsilon) and 0 < cfg.epsilon < 0.125):
        out.append(f"epsilon must lie in (0, 1/8), got {cfg.epsilon}")
    if cfg.x_points < 2 or not cfg.x_min < cfg.x_max:
        out.append("x grid needs x_min < x_max and at least 2 points")
    if cfg.ell_max < 1:
        out.append("ell_max must be at least 1")
    if cfg.grid not in ("original", "char_fn"):
        out.append(f"grid must be 'original' or 'char_fn', got {cfg.grid!r}")
    if cfg.max_mode not in ("gaussian", "numeric"):
        out.append(f"max_mode must be 'gaussian' or 'numeric', got {cfg.max_mode!r}")
    if not (isinstance(cfg.window, (list, tuple)) and len(cfg.window) == 2 and 0 <= cfg.window[0] < cfg.window[1] <= 1):
        out.append("window must be [a, b] with 0 <= a < b <= 1")

    dists: tuple[ProportionDistribution, ...] = ()
    try:
        dists = cfg.axis_dists()
    except (ValueError, TypeError) as exc:
        out.append(f"distribution: {exc}")
    if dists:
        if len(dists) != cfg.m:
            out.append(f"axis_distributions must list {cfg.m} entries, got {len(dists)}")
        elif any(d != dists[0] for d in dists[1:]) and not cfg.allow_heterogeneous:
            out.append(
                "per-axis distributions differ: every axis must share one proportion law with the "
                "same log-mean and log-variance (set allow_heterogeneous to override)"
            )
        if len({d.base for d in dists}) > 1:
            out.append("all axis distributions must use the same base")
        s_ok = isinstance(cfg.s_values, (list, tuple)) and cfg.s_values
        if not s_ok or not all(_is_real(s) and 1 <= s <= dists[0].base for s in cfg.s_values):
            out.append("s_values must be a non-empty list of reals in [1, base]")

    uses_tree = cfg.mode == "branching" or cfg.command == "branching"
    if uses_tree and cfg.m >= 1 and cfg.n >= 1:
        depth = cfg.m * cfg.n
        if depth > MAX_IN_MEMORY_DEPTH and not cfg.streaming:
            out.append(f"2^{depth} leaves exceed in-memory cap of 2^{MAX_IN_MEMORY_DEPTH}; enable streaming")
        if depth > 62:
            out.append(f"binary depth {depth} exceeds the supported maximum of 62")
        if cfg.command in ("conformance", "simulate") and (2**depth) * cfg.trials > MAX_CONFORMANCE_LEAVES:
            out.append(
                f"{cfg.command} on a branching process collects every leaf; "
                f"{cfg.trials} x 2^{depth} leaves exceed the 2^24 sample cap"
            )
    if cfg.mode == "branching" and cfg.command in ("wafer", "maxside"):
        out.append(f"command {cfg.command!r} is defined for linear processes only")
    return out
