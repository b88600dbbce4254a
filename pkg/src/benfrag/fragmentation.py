"""Linear and branching fragmentation processes, simulated in log space.

Side lengths are stored as base-B logarithms, so a proportion cut is an
addition and nothing underflows however many steps are taken.

Randomness
----------
Linear runs give trial ``i`` the substream ``i`` of the seed; the cut for
step ``t`` (1-based) on axis ``j`` is draw number ``(t - 1) * m + j``.
Branching runs give tree ``i`` the substream ``i``; the cut at a node is the
draw numbered by the node's heap index (root 1, children ``2h`` and
``2h + 1``).  Both schemes are independent of evaluation order, which is what
makes chunked, parallel and streaming evaluation reproducible.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .distributions import ProportionDistribution

__all__ = [
    "BranchTreeSpec",
    "LinearProcessConfig",
    "LogBox",
    "MAX_IN_MEMORY_DEPTH",
    "branching_leaf_blocks",
    "leaf_count",
    "leaf_log_volumes",
    "rho_statistic",
    "run_branching",
    "run_linear",
    "simulate_final_sides",
    "step_linear",
]

MAX_IN_MEMORY_DEPTH = 24
TRIAL_CHUNK = 2048
_BLOCK_DEPTH = 14


@dataclass(frozen=True)
class LogBox:
    """Box with side lengths ``B ** log_sides`` after ``step`` cuts."""

    log_sides: tuple[float, ...]
    step: int = 0

    def __post_init__(self):
        sides = tuple(float(x) for x in self.log_sides)
        if not sides:
            raise ValueError("a box needs at least one side")
        if not all(math.isfinite(x) for x in sides):
            raise ValueError("log side lengths must be finite")
        if self.step < 0:
            raise ValueError("step must be non-negative")
        object.__setattr__(self, "log_sides", sides)

    @property
    def m(self) -> int:
        return len(self.log_sides)

    @property
    def log_volume(self) -> float:
        return math.fsum(self.log_sides)


def step_linear(box: LogBox, cuts: Sequence[float]) -> LogBox:
    """Apply one cut per axis; ``cuts[i]`` is ``log_B P_i`` for this step."""
    if len(cuts) != box.m:
        raise ValueError(f"expected {box.m} cuts, got {len(cuts)}")
    return LogBox(tuple(s + c for s, c in zip(box.log_sides, cuts)), box.step + 1)


@dataclass(frozen=True)
class LinearProcessConfig:
    """Configuration of a linear-fragmentation run.

    ``dist`` is either one distribution shared by every axis or a sequence of
    ``m`` per-axis distributions; distinct per-axis laws are only accepted with
    ``allow_heterogeneous=True``.
    """

    m: int
    dist: ProportionDistribution | tuple[ProportionDistribution, ...]
    n_steps: int
    initial_log_sides: tuple[float, ...] | None = None
    seed: int = 0
    allow_heterogeneous: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        dists = self.dist if isinstance(self.dist, (tuple, list)) else (self.dist,) * self.m
        dists = tuple(dists)
        if len(dists) != self.m:
            raise ValueError(f"expected {self.m} per-axis distributions, got {len(dists)}")
        if not self.allow_heterogeneous and any(d != dists[0] for d in dists[1:]):
            raise ValueError(
                "per-axis proportion laws differ; all axes must share one law with equal "
                "log-mean and log-variance (pass allow_heterogeneous=True to override)"
            )
        if len({d.base for d in dists}) != 1:
            raise ValueError("all axes must use the same logarithm base")
        object.__setattr__(self, "dist", dists)
        init = (0.0,) * self.m if self.initial_log_sides is None else tuple(map(float, self.initial_log_sides))
        if len(init) != self.m:
            raise ValueError(f"initial_log_sides must have length {self.m}")
        object.__setattr__(self, "initial_log_sides", init)

    @property
    def axis_dists(self) -> tuple[ProportionDistribution, ...]:
        return self.dist  # type: ignore[return-value]

    @property
    def base(self) -> float:
        return self.axis_dists[0].base


def _cuts(cfg: LinearProcessConfig, trials: np.ndarray, steps: int, first_step: int = 0) -> np.ndarray:
    """Log-cuts of shape ``(len(trials), steps, m)`` for the given trial indices."""
    m = cfg.m
    keys = rng.stream_keys(cfg.seed, trials)[:, None, None]
    ctr = (
        (np.arange(first_step, first_step + steps, dtype=np.uint64)[None, :, None] * np.uint64(m))
        + np.arange(m, dtype=np.uint64)[None, None, :]
    )
    u = rng.uniforms(keys, ctr)
    dists = cfg.axis_dists
    if all(d == dists[0] for d in dists):
        return dists[0].log_from_uniform(u)
    out = np.empty_like(u)
    for j, d in enumerate(dists):
        out[..., j] = d.log_from_uniform(u[..., j])
    return out


def run_linear(cfg: LinearProcessConfig, trial: int = 0) -> list[LogBox]:
    """Trajectory of trial ``trial``: boxes at steps ``0..n_steps``."""
    box = LogBox(cfg.initial_log_sides, 0)
    traj = [box]
    if cfg.n_steps == 0:
        return traj
    cuts = _cuts(cfg, np.array([trial], dtype=np.uint64), cfg.n_steps)[0]
    for t in range(cfg.n_steps):
        box = step_linear(box, cuts[t].tolist())
        traj.append(box)
    return traj


def _final_chunk(cfg, lo, hi, checkpoints):
    trials = np.arange(lo, hi, dtype=np.uint64)
    state = np.tile(np.asarray(cfg.initial_log_sides, dtype=float), (hi - lo, 1))
    out = np.empty((len(checkpoints), hi - lo, cfg.m))
    done = 0
    for i, n in enumerate(checkpoints):
        if n > done:
            cuts = _cuts(cfg, trials, n - done, first_step=done)
            # left-to-right accumulation, same order as run_linear
            for t in range(cuts.shape[1]):
                state = state + cuts[:, t, :]
            done = n
        out[i] = state
    return out


def simulate_final_sides(
    cfg: LinearProcessConfig,
    trials: int,
    checkpoints: Sequence[int] | None = None,
    workers: int = 1,
    chunk: int = TRIAL_CHUNK,
) -> np.ndarray:
    """Log-sides of ``trials`` independent trajectories.

    Returns shape ``(trials, m)`` at step ``n_steps``, or, when
    ``checkpoints`` is given, ``(len(checkpoints), trials, m)`` holding the
    state at each listed step (the same trajectories observed at several
    times).  Values agree bit for bit with :func:`run_linear`.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cps = [cfg.n_steps] if checkpoints is None else [int(c) for c in checkpoints]
    if any(c < 0 for c in cps) or cps != sorted(cps):
        raise ValueError("checkpoints must be non-negative and sorted")
    bounds = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _final_chunk(cfg, b[0], b[1], cps), bounds))
    else:
        parts = [_final_chunk(cfg, lo, hi, cps) for lo, hi in bounds]
    out = np.concatenate(parts, axis=1)
    return out[0] if checkpoints is None else out


# -- branching ---------------------------------------------------------------


@dataclass(frozen=True)
class BranchTreeSpec:
    """A branching-fragmentation tree with ``(2**m) ** n_levels`` leaves.

    Each level cuts every box along axis 1, then axis 2, ..., then axis m,
    keeping both pieces (proportions ``p`` and ``1 - p``).  Binary depth is
    therefore ``m * n_levels``.
    """

    m: int
    dist: ProportionDistribution
    n_levels: int
    initial_log_sides: tuple[float, ...] | None = None
    seed: int = 0
    streaming: bool = False

    def __post_init__(self):
        if self.m < 1 or self.n_levels < 1:
            raise ValueError("m and n_levels must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        init = (0.0,) * self.m if self.initial_log_sides is None else tuple(map(float, self.initial_log_sides))
        if len(init) != self.m:
            raise ValueError(f"initial_log_sides must have length {self.m}")
        object.__setattr__(self, "initial_log_sides", init)
        if self.depth > MAX_IN_MEMORY_DEPTH and not self.streaming:
            raise ValueError(
                f"2^{self.depth} leaves exceed in-memory cap of 2^{MAX_IN_MEMORY_DEPTH}; enable streaming"
            )

    @property
    def depth(self) -> int:
        return self.m * self.n_levels

    @property
    def leaf_count(self) -> int:
        return leaf_count(self.m, self.n_levels)


def leaf_count(m: int, n: int) -> int:
    return (2**m) ** n


def _node_cuts(spec: BranchTreeSpec, key: np.ndarray, heap: np.ndarray):
    """(log p, log(1 - p)) for the nodes with heap indices ``heap``."""
    u = rng.uniforms(key, heap)
    lp = spec.dist.log_from_uniform(u)
    # log_B(1 - p) = log1p(-B^lp) / ln B keeps full precision for tiny p
    lq = np.log1p(-np.power(spec.dist.base, lp)) / spec.dist.ln_base
    return lp, lq


def _expand(spec, key, heap0, layer0, depth, state):
    """Leaves of the complete subtree rooted at heap index ``heap0``.

    ``state`` is the per-axis log-side vector at the subtree root.  Returns an
    ``(2**depth, m)`` array in depth-first (left = ``p`` first) order.
    """
    m = spec.m
    sides = np.asarray(state, dtype=float)[None, :]
    heap = np.array([heap0], dtype=np.uint64)
    for j in range(depth):
        layer = layer0 + j
        axis = layer % m
        lp, lq = _node_cuts(spec, key, heap)
        left = sides.copy()
        right = sides.copy()
        left[:, axis] += lp
        right[:, axis] += lq
        sides = np.stack([left, right], axis=1).reshape(-1, m)
        heap = np.stack([2 * heap, 2 * heap + np.uint64(1)], axis=1).reshape(-1)
    return sides


def branching_leaf_blocks(
    spec: BranchTreeSpec, tree: int = 0, block_depth: int = _BLOCK_DEPTH
) -> Iterator[np.ndarray]:
    """Leaves of tree ``tree`` as consecutive ``(k, m)`` blocks of log-sides.

    Depth-first with an explicit stack over the top of the tree; each stack
    entry stores ``(binary depth, heap index, log-sides)``.  Subtrees of depth
    ``block_depth`` are expanded in one vectorized shot, so peak memory is
    ``O(m * depth + 2**block_depth)`` regardless of tree size.
    """
    if spec.depth > 62:
        raise ValueError("binary depth above 62 overflows the heap index")
    key = rng.stream_keys(spec.seed, tree)
    depth = spec.depth
    if not spec.streaming:
        yield _expand(spec, key, 1, 0, depth, spec.initial_log_sides)
        return
    stack = [(0, 1, np.asarray(spec.initial_log_sides, dtype=float))]
    while stack:
        layer, heap, sides = stack.pop()
        remaining = depth - layer
        if remaining <= block_depth:
            yield _expand(spec, key, heap, layer, remaining, sides)
            continue
        lp, lq = _node_cuts(spec, key, np.array([heap], dtype=np.uint64))
        axis = layer % spec.m
        right = sides.copy()
        right[axis] += lq[0]
        left = sides.copy()
        left[axis] += lp[0]
        # right pushed first so the left child is visited first
        stack.append((layer + 1, 2 * heap + 1, right))
        stack.append((layer + 1, 2 * heap, left))


def run_branching(spec: BranchTreeSpec, tree: int = 0, per_axis: bool = False) -> Iterator:
    """Iterate the leaves of one tree in depth-first order.

    Yields ``log_B(volume)`` per leaf, or the per-axis log-side tuple when
    ``per_axis`` is true.
    """
    for block in branching_leaf_blocks(spec, tree):
        if per_axis:
            for row in block:
                yield tuple(row.tolist())
        else:
            yield from block.sum(axis=1).tolist()


def leaf_log_volumes(spec: BranchTreeSpec, tree: int = 0) -> Iterator[np.ndarray]:
    """Block-wise leaf log-volumes (faster than :func:`run_branching`)."""
    for block in branching_leaf_blocks(spec, tree):
        yield block.sum(axis=1)


def rho_statistic(leaves, s: float | Sequence[float], base: float = 10.0):
    """Fraction of leaves whose significand is at most ``s``.

    ``leaves`` is any iterable of log-volumes or of numpy blocks of them; it
    is consumed once.  ``s`` may be a sequence, in which case an array of
    fractions is returned.
    """
    scalar = np.ndim(s) == 0
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((s_arr < 1) | (s_arr > base)):
        raise ValueError(f"s must lie in [1, {base}]")
    thresholds = np.log(s_arr) / math.log(base)
    hits = np.zeros(len(s_arr), dtype=np.int64)
    total = 0
    buf: list[float] = []

    def flush(arr):
        nonlocal total
        frac = arr - np.floor(arr)
        frac = np.where(frac >= 1.0, 0.0, frac)
        hits[:] += (frac[:, None] <= thresholds[None, :]).sum(axis=0)
        total += arr.size

    for item in leaves:
        if isinstance(item, np.ndarray):
            flush(item.ravel())
        else:
            buf.append(item)
            if len(buf) >= 65536:
                flush(np.asarray(buf))
                buf.clear()
    if buf:
        flush(np.asarray(buf))
    if total == 0:
        raise ValueError("no leaves supplied")
    out = hits / total
    return float(out[0]) if scalar else out
