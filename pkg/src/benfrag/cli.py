"""``benfrag`` command line: run an experiment from a JSON config.

    benfrag wafer --config wafer.json --trials 100000 --out wafer.csv

Exit status: 0 success, 2 invalid config, 3 numerical certificate failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, ExperimentConfig, validate
from .fragmentation import BranchTreeSpec, LinearProcessConfig, branching_leaf_blocks, rho_statistic, simulate_final_sides
from .frames import batch_frame_stats
from .significand import SignificandSample, benford_cdf, conformance, frac
from .spectral import (
    MaxDensityModel,
    SpectralProfile,
    WindowSet,
    invert_char_fn,
    mellin_condition_sum,
    window_probability,
)
from .wafer import WaferConfig, wafer_probability

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

Table = tuple[list[str], list[list[Any]]]


@dataclass
class RunManifest:
    config: dict[str, Any]
    version: str
    wall_clock: float
    timings: dict[str, float]
    seed: int
    digests: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "version": self.version,
            "wall_clock_seconds": self.wall_clock,
            "timings": self.timings,
            "seed": self.seed,
            "digests": self.digests,
        }


# -- pipelines -----------------------------------------------------------------


def _linear(cfg: ExperimentConfig, n: int | None = None) -> LinearProcessConfig:
    return LinearProcessConfig(
        m=cfg.m,
        dist=cfg.axis_dists(),
        n_steps=cfg.n if n is None else n,
        seed=cfg.seed,
        allow_heterogeneous=cfg.allow_heterogeneous,
    )


def _tree(cfg: ExperimentConfig) -> BranchTreeSpec:
    return BranchTreeSpec(m=cfg.m, dist=cfg.dist(), n_levels=cfg.n, seed=cfg.seed, streaming=cfg.streaming)


def _tree_map(cfg: ExperimentConfig, fn):
    trees = range(cfg.trials)
    if cfg.workers > 1 and cfg.trials > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, trees))
    return [fn(t) for t in trees]


def _final_log_Vd(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.mode == "branching":
        spec = _tree(cfg)
        parts = _tree_map(cfg, lambda t: np.concatenate([b.sum(axis=1) for b in branching_leaf_blocks(spec, t)]))
        return np.concatenate(parts)
    sides = simulate_final_sides(_linear(cfg), cfg.trials, workers=cfg.workers)
    return batch_frame_stats(sides, cfg.dim, cfg.axis_dists()[0].base)["log_Vd"]


def _simulate(cfg: ExperimentConfig) -> Table:
    base = cfg.axis_dists()[0].base
    if cfg.mode == "branching":
        logv = _final_log_Vd(cfg)
        per_tree = logv.size // cfg.trials
        rows = [[i // per_tree, i % per_tree, v, base ** frac(v)] for i, v in enumerate(logv.tolist())]
        return ["tree", "leaf", "log_volume", "significand"], rows
    sides = simulate_final_sides(_linear(cfg), cfg.trials, workers=cfg.workers)
    st = batch_frame_stats(sides, cfg.dim, base)
    cols = ["trial", "log_vd", "log_Vd", "log_max", "gap", "significand"]
    sig = np.power(base, frac(st["log_Vd"]))
    rows = [
        [i, st["log_vd"][i], st["log_Vd"][i], st["log_max"][i], st["gap"][i], sig[i]] for i in range(cfg.trials)
    ]
    return cols, rows


def _conformance(cfg: ExperimentConfig) -> Table:
    base = cfg.axis_dists()[0].base
    rep = conformance(SignificandSample(_final_log_Vd(cfg), base))
    return ["statistic", "value", "sample_size", "base"], [[k, v, rep.sample_size, base] for k, v in rep.rows()]


def _wafer(cfg: ExperimentConfig) -> Table:
    wc = WaferConfig(
        m=cfg.m,
        d=cfg.dim,
        dist=cfg.dist(),
        n_steps=cfg.n,
        trials=cfg.trials,
        seed=cfg.seed,
        delta=cfg.delta,
        delta_schedule=cfg.delta_schedule,
        n_values=tuple(cfg.n_values) if cfg.n_values else None,
    )
    rep = wafer_probability(wc, workers=cfg.workers)
    cols = ["n", "delta", "p_wafer", "p_overflow", "mean_gap", "median_gap", "alpha_n", "trials", "seed"]
    rows = [[r.n, r.delta, r.p_wafer, r.p_overflow, r.mean_gap, r.median_gap, r.alpha_n, r.trials, r.seed] for r in rep.rows]
    return cols, rows


def _charfn(cfg: ExperimentConfig) -> Table:
    prof = SpectralProfile(n=cfg.n, bandwidth_eps=cfg.epsilon)
    res = invert_char_fn(prof, cfg.dist(), np.linspace(cfg.x_min, cfg.x_max, cfg.x_points))
    phi, err = res.phi, res.abs_err
    return ["x", "f_n", "phi", "abs_err"], [[res.x[i], res.density[i], phi[i], err[i]] for i in range(res.x.size)]


def _mellin(cfg: ExperimentConfig) -> Table:
    ms = mellin_condition_sum(cfg.dist(), cfg.n, cfg.ell_max, cfg.grid)
    sums = ms.partial_sums
    return ["ell", "term_modulus", "partial_sum"], [[int(l), t, s] for l, t, s in zip(ms.ell, ms.terms, sums)]


def _maxside(cfg: ExperimentConfig) -> Table:
    a, b = cfg.window
    dist = cfg.dist()
    base = dist.base
    model = MaxDensityModel(
        m=cfg.m,
        mode=cfg.max_mode,
        n=cfg.n,
        dist=dist if cfg.max_mode == "numeric" else None,
        bandwidth_eps=cfg.epsilon,
    )
    wp = window_probability(model, WindowSet(a, b, cfg.n))
    sides = simulate_final_sides(_linear(cfg), cfg.trials, workers=cfg.workers)
    f = frac(sides.max(axis=1))
    mc = float(np.mean((f >= a) & (f < b)))
    cols = ["statistic", "value", "sample_size", "base"]
    return cols, [
        ["window_probability", wp, cfg.trials, base],
        ["monte_carlo_fraction", mc, cfg.trials, base],
        ["benford_limit", b - a, cfg.trials, base],
    ]


def _branching(cfg: ExperimentConfig) -> Table:
    spec = _tree(cfg)
    s_vals = [float(s) for s in cfg.s_values]
    rho = np.asarray(
        _tree_map(cfg, lambda t: rho_statistic((blk.sum(axis=1) for blk in branching_leaf_blocks(spec, t)), s_vals, spec.dist.base))
    )
    mean = rho.mean(axis=0)
    std = rho.std(axis=0, ddof=1) if cfg.trials > 1 else np.zeros_like(mean)
    target = benford_cdf(np.asarray(s_vals), spec.dist.base)
    cols = ["s", "mean_rho", "std_rho", "benford_cdf", "abs_err", "trees", "leaves_per_tree"]
    rows = [
        [s, mean[i], std[i], target[i], abs(mean[i] - target[i]), cfg.trials, spec.leaf_count]
        for i, s in enumerate(s_vals)
    ]
    return cols, rows


PIPELINES = {
    "simulate": _simulate,
    "conformance": _conformance,
    "wafer": _wafer,
    "charfn": _charfn,
    "mellin": _mellin,
    "maxside": _maxside,
    "branching": _branching,
}


# -- serialization -------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_csv(table: Table) -> bytes:
    cols, rows = table
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode()


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else _fmt(v)
    return v


def render_json(table: Table, command: str) -> bytes:
    cols, rows = table
    doc = {"command": command, "columns": cols, "rows": [dict(zip(cols, map(_json_value, r))) for r in rows]}
    return (json.dumps(doc, indent=2) + "\n").encode()


def run(cfg: ExperimentConfig) -> tuple[RunManifest, bytes]:
    """Validate and execute ``cfg``; write the result and manifest if an output path is set."""
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    t0 = time.perf_counter()
    timings = {}
    table = PIPELINES[cfg.command](cfg)
    timings["compute"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    payload = render_csv(table) if cfg.output_format == "csv" else render_json(table, cfg.command)
    manifest = RunManifest(
        config=cfg.to_dict(), version=__version__, wall_clock=0.0, timings=timings, seed=cfg.seed
    )
    if cfg.output_path:
        with open(cfg.output_path, "wb") as fh:
            fh.write(payload)
        manifest.digests[os.path.basename(cfg.output_path)] = hashlib.sha256(payload).hexdigest()
    else:
        manifest.digests["stdout"] = hashlib.sha256(payload).hexdigest()
    timings["write"] = time.perf_counter() - t1
    manifest.wall_clock = time.perf_counter() - t0
    if cfg.output_path:
        with open(cfg.output_path + ".manifest.json", "w") as fh:
            json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return manifest, payload


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="benfrag", description="Benford behavior of box-fragmentation processes.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="result file; a manifest is written next to it")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int, help="thread count (default: $BENFRAG_WORKERS or 1)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def load_config(args: argparse.Namespace, environ=os.environ) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        data = ExperimentConfig.from_json(text).to_dict()
    data["command"] = args.command
    if "BENFRAG_WORKERS" in environ and args.workers is None and not (args.config and "workers" in json.loads(text)):
        try:
            data["workers"] = int(environ["BENFRAG_WORKERS"])
        except ValueError:
            raise ConfigError([f"BENFRAG_WORKERS must be an integer, got {environ['BENFRAG_WORKERS']!r}"])
    for flag, key in (("seed", "seed"), ("trials", "trials"), ("out", "output_path"), ("format", "output_format"), ("workers", "workers")):
        v = getattr(args, flag)
        if v is not None:
            data[key] = v
    return ExperimentConfig.from_dict(data)


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args)
        _, payload = run(cfg)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:  # QuadratureError and quadrature non-convergence
        print(f"numerical certificate failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not cfg.output_path:
        sys.stdout.write(payload.decode())
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
