"""
Command-line front end.

Every command reads a dataset manifest and an optional JSON run config and
writes delimited tables plus one ``summary.json`` into ``--out-dir``.
Wall-clock timings go to a separate ``timing.json`` so that summaries are
byte-identical across repeated runs with the same seed.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import graph as graphs
from .data import MultiViewDataset
from .dataio import dump_json, load_dataset, load_run_config, write_matrix
from .errors import ConfigError, STCCAError
from .evaluation import EvalConfig, benchmark, inject_noise, reduce_views
from .solver import fit

log = logging.getLogger("stccal")

LOG_ENV = "STCCAL_LOG_LEVEL"


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


class _Table:
    """CSV table that flushes after every row."""

    def __init__(self, path: Path, header):
        self._fh = path.open("w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(header)
        self._fh.flush()

    def row(self, values):
        self._w.writerow([_cell(v) for v in values])
        self._fh.flush()

    def close(self):
        self._fh.close()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _settings(args):
    cfg, ecfg = load_run_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    return cfg.replace(seed=seed), ecfg, seed


def _reduced(data: MultiViewDataset, pca_dim: int) -> MultiViewDataset:
    red, _, _ = reduce_views(data, None, pca_dim)
    return red


def _benchmark_cell(job):
    data, cfg, ecfg, seed = job
    return benchmark(data, cfg, ecfg, seed)


def _run_cells(jobs, n_jobs: int):
    """Yield benchmark reports in input order, optionally from worker processes."""
    if n_jobs <= 1:
        for job in jobs:
            yield _benchmark_cell(job)
        return
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        yield from pool.map(_benchmark_cell, jobs)


def cmd_fit(args) -> int:
    cfg, ecfg, _ = _settings(args)
    data = load_dataset(args.manifest)
    red = _reduced(data, ecfg.pca_dim)
    res = fit(red, cfg)
    out = args.out_dir
    for p, h in enumerate(res.projections):
        write_matrix(out / f"projection_view{p}.csv", h)
    table = _Table(out / "trace.csv", ["iteration", "objective", "stationarity", "feasibility"])
    stat = [float("nan")] + list(res.stationarity_trace)
    for i, (g, s, f) in enumerate(zip(res.objective_trace, stat, res.feasibility_trace)):
        table.row([i, float(g), float(s), float(f)])
    table.close()
    summary = {"command": "fit", "config": cfg.to_dict(), "pca_dim": ecfg.pca_dim,
               "dims": red.dims, "result": res.summary()}
    _write(out / "summary.json", dump_json(summary))
    _write(out / "timing.json", dump_json({"fit_seconds": res.wall_time}))
    log.info("fit finished: %d iterations, objective %.6g", res.iterations, res.objective)
    return 0


def cmd_evaluate(args) -> int:
    cfg, ecfg, seed = _settings(args)
    data = load_dataset(args.manifest)
    report = benchmark(data, cfg, ecfg, seed)
    table = _Table(args.out_dir / "repeats.csv", ["repeat", "accuracy", "f1_macro"])
    for i, (a, f) in enumerate(zip(report.accuracies, report.f1_scores)):
        table.row([i, float(a), float(f)])
    table.close()
    _write(args.out_dir / "summary.json", dump_json({"command": "evaluate", "report": report.summary()}))
    _write(args.out_dir / "timing.json", dump_json({"repeat_seconds": report.wall_times}))
    return 0


def cmd_dim_sweep(args) -> int:
    cfg, ecfg, seed = _settings(args)
    data = load_dataset(args.manifest)
    dims = args.dims
    if any(r < 1 for r in dims):
        raise ConfigError(f"dimensions must be positive, got {dims}")
    # largest usable r: every reduced view must have at least r features
    n_train = data.n_samples - int(np.ceil(ecfg.test_ratio * data.n_samples))
    limit = min(min(data.dims), n_train)
    usable = [r for r in dims if r <= limit]
    for r in dims:
        if r > limit:
            log.warning("skipping r=%d: exceeds the smallest reduced view dimension %d", r, limit)
    jobs = [(data, cfg.replace(r=r), EvalConfig(**{**_eval_dict(ecfg), "pca_dim": max(r, ecfg.pca_dim)}), seed)
            for r in usable]
    table = _Table(args.out_dir / "dim_sweep.csv", ["r", "accuracy_mean", "accuracy_std", "f1_mean", "f1_std"])
    rows = []
    for r, rep in zip(usable, _run_cells(jobs, args.jobs)):
        table.row([r, rep.accuracy_mean, rep.accuracy_std, rep.f1_mean, rep.f1_std])
        rows.append({"r": r, "report": rep.summary()})
    table.close()
    _write(args.out_dir / "summary.json", dump_json({"command": "dim-sweep", "skipped": [r for r in dims if r > limit],
                                                     "rows": rows}))
    return 0


def _eval_dict(ecfg: EvalConfig) -> dict:
    return {"repeats": ecfg.repeats, "test_ratio": ecfg.test_ratio, "knn_k": ecfg.knn_k,
            "pca_dim": ecfg.pca_dim, "method": ecfg.method}


def cmd_grid(args) -> int:
    cfg, ecfg, seed = _settings(args)
    lams, orders = args.lams, args.orders
    problems = [f"lambda {v} is negative" for v in lams if v < 0]
    problems += [f"order {v} is below 1" for v in orders if v < 1]
    if problems:
        raise ConfigError("invalid grid: " + "; ".join(problems))
    data = load_dataset(args.manifest)
    cells = [(lam, order) for lam in lams for order in orders]
    jobs = [(data, cfg.replace(lam=lam, order=order, order_weights=None), ecfg, seed) for lam, order in cells]
    long = _Table(args.out_dir / "grid_long.csv", ["lam", "order", "accuracy_mean", "accuracy_std",
                                                   "f1_mean", "f1_std"])
    acc = np.full((len(lams), len(orders)), np.nan)
    rows = []
    for (lam, order), rep in zip(cells, _run_cells(jobs, args.jobs)):
        long.row([lam, order, rep.accuracy_mean, rep.accuracy_std, rep.f1_mean, rep.f1_std])
        acc[lams.index(lam), orders.index(order)] = rep.accuracy_mean
        rows.append({"lam": lam, "order": order, "report": rep.summary()})
    long.close()
    mat = _Table(args.out_dir / "grid.csv", ["lam\\order"] + [str(o) for o in orders])
    for i, lam in enumerate(lams):
        mat.row([lam] + [float(v) for v in acc[i]])
    mat.close()
    _write(args.out_dir / "summary.json", dump_json({"command": "grid", "lams": lams, "orders": orders,
                                                     "accuracy": acc.tolist(), "cells": rows}))
    return 0


def cmd_noise_sweep(args) -> int:
    cfg, ecfg, seed = _settings(args)
    fracs = args.fractions
    bad = [f for f in fracs if not 0.0 <= f <= 1.0]
    if bad:
        raise ConfigError(f"noise fractions must lie in [0, 1], got {bad}")
    if not args.sigma > 0:
        raise ConfigError(f"noise sigma must be positive, got {args.sigma}")
    data = load_dataset(args.manifest)
    noise_seeds = np.random.SeedSequence([seed, 7]).spawn(len(fracs))
    jobs = [(inject_noise(data, f, args.sigma, s), cfg, ecfg, seed) for f, s in zip(fracs, noise_seeds)]
    table = _Table(args.out_dir / "noise_sweep.csv", ["fraction", "accuracy_mean", "accuracy_std",
                                                      "f1_mean", "f1_std"])
    rows = []
    for f, rep in zip(fracs, _run_cells(jobs, args.jobs)):
        table.row([f, rep.accuracy_mean, rep.accuracy_std, rep.f1_mean, rep.f1_std])
        rows.append({"fraction": f, "report": rep.summary()})
    table.close()
    _write(args.out_dir / "summary.json", dump_json({"command": "noise-sweep", "sigma": args.sigma, "rows": rows}))
    return 0


def cmd_graph_export(args) -> int:
    cfg, ecfg, _ = _settings(args)
    data = load_dataset(args.manifest)
    views = range(data.n_views) if args.view is None else [args.view]
    if args.view is not None and not 0 <= args.view < data.n_views:
        raise ConfigError(f"view index {args.view} outside [0, {data.n_views})")
    red = _reduced(data, ecfg.pca_dim)
    gcfg = cfg.graph_config()
    stats = []
    for p in views:
        w = graphs.build_graph(red.views[p], cfg.graph_method, cfg.graph_k, cfg.graph_sigma)
        mo = graphs.multi_order(w, gcfg)
        write_matrix(args.out_dir / f"graph_view{p}_order{gcfg.order}.csv", mo.w_multi)
        stats.append({"view": p, "n": int(w.n), "first_order_nnz": int(w.weights.nnz),
                      "multi_order_nnz": int(np.count_nonzero(mo.w_multi)),
                      "laplacian_min_eig": float(np.linalg.eigvalsh(mo.laplacian)[0])})
    _write(args.out_dir / "summary.json", dump_json({
        "command": "graph-export", "method": cfg.graph_method, "k": cfg.graph_k,
        "order": gcfg.order, "order_weights": list(gcfg.weights), "views": stats}))
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "dim-sweep": cmd_dim_sweep,
    "grid": cmd_grid,
    "noise-sweep": cmd_noise_sweep,
    "graph-export": cmd_graph_export,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stccal", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--manifest", required=True, type=Path, help="dataset manifest (JSON)")
        sp.add_argument("--config", type=Path, default=None, help="run config (JSON)")
        sp.add_argument("--out-dir", required=True, type=Path)
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweep cells")
        if name == "dim-sweep":
            sp.add_argument("--dims", type=_int_list, default=list(range(2, 21, 2)))
        elif name == "grid":
            sp.add_argument("--lams", type=_float_list, default=[1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0])
            sp.add_argument("--orders", type=_int_list, default=list(range(1, 11)))
        elif name == "noise-sweep":
            sp.add_argument("--fractions", type=_float_list, default=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
            sp.add_argument("--sigma", type=float, default=1.0)
        elif name == "graph-export":
            sp.add_argument("--view", type=int, default=None, help="single view (default: all)")
    return parser


def main(argv=None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        code = COMMANDS[args.command](args)
        log.info("%s done in %.2fs", args.command, time.perf_counter() - t0)
        return code
    except (STCCAError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
