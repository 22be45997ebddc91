"""Benchmark instance generators and sweep execution for the CLI.

Sweeps emit one CSV row per (instance, method, parameter combination) with
error norms against a reference, bond statistics, wall time, and memory
estimates.  Rows are computed independently, written atomically, and merged
at the end, so partial failures stay localized.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import exact_cdf, mc_cdf, mc_sample, recursive_convolution
from .engine import (dense_spectral_cdf, error_metrics, qtt_filtered_cf,
                     qtt_spectral_cdf)
from .errors import QttaggError
from .models import (Bernoulli, FilterSpec, Lognormal, WeightedSumModel,
                     support_bound_sum)

SCHEMA_VERSION = 1

BENCH_COLUMNS = [
    "schema_version", "kind", "instance", "seed", "method", "D", "n", "eps",
    "filter", "samples", "length", "l1", "l2", "linf", "median_err",
    "peak_bond", "final_bond", "peak_raw_bond", "final_bytes", "peak_bytes",
    "wall_time_s", "status", "detail",
]


# ---------------------------------------------------------------------------
# instance generators

def wpb_instance(D: int, seed: int, instance: int = 0) -> WeightedSumModel:
    """Weighted Poisson-binomial draw: uniform weights normalized to one,
    Beta(2, 10) probabilities."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, instance, D)))
    w = rng.uniform(0.0, 1.0, D)
    w = w / w.sum()
    p = rng.beta(2.0, 10.0, D)
    return WeightedSumModel(tuple(Bernoulli(float(pi)) for pi in p),
                            tuple(float(wi) for wi in w))


def binomial_model(D: int, p: float = 0.5, normalized: bool = True) -> WeightedSumModel:
    w = 1.0 / D if normalized else 1.0
    return WeightedSumModel(tuple(Bernoulli(p) for _ in range(D)), (w,) * D)


def lognormal_sum_instance(D: int, seed: int, instance: int = 0,
                           mu_range=(-1.0, 1.0), sigma_range=(1.0, 3.0)) -> WeightedSumModel:
    """Lognormal-sum draw with uniform parameters and normalized weights."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, instance, D)))
    mus = rng.uniform(*mu_range, D)
    sigmas = rng.uniform(*sigma_range, D)
    w = rng.uniform(0.0, 1.0, D)
    w = w / w.sum()
    comps = tuple(Lognormal(float(m), float(s)) for m, s in zip(mus, sigmas))
    return WeightedSumModel(comps, tuple(float(wi) for wi in w))


def build_instance(spec: dict, instance: int) -> tuple[WeightedSumModel, float]:
    """Model plus default support length from a generator spec."""
    kind = spec.get("kind")
    seed = int(spec.get("seed", 1))
    if kind == "wpb":
        model = wpb_instance(int(spec["D"]), seed, instance)
        return model, float(spec.get("length", 1.0))
    if kind == "binomial":
        model = binomial_model(int(spec["D"]), float(spec.get("p", 0.5)))
        return model, float(spec.get("length", 1.0))
    if kind == "lognormal_sum":
        model = lognormal_sum_instance(int(spec["D"]), seed, instance)
        delta = float(spec.get("delta", 1e-10))
        length = float(spec.get("length", 0.0)) or support_bound_sum(model, delta)
        return model, length
    raise QttaggError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# row execution

def _blank_row(**kw) -> dict:
    row = {c: "" for c in BENCH_COLUMNS}
    row["schema_version"] = SCHEMA_VERSION
    row["status"] = "ok"
    row.update(kw)
    return row


def _reference_cdf(model, xs):
    dist = recursive_convolution(model)
    return exact_cdf(dist, xs)


def run_bench_row(model: WeightedSumModel, length: float, method: str,
                  n: int, eps: float, filt: FilterSpec, samples: int,
                  seed: int, reference: str, **tags) -> dict:
    """One benchmark measurement; exceptions are captured in the row."""
    row = _blank_row(method=method, D=model.size, n=n, eps=eps,
                     filter=filt.label, samples=samples if method == "mc" else "",
                     length=length, seed=seed, **tags)
    try:
        t0 = time.perf_counter()
        grid_points = None
        if method == "dense":
            approx = dense_spectral_cdf(model, filt, n, length)
            values = approx.payload
            diag = approx.diagnostics
            grid_points = approx.grid.points()
            row["final_bytes"] = diag["final_bytes"]
            row["peak_bytes"] = diag["peak_bytes"]
        elif method == "qtt":
            approx = qtt_spectral_cdf(model, filt, n, length, eps)
            values = approx.values()
            diag = approx.diagnostics
            grid_points = approx.grid.points()
            row["peak_bond"] = diag["peak_bond"]
            row["final_bond"] = diag["final_bond"]
            row["peak_raw_bond"] = diag["peak_raw_bond"]
            row["final_bytes"] = diag["final_bytes"]
            row["peak_bytes"] = diag["peak_bytes"]
        elif method == "cf_qtt":
            phi, _, steps = qtt_filtered_cf(model, filt, n, length, eps)
            row["peak_bond"] = max(s["bond"] for s in steps)
            row["final_bond"] = int(phi.max_bond)
            row["peak_raw_bond"] = max(s["raw_bond"] for s in steps)
            row["final_bytes"] = int(phi.nbytes)
            row["peak_bytes"] = max(s["bytes"] for s in steps)
            values = None
        elif method == "mc":
            from .grids import GridSpec
            grid = GridSpec(0.0, length, n)
            grid_points = grid.points()
            draws = mc_sample(model, samples, seed)
            values = mc_cdf(draws, grid_points)
        else:
            raise QttaggError(f"unknown method {method!r}")
        row["wall_time_s"] = time.perf_counter() - t0

        if values is not None and reference == "rc":
            ref = _reference_cdf(model, grid_points)
            dx = length / 2**n
            m = error_metrics(values, ref, dx=dx)
            row.update(l1=m.l1, l2=m.l2, linf=m.linf, median_err=m.median)
    except QttaggError as exc:
        row["status"] = type(exc).__name__
        detail = str(exc)
        step = getattr(exc, "step", None)
        if step is not None:
            detail = f"step={step}: {detail}"
        row["detail"] = detail
    return row


def expand_sweep(config: dict):
    """Cross product of the sweep lists into row tasks."""
    generator = config.get("generator")
    if not generator:
        raise QttaggError('sweep config needs a "generator" section')
    methods = config.get("methods", ["dense"])
    ns = config.get("n", [10])
    epss = config.get("eps", [1e-8])
    filters = config.get("filters", ["exp"])
    sample_counts = config.get("samples", [10000])
    instances = int(config.get("instances", 1))
    reference = config.get("reference", "rc")
    base_seed = int(generator.get("seed", 1))
    ds = generator.get("D_list", [generator.get("D")])
    tasks = []
    for D in ds:
        gen = dict(generator)
        gen["D"] = D
        for inst in range(instances):
            model, length = build_instance(gen, inst)
            for method in methods:
                for n in ns:
                    for eps in epss:
                        for fname in filters:
                            filt = FilterSpec(fname)
                            slist = sample_counts if method == "mc" else [0]
                            for s in slist:
                                tasks.append(dict(
                                    model=model, length=length, method=method,
                                    n=int(n), eps=float(eps), filt=filt,
                                    samples=int(s), seed=base_seed + inst,
                                    reference=reference,
                                    kind=gen.get("kind", ""), instance=inst))
    return tasks


def run_sweep(config: dict, out_dir: str, workers: int = 1) -> str:
    """Execute a sweep and merge the per-row results into bench.csv."""
    tasks = expand_sweep(config)
    if not tasks:
        raise QttaggError("sweep expanded to zero rows")
    os.makedirs(out_dir, exist_ok=True)
    rows_dir = os.path.join(out_dir, "rows")
    os.makedirs(rows_dir, exist_ok=True)

    def execute(item):
        idx, task = item
        row = run_bench_row(**task)
        path = os.path.join(rows_dir, f"row_{idx:05d}.json")
        _atomic_write(path, json.dumps(row))
        return row

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(execute, enumerate(tasks)))
    else:
        rows = [execute(item) for item in enumerate(tasks)]

    out_path = os.path.join(out_dir, "bench.csv")
    _atomic_write(out_path, rows_to_csv(rows))
    return out_path


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: row.get(c, "") for c in BENCH_COLUMNS})
    return buf.getvalue()


def _atomic_write(path: str, text: str):
    handle, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".")
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    keep = (xs > 0) & (ys > 0)
    if keep.sum() < 2:
        raise QttaggError("need at least two positive points for a slope fit")
    return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])
