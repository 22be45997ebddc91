"""Batch command-line driver.

Commands: ``validate <model.json>``, ``run <config.json>``,
``bench <sweep.json>``, ``risk <config.json>``.  Exit codes: 0 success,
2 validation error, 3 resource limit, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from .baselines import exact_cdf, mc_cdf, mc_sample, mc_var_es, recursive_convolution
from .bench import run_sweep
from .engine import (CdfApproximation, dense_spectral_cdf, dense_spectral_pdf,
                     qtt_spectral_cdf, qtt_spectral_pdf)
from .errors import (InvalidArgumentError, NumericFailureError, QttaggError,
                     ResourceLimitError)
from .grids import GridSpec
from .models import (FilterSpec, WeightedSumModel, model_from_json,
                     support_bound_sum)
from .risk import risk_report

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3
EXIT_NUMERIC = 4


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path} is not valid JSON: {exc}") from exc


def _load_model(path: str) -> WeightedSumModel:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read {path}: {exc}") from exc
    return model_from_json(text)


def _resolve_length(config: dict, model: WeightedSumModel) -> float:
    if config.get("L"):
        return float(config["L"])
    if model.is_discrete():
        # leave one grid margin above the top atom so the full mass is kept
        return model.max_value() * 1.0625
    return support_bound_sum(model, float(config.get("delta", 1e-8)))


def _write_csv(path: str, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def cmd_validate(args) -> int:
    model = _load_model(args.model)
    print(f"ok: {model.size} components, weights sum {sum(model.weights):g}")
    return EXIT_OK


def _run_spectral(config, model, out_dir) -> int:
    method = config.get("method", "dense")
    n = int(config["n"])
    eps = float(config.get("eps", 1e-8))
    filt = FilterSpec(**config.get("filter", {"kind": "exp"})) \
        if isinstance(config.get("filter"), dict) else FilterSpec(config.get("filter", "exp"))
    length = _resolve_length(config, model)
    cap = int(config["bond_cap"]) if config.get("bond_cap") else None
    if method == "dense":
        cdf = dense_spectral_cdf(model, filt, n, length)
        dens = dense_spectral_pdf(model, filt, n, length) if config.get("density") else None
    else:
        cdf = qtt_spectral_cdf(model, filt, n, length, eps, max_bond=cap)
        dens = qtt_spectral_pdf(model, filt, n, length, eps, max_bond=cap) \
            if config.get("density") else None

    xs = cdf.grid.points()
    _write_csv(os.path.join(out_dir, "cdf.csv"), ["x", "F"],
               zip(xs, cdf.values()))
    if dens is not None:
        _write_csv(os.path.join(out_dir, "density.csv"), ["x", "f"],
                   zip(xs, dens.values()))
    reports = [risk_report(cdf, float(a)) for a in config.get("alpha", [])]
    _dump_risk(out_dir, reports)
    with open(os.path.join(out_dir, "diagnostics.json"), "w") as fh:
        json.dump(cdf.diagnostics, fh, indent=2)
    return EXIT_OK


def _run_mc(config, model, out_dir) -> int:
    n = int(config.get("n", 12))
    length = _resolve_length(config, model)
    samples = mc_sample(model, int(config.get("S", 10000)),
                        int(config.get("seed", 1)))
    xs = GridSpec(0.0, length, n).points()
    fhat, var = mc_cdf(samples, xs, return_variance=True)
    _write_csv(os.path.join(out_dir, "cdf.csv"), ["x", "F", "variance"],
               zip(xs, fhat, var))
    reports = [mc_var_es(samples, float(a)) for a in config.get("alpha", [])]
    _dump_risk(out_dir, reports)
    with open(os.path.join(out_dir, "diagnostics.json"), "w") as fh:
        json.dump({"method": "mc", "samples": samples.size,
                   "seed": samples.seed}, fh, indent=2)
    return EXIT_OK


def _run_rc(config, model, out_dir) -> int:
    dist = recursive_convolution(model)
    with open(os.path.join(out_dir, "distribution.csv"), "w", newline="") as fh:
        fh.write(dist.to_csv())
    if config.get("n"):
        length = _resolve_length(config, model)
        xs = GridSpec(0.0, length, int(config["n"])).points()
        _write_csv(os.path.join(out_dir, "cdf.csv"), ["x", "F"],
                   zip(xs, exact_cdf(dist, xs)))
    with open(os.path.join(out_dir, "diagnostics.json"), "w") as fh:
        json.dump({"method": "rc", "support_size": dist.size}, fh, indent=2)
    return EXIT_OK


def _dump_risk(out_dir, reports):
    if not reports:
        return
    payload = [json.loads(r.to_json()) for r in reports]
    with open(os.path.join(out_dir, "risk.json"), "w") as fh:
        json.dump(payload, fh, indent=2)


def cmd_run(args) -> int:
    config = _load_json(args.config)
    if "model" not in config or "method" not in config:
        raise InvalidArgumentError('run config needs "model" and "method"')
    model = _load_model(config["model"])
    out_dir = config.get("output", args.output or ".")
    os.makedirs(out_dir, exist_ok=True)
    method = config["method"]
    try:
        if method in ("dense", "qtt"):
            code = _run_spectral(config, model, out_dir)
        elif method == "mc":
            code = _run_mc(config, model, out_dir)
        elif method == "rc":
            code = _run_rc(config, model, out_dir)
        else:
            raise InvalidArgumentError(f"unknown method {method!r}")
    except (ResourceLimitError, NumericFailureError) as exc:
        # leave enough in diagnostics.json to locate the failing step
        with open(os.path.join(out_dir, "diagnostics.json"), "w") as fh:
            json.dump({"status": type(exc).__name__,
                       "step": getattr(exc, "step", None),
                       "detail": str(exc)}, fh, indent=2)
        raise
    if args.plot or config.get("plot"):
        from .report import plot_run_outputs
        for path in plot_run_outputs(out_dir):
            print(f"wrote {path}")
    return code


def cmd_bench(args) -> int:
    config = _load_json(args.config)
    out_dir = config.get("output", args.output or ".")
    csv_path = run_sweep(config, out_dir, workers=int(config.get("workers", 1)))
    print(f"wrote {csv_path}")
    failures = ok = 0
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["status"] == "ok":
                ok += 1
            else:
                failures += 1
    if args.plot or config.get("plot"):
        from .report import plot_bench_csv
        for path in plot_bench_csv(csv_path):
            print(f"wrote {path}")
    if ok == 0 and failures > 0:
        print(f"all {failures} rows failed", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_risk(args) -> int:
    config = _load_json(args.config)
    if "model" not in config:
        raise InvalidArgumentError('risk config needs "model"')
    model = _load_model(config["model"])
    alphas = config.get("alpha") or [0.99]
    out_dir = config.get("output", args.output or ".")
    os.makedirs(out_dir, exist_ok=True)
    method = config.get("method", "qtt")
    if method == "mc":
        samples = mc_sample(model, int(config.get("S", 100000)),
                            int(config.get("seed", 1)))
        reports = [mc_var_es(samples, float(a)) for a in alphas]
    else:
        filt = FilterSpec(config.get("filter", "exp"))
        n = int(config.get("n", 14))
        length = _resolve_length(config, model)
        if method == "dense":
            cdf = dense_spectral_cdf(model, filt, n, length)
        else:
            cdf = qtt_spectral_cdf(model, filt, n, length,
                                   float(config.get("eps", 1e-8)))
        reports = [risk_report(cdf, float(a)) for a in alphas]
    _dump_risk(out_dir, reports)
    for rep in reports:
        print(rep.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qttagg",
        description="Aggregate distributions, VaR and ES of weighted sums "
                    "via spectral methods in dense or tensor-train form.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model JSON file")
    p.add_argument("model")
    p.set_defaults(fn=cmd_validate)

    for name, fn in (("run", cmd_run), ("bench", cmd_bench), ("risk", cmd_risk)):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--output", default=None, help="output directory")
        p.add_argument("--plot", action="store_true",
                       help="render figures next to the delimited output")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceLimitError as exc:
        step = f" (step {exc.step})" if exc.step is not None else ""
        print(f"resource limit: {exc}{step}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericFailureError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QttaggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
