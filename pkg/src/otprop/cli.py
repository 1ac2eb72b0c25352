"""Command-line front end: ``otprop run``, ``otprop bench`` and ``otprop eval``.

Exit codes: 0 on success, 1 on invalid input (a one-line JSON object is
written to stderr), 2 when the transport solver fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import OTPropError, PartitionState
from .data_io import (
    BUILTIN_DATASETS,
    SplitSpec,
    builtin_path,
    fingerprint,
    load_csv,
    make_split,
    read_predictions,
    standardize,
    write_predictions,
    write_trace,
)
from .metrics import ari, nmi
from .ot_solver import NotConverged, SinkhornConfig
from .propagation import WEIGHTINGS, OtpConfig, run_otp

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2
DEFAULT_FRACTIONS = (0.05, 0.15, 0.25, 0.35)
RESULT_COLUMNS = (
    "dataset",
    "fraction",
    "mean_nmi",
    "std_nmi",
    "mean_ari",
    "std_ari",
    "mean_iterations",
    "mean_runtime_ms",
)


class UsageError(Exception):
    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for solver failures
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _fraction_list(text: str) -> list[float]:
    try:
        return [float(f) for f in text.split(",") if f.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    d = SinkhornConfig()
    p.add_argument("--data", required=True, action="append",
                   help="CSV path, or the name of a bundled dataset (iris, heart, ionosphere)")
    p.add_argument("--label-col", help="label column (defaults to the bundled dataset's)")
    p.add_argument("--epsilon", type=float, default=d.epsilon)
    p.add_argument("--alpha", type=float, default=OtpConfig.alpha)
    p.add_argument("--max-iterations", type=int, default=d.max_iterations,
                   help="Sinkhorn iteration budget per transport problem")
    p.add_argument("--tol", type=float, default=d.feasibility_tol,
                   help="L1 marginal violation at which Sinkhorn stops")
    p.add_argument("--labeled-weights", choices=WEIGHTINGS, default=OtpConfig.labeled_weights)
    p.add_argument("--no-standardize", dest="standardize", action="store_false")
    p.add_argument("--stratified", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="otprop", description="Label propagation through optimal transport.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="propagate labels once and write predictions")
    _add_model_flags(run)
    run.add_argument("--labeled-fraction", type=float,
                     help="hide all but this fraction of labels; omit to use the file's empty label cells")
    run.add_argument("--output", default="predictions.csv")
    run.add_argument("--trace", default="trace.json")
    run.add_argument("--manifest", help="defaults to the trace path with suffix .manifest.json")

    bench = sub.add_parser("bench", help="repeat runs over labeled fractions and seeds")
    _add_model_flags(bench)
    bench.add_argument("--fractions", type=_fraction_list, default=list(DEFAULT_FRACTIONS))
    bench.add_argument("--repeats", type=int, default=10,
                       help="seeds seed, seed+1, ... per fraction")
    bench.add_argument("--output", default="results.csv")

    ev = sub.add_parser("eval", help="score a predictions file against ground truth")
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--truth", required=True, help="CSV path or bundled dataset name")
    ev.add_argument("--label-col")
    ev.add_argument("--scope", choices=("all", "pseudo"), default="all",
                    help="score every row, or only pseudo-labeled rows")
    return parser


def _resolve_data(name: str, label_col: str | None) -> tuple[Path, str, str]:
    """(path, label column, display name) for a path or bundled dataset name."""
    path = Path(name)
    if not path.exists() and name in BUILTIN_DATASETS:
        return builtin_path(name), label_col or BUILTIN_DATASETS[name], name
    if not path.exists():
        raise OTPropError(f"data file not found: {name}")
    if label_col is None:
        raise OTPropError("--label-col is required for CSV files")
    return path, label_col, path.stem


def _configs(args) -> OtpConfig:
    # dataclass validation turns bad ranges into ValueError -> exit 1
    return OtpConfig(
        alpha=args.alpha,
        sinkhorn=SinkhornConfig(args.epsilon, args.max_iterations, args.tol),
        labeled_weights=args.labeled_weights,
    )


def _resolved_config(args, cfg: OtpConfig, data: str, label_col: str) -> dict:
    out = {
        "data": data,
        "label_col": label_col,
        "alpha": cfg.alpha,
        "labeled_weights": cfg.labeled_weights,
        "warm_start": cfg.warm_start,
        "standardize": args.standardize,
        "stratified": args.stratified,
        "seed": args.seed,
        "labeled_fraction": getattr(args, "labeled_fraction", None),
    }
    out.update({f"sinkhorn_{k}": v for k, v in asdict(cfg.sinkhorn).items()})
    return out


def _load(path, label_col, do_standardize):
    ds = load_csv(path, label_col)
    return standardize(ds) if do_standardize else ds


def cmd_run(args) -> int:
    cfg = _configs(args)
    if len(args.data) != 1:
        raise OTPropError("run takes exactly one --data")
    path, label_col, _ = _resolve_data(args.data[0], args.label_col)
    timings = {}

    t0 = time.perf_counter()
    ds = _load(path, label_col, args.standardize)
    timings["load_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    if args.labeled_fraction is not None:
        seed = make_split(ds, SplitSpec(args.labeled_fraction, args.seed, args.stratified))
    else:
        seed = PartitionState.from_dataset(ds)
        if seed.n_unlabeled == 0:
            raise OTPropError("every row is labeled; pass --labeled-fraction to hide labels")
    timings["split_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    final, trace = run_otp(ds, seed, cfg)
    timings["propagate_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    config = _resolved_config(args, cfg, args.data[0], label_col)
    write_predictions(args.output, ds, final)
    write_trace(args.trace, trace, config)
    timings["write_ms"] = 1e3 * (time.perf_counter() - t0)

    manifest = args.manifest or str(Path(args.trace).with_suffix(".manifest.json"))
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "config": config,
                "dataset_sha256": fingerprint(path),
                "timings": timings,
                "trace": str(args.trace),
                "predictions": str(args.output),
                "created": datetime.now(timezone.utc).isoformat(),
                "version": __version__,
            },
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")

    summary = {"iterations": trace.n_iterations, "n_seed": seed.n_labeled,
               "n_pseudo": seed.n_unlabeled}
    if ds.fully_labeled:
        pred = final.full_labels(ds.n_samples)
        summary.update(nmi=nmi(pred, ds.labels), ari=ari(pred, ds.labels))
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def bench_rows(args) -> list[dict]:
    """One aggregated row per (dataset, fraction), in command-line order."""
    cfg = _configs(args)
    if args.repeats < 1:
        raise ValueError("--repeats must be >= 1")
    if not args.fractions:
        raise ValueError("--fractions is empty")
    rows = []
    for name in args.data:
        path, label_col, display = _resolve_data(name, args.label_col)
        ds = _load(path, label_col, args.standardize)
        if not ds.fully_labeled:
            raise OTPropError(f"{name}: bench needs a fully labeled dataset")
        for frac in args.fractions:
            cells = []
            for r in range(args.repeats):
                seed = make_split(ds, SplitSpec(frac, args.seed + r, args.stratified))
                t0 = time.perf_counter()
                final, trace = run_otp(ds, seed, cfg)
                ms = 1e3 * (time.perf_counter() - t0)
                pred = final.full_labels(ds.n_samples)
                cells.append((nmi(pred, ds.labels), ari(pred, ds.labels), trace.n_iterations, ms))
            c = np.array(cells)
            rows.append({
                "dataset": display,
                "fraction": frac,
                "mean_nmi": c[:, 0].mean(),
                "std_nmi": c[:, 0].std(),
                "mean_ari": c[:, 1].mean(),
                "std_ari": c[:, 1].std(),
                "mean_iterations": c[:, 2].mean(),
                "mean_runtime_ms": c[:, 3].mean(),
            })
    return rows


def _format_table(rows: list[dict]) -> str:
    header = ("dataset", "fraction", "NMI", "ARI", "iters", "ms/run")
    body = [
        (
            r["dataset"],
            f"{r['fraction']:.2f}",
            f"{r['mean_nmi']:.4f} ± {r['std_nmi']:.4f}",
            f"{r['mean_ari']:.4f} ± {r['std_ari']:.4f}",
            f"{r['mean_iterations']:.1f}",
            f"{r['mean_runtime_ms']:.0f}",
        )
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(x.ljust(w) for x, w in zip(line, widths)) for line in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_bench(args) -> int:
    rows = bench_rows(args)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})
    print(_format_table(rows))
    return EXIT_OK


def cmd_eval(args) -> int:
    path, label_col, _ = _resolve_data(args.truth, args.label_col)
    truth = load_csv(path, label_col)
    pred = read_predictions(args.predictions)
    n = truth.n_samples
    if set(pred) != set(range(n)):
        extra = sorted(set(pred) - set(range(n)))[:5]
        missing = sorted(set(range(n)) - set(pred))[:5]
        raise OTPropError(
            f"predictions do not align with truth rows 0..{n - 1} "
            f"(unexpected {extra}, missing {missing})"
        )
    rows = list(range(n))
    if args.scope == "pseudo":
        origin = _read_origin(args.predictions)
        rows = [i for i in rows if origin[i] == "pseudo"]
        if not rows:
            raise OTPropError("no pseudo-labeled rows to score")
    y = truth.labels[rows]
    if np.any(y < 0):
        raise OTPropError("truth file has unlabeled rows in the scored range")
    truth_names = [truth.class_names[k] for k in y]
    pred_names = [pred[i] for i in rows]
    print(json.dumps({"nmi": nmi(pred_names, truth_names), "ari": ari(pred_names, truth_names)}))
    return EXIT_OK


def _read_origin(path) -> dict[int, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if "origin" not in (reader.fieldnames or ()):
            raise OTPropError("predictions file has no origin column")
        return {int(r["row_index"]): r["origin"] for r in reader}


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "eval": cmd_eval}


def _fail(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(e.usage)
        _fail("usage", str(e))
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except NotConverged as e:
        _fail(type(e).__name__, str(e))
        return EXIT_NOT_CONVERGED
    except (OTPropError, ValueError, KeyError, OSError) as e:
        _fail(type(e).__name__, str(e))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
