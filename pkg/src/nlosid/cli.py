"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 numerical failure.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .classifiers import (ann_classify, ann_init, ann_train, error_rates,
                          mlr_classify)
from .errors import ConfigError, DataFormatError, NumericalError
from .experiment import (ExperimentConfig, _fit_gev_table, _training_seed,
                         cmd_extract, cmd_simulate, ingest_sweeps,
                         inputs_from_manifest, run_experiment)
from .fileio import (load_ann_model, load_features, load_json, load_mlr_model,
                     load_sweep_csv, save_ann_model, save_cir_tensor,
                     save_json, save_mlr_model, save_verdicts)
from .pas import AngularGrid


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        doc = load_json(args.config)
        config = ExperimentConfig.from_dict(doc)
    else:
        config = ExperimentConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _out_path(args, default: str) -> Path:
    return Path(args.out) if args.out is not None else Path(default)


def _axis(text: str, name: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--{name} must look like start:stop:step")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--{name}: {exc}") from exc


def _grid_from_axes(az: str, el: str) -> AngularGrid:
    az_lo, az_hi, az_step = _axis(az, "az")
    el_lo, el_hi, el_step = _axis(el, "el")

    def count(lo, hi, step, name):
        if step <= 0 or hi <= lo:
            raise ConfigError(f"--{name} must have start < stop and step > 0")
        n = int(round((hi - lo) / step)) + 1
        if abs(lo + (n - 1) * step - hi) > 1e-9 * step:
            raise ConfigError(
                f"--{name}: ({lo}, {hi}) is not a whole number of {step} steps")
        return n

    return AngularGrid(
        az_start_deg=az_lo, az_step_deg=az_step,
        n_az=count(az_lo, az_hi, az_step, "az"),
        el_start_deg=el_lo, el_step_deg=el_step,
        n_el=count(el_lo, el_hi, el_step, "el"))


def _run_simulate(args) -> int:
    config = _load_config(args)
    manifest = cmd_simulate(config, _out_path(args, "out"))
    print(f"wrote {config.n_realizations} realizations; manifest {manifest}")
    return 0


def _run_ingest(args) -> int:
    grid = _grid_from_axes(args.az, args.el)
    sweeps = {}
    for path in args.sweeps:
        for key, payload in load_sweep_csv(path).items():
            if key in sweeps:
                raise DataFormatError(
                    f"direction (az={key[0]:g}, el={key[1]:g}) appears in "
                    f"more than one sweep file")
            sweeps[key] = payload
    cir = ingest_sweeps(sweeps, grid, window=args.window)
    out = _out_path(args, "tensor.json")
    save_cir_tensor(cir, out)
    print(f"wrote {grid.n_el}x{grid.n_az}x{cir.n_taps} tensor to {out}")
    return 0


def _run_extract(args) -> int:
    config = _load_config(args)
    if args.manifest is not None:
        inputs = inputs_from_manifest(args.manifest)
    else:
        inputs = [(i, Path(p), None) for i, p in enumerate(args.cir)]
    out = _out_path(args, "features.csv")
    rows, log = cmd_extract(inputs, config.seg, config.metric, out_csv=out)
    save_json(Path(str(out) + ".log.json"), {"format": "extraction_log", **log})
    print(f"wrote {len(rows)} feature rows to {out} "
          f"({log['skipped_clusters']} clusters skipped, "
          f"{len(log['los_missed'])} realizations missed the direct path)")
    return 0


def _run_fit(args) -> int:
    rows = [fv for _, fv in load_features(args.features)]
    _, table = _fit_gev_table(rows)
    out = _out_path(args, "gev_table.json")
    save_json(out, {"format": "gev_table", "metrics": table})
    print(f"wrote per-class distribution table to {out}")
    return 0


def _run_train(args) -> int:
    config = _load_config(args)
    rows = [fv for _, fv in load_features(args.features)]
    mlr_model, _ = _fit_gev_table(rows)
    ann_model = ann_train(ann_init(_training_seed(config.seed, 0)), rows,
                          config.schedule)
    out_dir = _out_path(args, "out")
    out_dir.mkdir(parents=True, exist_ok=True)
    save_mlr_model(out_dir / "mlr_model.json", mlr_model)
    save_ann_model(out_dir / "ann_model.json", ann_model)
    print(f"wrote mlr_model.json and ann_model.json under {out_dir}")
    return 0


def _run_classify(args) -> int:
    doc = load_json(args.model)
    kind = doc.get("format")
    rows = load_features(args.features)
    if kind == "mlr_model":
        model = load_mlr_model(args.model)
        subset = args.metrics.split(",") if args.metrics else None
        verdicts = [mlr_classify(model, fv, metrics=subset)
                    for _, fv in rows]
    elif kind == "ann_model":
        if args.metrics:
            raise ConfigError("--metrics only applies to the ratio test")
        model = load_ann_model(args.model)
        verdicts = [ann_classify(model, fv) for _, fv in rows]
    else:
        raise DataFormatError(
            f"{args.model}: expected an mlr_model or ann_model document, "
            f"found {kind!r}")
    out = _out_path(args, "verdicts.csv")
    save_verdicts(out, [(r, v, fv.label) for (r, fv), v in zip(rows, verdicts)])
    labelled = [(v, fv.label) for (_, fv), v in zip(rows, verdicts)
                if fv.label is not None]
    msg = f"wrote {len(verdicts)} verdicts to {out}"
    if labelled:
        t1, t2 = error_rates([v for v, _ in labelled],
                             [t for _, t in labelled])
        msg += f"; type I {t1:.3f}, type II {t2:.3f}"
    print(msg)
    return 0


def _run_experiment(args) -> int:
    config = _load_config(args)
    out_dir = _out_path(args, "out")
    report = run_experiment(config, out_dir)
    print(f"wrote report.json under {out_dir}")
    _print_error_table(report)
    return 0


def _run_report(args) -> int:
    report = load_json(args.report)
    if report.get("format") != "report":
        raise DataFormatError(f"{args.report}: not a report document")
    print(f"mode: {report.get('mode')}")
    counts = report.get("counts", {})
    print("counts: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    print()
    print("fitted distributions (training data)")
    print(f"{'metric':<12}{'class':<7}{'gamma':>10}{'mu':>12}"
          f"{'sigma':>12}{'cdf_rmse':>10}")
    for metric, entry in report.get("gev_table", {}).items():
        for key in ("los", "nlos"):
            p = entry[key]
            print(f"{metric:<12}{key.upper():<7}{p['gamma']:>10.4f}"
                  f"{p['mu']:>12.4f}{p['sigma']:>12.4f}{p['cdf_rmse']:>10.4f}")
    print()
    _print_error_table(report)
    return 0


def _print_error_table(report: dict) -> None:
    print("error rates (held-out data)")
    print(f"{'rule':<12}{'type I':>10}{'type II':>10}")
    for rule, entry in report.get("error_table", {}).items():
        print(f"{rule:<12}{entry['type_i']:>10.3f}{entry['type_ii']:>10.3f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlosid",
        description="Identify line-of-sight and reflected clusters in "
                    "beam-trained power angular spectra.")
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output file or directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="compute threads (reserved; stages are "
                             "currently single-threaded)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write simulated tensors and maps")
    p.set_defaults(func=_run_simulate)

    p = sub.add_parser("ingest", help="build a tensor from measured sweeps")
    p.add_argument("sweeps", nargs="+", help="sweep CSV files")
    p.add_argument("--az", required=True, help="azimuth axis start:stop:step")
    p.add_argument("--el", required=True, help="elevation axis start:stop:step")
    p.add_argument("--window", choices=("hann", "none"), default="hann")
    p.set_defaults(func=_run_ingest)

    p = sub.add_parser("extract", help="segment tensors and compute metrics")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--manifest", help="simulation manifest JSON")
    group.add_argument("--cir", nargs="+", help="tensor manifest files")
    p.set_defaults(func=_run_extract)

    p = sub.add_parser("fit", help="fit per-class metric distributions")
    p.add_argument("--features", required=True, help="labelled feature CSV")
    p.set_defaults(func=_run_fit)

    p = sub.add_parser("train", help="train both classifiers")
    p.add_argument("--features", required=True, help="labelled feature CSV")
    p.set_defaults(func=_run_train)

    p = sub.add_parser("classify", help="score feature vectors with a model")
    p.add_argument("--features", required=True, help="feature CSV")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--metrics",
                   help="comma-separated metric subset for the ratio test")
    p.set_defaults(func=_run_classify)

    p = sub.add_parser("experiment", help="run a full protocol")
    p.set_defaults(func=_run_experiment)

    p = sub.add_parser("report", help="pretty-print a report")
    p.add_argument("report", help="report JSON path")
    p.set_defaults(func=_run_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
