"""Command-line interface: synth, ingest, sweep, report.

Exit code 0 on success; any failure prints a one-line cause to stderr and
exits nonzero. The PPCSMAA_OUTPUT_DIR environment variable overrides the
output directory (and only that) for every subcommand.
"""

import argparse
import os
import sys
from dataclasses import replace

from . import experiment, pipeline, plots
from .jsd import correlation_report, format_correlation_record
from .recovery import SolverConfig, default_rank


def _resolve_output(cli_value: str | None, config_value: str | None = None) -> str:
    env = os.environ.get(experiment.OUTPUT_DIR_ENV)
    if env:
        return env
    if cli_value:
        return cli_value
    if config_value:
        return config_value
    return "results"


def _comma_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_synth_args(parser):
    parser.add_argument("--n", type=int, default=50, help="sensor node count")
    parser.add_argument("--t", type=int, default=120, help="time slot count")
    parser.add_argument("--shared-rank", type=int, default=2)
    parser.add_argument("--private-rank", type=int, default=1)
    parser.add_argument("--noise-std", type=float, default=0.01)
    parser.add_argument("--attributes", type=int, default=2, dest="attribute_count",
                        help="number of correlated attributes")
    parser.add_argument("--seed", type=int, default=0)


def _synth_spec_from(args) -> pipeline.SynthSpec:
    return pipeline.SynthSpec(
        n=args.n, t=args.t, shared_rank=args.shared_rank,
        private_rank=args.private_rank, noise_std=args.noise_std,
        attribute_count=args.attribute_count, seed=args.seed,
    )


def cmd_synth(args) -> int:
    out = _resolve_output(args.output)
    bundle = pipeline.synthesize(_synth_spec_from(args))
    pipeline.save_bundle(out, bundle)
    names = bundle.names
    if args.correlation and len(names) >= 2:
        ratio = correlation_report(bundle.attributes[names[0]], bundle.attributes[names[1]])
        print(format_correlation_record(out, (names[0], names[1]), ratio))
    print(f"wrote synthetic bundle ({len(names)} attributes, "
          f"{bundle.shape[0]}x{bundle.shape[1]}) to {out}")
    return 0


def cmd_ingest(args) -> int:
    out = _resolve_output(args.output)
    schema = pipeline.RecordSchema(
        delimiter="\t" if args.delim == "tab" else ",",
        columns=tuple(_comma_list(args.columns)),
    )
    attributes = _comma_list(args.attributes) if args.attributes else list(schema.attribute_names)
    with open(args.input, "r", encoding="utf-8") as fh:
        records, skipped = pipeline.parse_records(fh, schema)
    bundle = pipeline.build_ground_truth(
        records, attributes, n_min=args.n_min, t_min=args.t_min, slot_width=args.slot_width
    )
    clamp_counts = {}
    if args.clean:
        for name in bundle.names:
            bundle.attributes[name], clamp_counts[name] = pipeline.clean_outliers(
                bundle.attributes[name]
            )
    bundle.meta.update({
        "source": os.path.abspath(args.input),
        "skipped_lines": skipped,
        "clamp_counts": clamp_counts,
    })
    pipeline.save_bundle(out, bundle)
    if args.correlation and len(bundle.names) >= 2:
        first, second = bundle.names[:2]
        ratio = correlation_report(bundle.attributes[first], bundle.attributes[second])
        print(format_correlation_record(args.input, (first, second), ratio))
    print(f"ingested {len(records)} records ({skipped} skipped) into "
          f"{bundle.shape[0]}x{bundle.shape[1]} grid at {out}")
    return 0


def _config_from_args(args) -> experiment.ExperimentConfig:
    if args.config:
        cfg = experiment.load_config(args.config)
        updates = {"output_dir": _resolve_output(args.output, cfg.output_dir)}
        if args.workers is not None:
            updates["workers"] = args.workers
        return replace(cfg, **updates)

    if args.bundle:
        synth = None
        bundle_dir = args.bundle
        shape = pipeline.load_bundle(bundle_dir).shape
    else:
        synth = _synth_spec_from(args)
        bundle_dir = None
        shape = (args.n, args.t)
    rank = args.rank if args.rank is not None else default_rank(*shape)
    solver = SolverConfig(r=rank, lam=args.lam, max_iters=args.max_iters,
                          rel_tol=args.rel_tol, seed=0)
    return experiment.ExperimentConfig(
        methods=tuple(_comma_list(args.methods)),
        sampling_rates=tuple(float(x) for x in _comma_list(args.rates)),
        solver=solver,
        synth=synth,
        bundle_dir=bundle_dir,
        runs_per_cell=args.runs,
        base_seed=args.base_seed,
        K=args.K,
        output_dir=_resolve_output(args.output),
        workers=args.workers if args.workers is not None else 1,
    )


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    rows = experiment.run_sweep(cfg)
    summaries = experiment.aggregate(rows)
    paths = experiment.emit(rows, summaries, cfg.output_dir, cfg)
    failures = sum(1 for r in rows if r.failed)
    print(f"sweep complete: {len(rows)} rows ({failures} failed), "
          f"raw results at {paths['raw']}")
    return 0


def cmd_report(args) -> int:
    results_dir = args.results
    raw_path = args.raw or os.path.join(results_dir, "raw.csv")
    out = _resolve_output(args.output, results_dir)
    rows = experiment.read_raw_csv(raw_path)
    summaries = experiment.aggregate(rows)
    os.makedirs(out, exist_ok=True)
    experiment._write_csv(
        os.path.join(out, "summary.csv"), experiment.SUMMARY_COLUMNS,
        ((s.method, s.attribute, s.sampling_rate, s.runs_ok, s.failures,
          s.mean_nse, s.std_nse, s.min_nse, s.max_nse) for s in summaries),
    )
    for (method, attribute) in sorted({(s.method, s.attribute) for s in summaries}):
        curve = [(s.sampling_rate, s.mean_nse) for s in summaries
                 if s.method == method and s.attribute == attribute and s.mean_nse is not None]
        experiment._write_csv(os.path.join(out, f"curve_{method}_{attribute}.csv"),
                              ("sampling_rate", "mean_nse"), curve)
    figures = plots.render_report_figures(summaries, out)
    print(f"report written to {out} ({len(figures)} figures)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppcsmaa",
        description="Privacy-preserving compressive-sensing recovery of "
                    "multi-attribute sensor matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a correlated synthetic bundle")
    _add_synth_args(p_synth)
    p_synth.add_argument("--output", default=None, help="bundle output directory")
    p_synth.add_argument("--correlation", action="store_true",
                         help="print the shared-energy correlation ratio")
    p_synth.set_defaults(func=cmd_synth)

    p_ingest = sub.add_parser("ingest", help="build ground truth from packet records")
    p_ingest.add_argument("--input", required=True, help="delimited record file")
    p_ingest.add_argument("--delim", choices=("comma", "tab"), default="comma")
    p_ingest.add_argument("--columns", required=True,
                          help="ordered column names, e.g. id,time,humidity,light")
    p_ingest.add_argument("--attributes", default=None,
                          help="attributes to grid (default: all non-id/time columns)")
    p_ingest.add_argument("--n-min", type=int, default=1)
    p_ingest.add_argument("--t-min", type=int, default=1)
    p_ingest.add_argument("--slot-width", type=int, default=pipeline.DEFAULT_SLOT_WIDTH)
    p_ingest.add_argument("--clean", action=argparse.BooleanOptionalAction, default=True,
                          help="clamp outliers beyond median +- 5*MAD")
    p_ingest.add_argument("--correlation", action="store_true")
    p_ingest.add_argument("--output", default=None)
    p_ingest.set_defaults(func=cmd_ingest)

    p_sweep = sub.add_parser("sweep", help="run the NSE-vs-sampling-rate sweep")
    p_sweep.add_argument("--config", default=None,
                         help="JSON config/manifest; other dataset flags are ignored")
    p_sweep.add_argument("--bundle", default=None, help="bundle directory to recover")
    _add_synth_args(p_sweep)
    p_sweep.add_argument("--methods", default="CS,PPCS,PPCS-MAA")
    p_sweep.add_argument("--rates", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p_sweep.add_argument("--runs", type=int, default=15)
    p_sweep.add_argument("--base-seed", type=int, default=0)
    p_sweep.add_argument("--K", type=int, default=4)
    p_sweep.add_argument("--rank", type=int, default=None,
                         help="factor rank (default: min(n,t)/10)")
    p_sweep.add_argument("--lam", type=float, default=0.1)
    p_sweep.add_argument("--max-iters", type=int, default=200)
    p_sweep.add_argument("--rel-tol", type=float, default=1e-6)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--output", default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="summaries, curves, and figures from raw rows")
    p_report.add_argument("--results", default="results",
                          help="directory containing raw.csv")
    p_report.add_argument("--raw", default=None, help="explicit raw.csv path")
    p_report.add_argument("--output", default=None,
                          help="where to write the report (default: results dir)")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
