"""Command-line entry point.

Subcommands:
    run       -- execute a scenario; writes journal, registry dump,
                 metric CSVs and a summary into --out-dir
    analyze   -- recompute the metric CSVs from a journal / registry dump
    ensemble  -- difference-quotient pipeline over an ensemble file
    validate  -- parse and validate a scenario file
"""

import argparse
import os
import sys

from . import journal as jr
from . import reports
from .master import parse_registry_dump
from .observables import b4_difference_quotient, extrapolate_mu2, read_ensemble
from .scenario import ConfigError, load_scenario
from .simulate import Simulation


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="\n")


def _write_metrics(out_dir, events, registry_rows, granularity, k_rand, region):
    series = jr.hourly_series(events, granularity=granularity)
    with _open_out(os.path.join(out_dir, "hourly.csv")) as fh:
        reports.write_hourly_csv(series, fh)
    with _open_out(os.path.join(out_dir, "fscale.csv")) as fh:
        reports.write_fscale_csv(series, fh, granularity=granularity)
    with _open_out(os.path.join(out_dir, "percentiles.csv")) as fh:
        reports.write_percentiles_csv(events, fh)
    if registry_rows is not None:
        with _open_out(os.path.join(out_dir, "useful.csv")) as fh:
            reports.write_useful_csv(registry_rows, k_rand, fh)
        with _open_out(os.path.join(out_dir, "maturity.csv")) as fh:
            reports.write_maturity_csv(registry_rows, fh, region=region)


def cmd_run(args):
    try:
        scenario = load_scenario(args.config)
    except ConfigError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    if args.seed_override is not None:
        scenario.root_seed = args.seed_override
    os.makedirs(args.out_dir, exist_ok=True)
    journal_path = os.path.join(args.out_dir, "journal.tsv")
    produced = [journal_path]
    try:
        with _open_out(journal_path) as fh:
            sim = Simulation(scenario, fh)
            stats = sim.run()
        registry_path = os.path.join(args.out_dir, "registry.tsv")
        produced.append(registry_path)
        with _open_out(registry_path) as fh:
            sim.registry.dump(fh)
        with open(journal_path, "r", encoding="utf-8") as fh:
            events = jr.parse_journal(fh)
        with open(registry_path, "r", encoding="utf-8") as fh:
            registry_rows = parse_registry_dump(fh)
        region = None
        if scenario.policy.kind == "sensitive_region":
            region = (scenario.policy.beta_lo, scenario.policy.beta_hi)
        _write_metrics(
            args.out_dir,
            events,
            registry_rows,
            scenario.granularity,
            scenario.k_rand,
            region,
        )
        with _open_out(os.path.join(args.out_dir, "summary.txt")) as fh:
            reports.write_summary(stats, scenario, fh)
    except Exception:
        for path in produced:
            if os.path.exists(path):
                os.remove(path)
        raise
    print(
        f"iterations={stats.total_iterations} uploads={stats.uploads} "
        f"peak_workers={stats.peak_running} cpu_years={stats.cpu_years:.2f} "
        f"transfer_tb={stats.transfer_tb:.3f}"
    )
    return 0


def cmd_analyze(args):
    if args.useful and args.registry is None:
        print("--useful requires --registry", file=sys.stderr)
        return 2
    try:
        with open(args.journal, "r", encoding="utf-8") as fh:
            events = jr.parse_journal(fh)
    except (OSError, ValueError) as exc:
        print(f"cannot read journal: {exc}", file=sys.stderr)
        return 2
    registry_rows = None
    if args.registry is not None:
        try:
            with open(args.registry, "r", encoding="utf-8") as fh:
                registry_rows = parse_registry_dump(fh)
        except (OSError, ValueError) as exc:
            print(f"cannot read registry: {exc}", file=sys.stderr)
            return 2
    os.makedirs(args.out_dir, exist_ok=True)
    region = None
    if args.region is not None:
        lo, hi = (float(x) for x in args.region.split(":"))
        region = (lo, hi)
    _write_metrics(args.out_dir, events, registry_rows, args.granularity, args.k_rand, region)
    return 0


def cmd_ensemble(args):
    try:
        with open(args.ensemble, "r", encoding="utf-8") as fh:
            ensemble = read_ensemble(fh)
    except (OSError, ValueError) as exc:
        print(f"cannot read ensemble: {exc}", file=sys.stderr)
        return 2
    quotients = b4_difference_quotient(ensemble, block_size=args.block_size)
    os.makedirs(args.out_dir, exist_ok=True)
    with _open_out(os.path.join(args.out_dir, "quotients.csv")) as fh:
        reports.write_quotients_csv(quotients, fh)
    fit_points = [(t, v, e) for t, v, e in quotients if e > 0]
    with _open_out(os.path.join(args.out_dir, "fit_summary.txt")) as fh:
        if len(fit_points) >= 2:
            linear_fit, const_fit = extrapolate_mu2(fit_points)
            reports.write_fit_summary(linear_fit, const_fit, fh)
        else:
            fh.write("fit skipped: fewer than 2 points with positive errors\n")
    return 0


def cmd_validate(args):
    try:
        load_scenario(args.config)
    except ConfigError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    print("ok")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="farmsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario deterministically")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed-override", type=int, default=None)
    p_run.add_argument("--out-dir", required=True)
    p_run.add_argument("--format", choices=["csv"], default="csv")
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analyze", help="metrics from a journal/registry")
    p_an.add_argument("--journal", required=True)
    p_an.add_argument("--registry", default=None)
    p_an.add_argument("--out-dir", required=True)
    p_an.add_argument("--granularity", type=int, default=3)
    p_an.add_argument("--k-rand", type=int, default=400)
    p_an.add_argument("--region", default=None, help="beta_lo:beta_hi")
    p_an.add_argument("--useful", action="store_true")
    p_an.add_argument("--format", choices=["csv"], default="csv")
    p_an.set_defaults(func=cmd_analyze)

    p_en = sub.add_parser("ensemble", help="difference-quotient analysis")
    p_en.add_argument("--ensemble", required=True)
    p_en.add_argument("--out-dir", required=True)
    p_en.add_argument("--block-size", type=int, default=50)
    p_en.add_argument("--format", choices=["csv"], default="csv")
    p_en.set_defaults(func=cmd_ensemble)

    p_val = sub.add_parser("validate", help="validate a scenario file")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
