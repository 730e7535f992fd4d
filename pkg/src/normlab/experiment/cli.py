"""Command-line entry point: ``normlab train | sweep | export-plots | verify``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import NonFiniteError, NormlabError
from .config import build_config
from .plots import emit_plot_data
from .sweep import GRIDS, resolve_grid, run_sweep
from .train import run_experiment

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML experiment file")
    parser.add_argument("--seed", type=int, action="append",
                        help="seed to run (repeatable); default: the config's seed list")
    parser.add_argument("--attack", help="constant:N_a,N_b or mix:<mnist|fashion>,k=<int>")
    parser.add_argument("--norm", help="normalization kind: bn, in, iebn, bn_plus_se")
    parser.add_argument("--data-dir", help="directory holding the dataset files")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--epochs", type=int, help="number of training epochs")
    parser.add_argument("--set", dest="assignments", action="append", default=[],
                        metavar="KEY=VALUE", help="override any config field, e.g. norm.position=both")


def _load(args):
    overrides = {}
    if args.attack is not None:
        overrides["attack"] = args.attack
    if args.norm is not None:
        overrides["norm.kind"] = args.norm
    if args.data_dir is not None:
        overrides["data.data_dir"] = args.data_dir
    if args.out is not None:
        overrides["out"] = args.out
    if args.epochs is not None:
        overrides["schedule.epochs"] = args.epochs
    if args.seed:
        overrides["seeds"] = list(args.seed)
    # explicit --set flags win over the convenience flags
    return build_config(args.config, overrides, args.assignments)


def cmd_train(args) -> int:
    config = _load(args)
    for seed in config.seeds:
        result = run_experiment(config, seed)
        print(result.summary["summary"])
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load(args)
    grid = resolve_grid(args.grid)
    results = run_sweep(config, grid)
    print(f"{'cell':40s} {'mean':>8s} {'std':>8s} status")
    for r in results:
        row = r.row()
        print(f"{r.cell:40s} {float(row['mean_test_acc']):8.2f} {float(row['std_test_acc']):8.2f} "
              f"{r.status}")
    print(f"summary: {Path(config.out) / 'sweep_summary.csv'}")
    return EXIT_OK if all(r.status == "completed" for r in results) else EXIT_FAILED


def cmd_export_plots(args) -> int:
    rows = emit_plot_data(args.csv, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from ..oracles import reports_to_csv, run_all

    reports = run_all(quick=args.quick)
    text = reports_to_csv(reports)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    failed = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed", file=sys.stderr)
    for r in failed:
        print(f"FAIL {r.check} ({r.fingerprint}): {r.discrepancy:.3e} > {r.tolerance:.0e} "
              f"{r.message}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every epoch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model per seed")
    _config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run an ablation grid")
    _config_flags(p)
    p.add_argument("--grid", action="append", required=True, choices=sorted(GRIDS),
                   help="grid name (repeatable)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-plots", help="merge metrics CSVs into long format")
    p.add_argument("csv", nargs="+", help="metrics.csv files")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_export_plots)

    p = sub.add_parser("verify", help="run oracle, gradcheck and identity suites")
    p.add_argument("--quick", action="store_true", help="smaller seeded grids")
    p.add_argument("--out", help="write the report CSV here instead of stdout")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NonFiniteError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except NormlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
