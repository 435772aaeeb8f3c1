"""Command-line entry point: ``rwre <experiment> --config path [--seed --threads --out]``."""

import argparse
import os
import sys
from pathlib import Path

from .harness import EXPERIMENTS, format_table, read_records

EXIT_FAIL = 1
EXIT_USAGE = 2


def _parser():
    p = argparse.ArgumentParser(prog="rwre", description="Quenched RWRE experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML experiment config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker threads (outputs do not depend on it)")
    common.add_argument("--out", help="output directory (default: config 'out')")
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    rep = sub.add_parser("report", help="print the pass/fail table of saved results")
    rep.add_argument("--out", default="results", help="directory holding result CSVs")
    rep.add_argument("--config", help="ignored; accepted for uniformity")
    rep.add_argument("--seed", type=int, help="ignored")
    rep.add_argument("--threads", type=int, help="ignored")
    return p


def _report(out):
    out = Path(out)
    files = sorted(p for p in out.glob("*.csv") if p.stem in EXPERIMENTS)
    if not files:
        print(f"no result files in {out}", file=sys.stderr)
        return EXIT_USAGE
    bad = 0
    for f in files:
        print(f"== {f.stem}")
        for r in read_records(f):
            status = r["passed"] or "----"
            bad += status == "FAIL"
            print(f"{status}  {r['statistic']:<34s} {r['value']:<24s} [{r['inputs']}]")
    return EXIT_FAIL if bad else 0


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "report":
        return _report(args.out)
    threads = args.threads
    if threads is not None and threads < 1:
        print("--threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    if threads is not None:
        os.environ["NUMBA_NUM_THREADS"] = str(threads)
    from . import harness
    try:
        cfg = harness.load_config(args.config, seed=args.seed, threads=threads, out=args.out)
    except (FileNotFoundError, ValueError, TypeError) as exc:
        print(f"rwre: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.experiment != args.command:
        print(f"rwre: config is for '{cfg.experiment}', not '{args.command}'", file=sys.stderr)
        return EXIT_USAGE
    import numba
    numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
    result = harness.run(cfg)
    paths = harness.save_result(result, cfg)
    print(format_table(result.records))
    if result.partial:
        print("budget exhausted: results are partial", file=sys.stderr)
    print(f"wrote {', '.join(str(p) for p in paths)}")
    return 0 if result.ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
