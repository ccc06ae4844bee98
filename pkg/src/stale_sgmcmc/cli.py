"""Command-line entry point: ``stale-sgmcmc <experiment> --config FILE --out FILE``."""
import argparse
import logging
import sys

from .config import EXPERIMENTS, parse_config, validate
from .errors import StaleSGError
from .experiments import run_experiment

log = logging.getLogger("stale_sgmcmc")


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="stale-sgmcmc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="INI config file (defaults are used for missing keys)")
        p.add_argument("--out", required=True, help="CSV output path")
        p.add_argument("--seed", type=int, help="base seed; replicate r uses seed + r")
        p.add_argument("--replicates", type=int)
        p.add_argument("--taus", type=_ints, help="staleness list, e.g. 1,2,5")
        p.add_argument("--workers", type=_ints, help="worker counts, e.g. 1,2,4,8")
        p.add_argument("--servers", type=_ints, help="server counts, e.g. 1,2,4")
        p.add_argument("--step-size", type=float)
        p.add_argument("--iterations", type=int, help="L, or the per-worker budget L-bar")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for replicates")
        if name == "blr":
            p.add_argument("--train", help="LIBSVM training file (default: bundled desk-scale data)")
            p.add_argument("--test", help="LIBSVM test file")
            p.add_argument("--full", action="store_true", help="use every item instead of the desk-scale subsample")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        cfg = parse_config(args.config) if args.config else validate({"kind": args.command})
        if cfg.kind != args.command:
            raise StaleSGError(f"config describes {cfg.kind!r}, not {args.command!r}")
        overrides = dict(base_seed=args.seed, replicates=args.replicates, taus=args.taus, workers=args.workers,
                         servers=args.servers, step_size=args.step_size, iterations=args.iterations)
        if args.command == "blr":
            overrides.update(train_path=args.train, test_path=args.test, subset=0 if args.full else None)
        cfg = cfg.replace(**overrides)
        result = run_experiment(cfg, out=args.out, jobs=args.jobs)
    except StaleSGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    log.info("wrote %d rows to %s", len(result.rows), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
