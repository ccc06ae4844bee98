import argparse
import time
from pathlib import Path

from stale_sgmcmc.config import parse_config
from stale_sgmcmc.experiments import run_experiment

ROOT = Path(__file__).resolve().parent.parent


def run(kind, default_config, report):
    ap = argparse.ArgumentParser(description=f"Run the {kind} experiment and print a short summary.")
    ap.add_argument("--config", default=str(ROOT / "configs" / default_config))
    ap.add_argument("--out", default=str(ROOT / "results" / f"{kind}.csv"))
    ap.add_argument("--replicates", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = parse_config(args.config).replace(replicates=args.replicates, base_seed=args.seed)
    start = time.perf_counter()
    result = run_experiment(cfg, out=args.out, jobs=args.jobs)
    print(f"{kind}: {len(result.rows)} rows -> {args.out} ({time.perf_counter() - start:.1f} s)")
    report(result.summary)
