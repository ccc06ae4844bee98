"""Iteration speedup of the sample-average variance for each worker count."""
from _common import run


def report(summary):
    sp = summary["speedup"]
    print(f"  target variance {sp.target:.4g}")
    for w, lbar, s in zip(sp.worker_counts, sp.iterations_to_precision, sp.iteration_speedup):
        print(f"  W={w:>2}  L-bar to target={lbar:8.1f}  speedup={s:.2f}  (ideal {w})")


if __name__ == "__main__":
    run("variance-speedup", "variance_speedup.ini", report)
