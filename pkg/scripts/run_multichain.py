"""Variance of the time-weighted multi-chain aggregate against the server count."""
from _common import run


def report(summary):
    for s, r in summary["ratio"].items():
        print(f"  S={s}  variance={summary['variance'][s]:.4g}  ratio={r:.3f}  (ideal {1 / s:.3f})")


if __name__ == "__main__":
    run("multichain", "multichain.ini", report)
