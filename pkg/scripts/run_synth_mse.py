"""End-point MSE for each staleness when L = l0 * tau."""
from _common import run


def report(summary):
    base = summary["endpoint_mse"][min(summary["endpoint_mse"])]
    for tau, mse in summary["endpoint_mse"].items():
        print(f"  tau={tau:>3}  mse={mse:.4g}  ratio to first={mse / base:.2f}")


if __name__ == "__main__":
    run("synth-mse", "synth_mse.ini", report)
