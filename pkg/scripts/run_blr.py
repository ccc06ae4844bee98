"""Held-out logistic loss of Bayesian logistic regression for each worker count."""
from _common import run


def report(summary):
    print(f"  {summary['train_items']} train / {summary['test_items']} test items, "
          f"loss at theta=0: {summary['initial_loss']:.2f}")
    for w, loss in summary["final_loss"].items():
        print(f"  W={w}  final loss={loss:.2f}  variance of loss average={summary['final_variance'][w]:.4g}")


if __name__ == "__main__":
    run("blr", "blr.ini", report)
