"""Generate the bundled desk-scale BLR data in a9a's layout.

a9a itself is not shipped with the package, so the bundled files mimic its
shape: 123 binary features formed by one-hot encoding 14 categorical
attributes (exactly 14 active features per row), +1/-1 labels with about a
third positive.  Labels follow a logistic model with a fixed random
weight vector.  Output is deterministic.

    python scripts/make_desk_data.py [--train 2000] [--test 1000] [--seed 2016]
"""
import argparse

import numpy as np
from scipy import sparse

from stale_sgmcmc.models import A9A_N_FEATURES, Dataset, bundled_blr_paths, write_libsvm

GROUP_SIZES = [5, 8, 5, 16, 7, 7, 14, 6, 5, 2, 3, 3, 3, 39]
assert sum(GROUP_SIZES) == A9A_N_FEATURES


def make(n_train, n_test, seed):
    rng = np.random.default_rng(seed)
    probs = [rng.dirichlet(np.full(k, 0.8)) for k in GROUP_SIZES]
    weights = rng.normal(0.0, 1.0, A9A_N_FEATURES)
    bias = -1.6

    def draw(n):
        cols = []
        offset = 0
        for k, p in zip(GROUP_SIZES, probs):
            cols.append(offset + rng.choice(k, size=n, p=p))
            offset += k
        cols = np.stack(cols, axis=1)
        rows = np.repeat(np.arange(n), len(GROUP_SIZES))
        x = sparse.csr_matrix((np.ones(cols.size), (rows, cols.ravel())), shape=(n, A9A_N_FEATURES))
        logits = x @ weights + bias
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int8)
        return Dataset(x, y, A9A_N_FEATURES)

    return draw(n_train), draw(n_test)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2016)
    args = ap.parse_args()
    train, test = make(args.train, args.test, args.seed)
    train_path, test_path = bundled_blr_paths()
    write_libsvm(train, train_path)
    write_libsvm(test, test_path)
    print(f"wrote {train.n_items} items to {train_path}, positives {train.y.mean():.2f}")
    print(f"wrote {test.n_items} items to {test_path}, positives {test.y.mean():.2f}")


if __name__ == "__main__":
    main()
