"""Train both classifier families on the bundled dataset and compare the
fixed-point pipelines against their floating-point references, error free."""

import argparse

import numpy as np

from ntvsim.dataset import load_wdbc, split
from ntvsim.forest import ForestConfig, classify_forest_batch, train_forest
from ntvsim.svm import (
    SvmConfig,
    classify_direct,
    classify_fixed_batch,
    margin_direct,
    margin_reformulated,
    train_svm,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", default="data/wdbc.csv")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    ds = load_wdbc(args.data)
    print(f"{ds.n_rows} rows, {ds.n_features} features, "
          f"{int(ds.labels.sum())} positive labels")
    train_ds, test_ds = split(ds, 0.5, np.random.default_rng(args.seed))
    feats, labels = test_ds.features, test_ds.labels

    svm = train_svm(train_ds, SvmConfig(), np.random.default_rng(args.seed + 1))
    print(f"\nsvm: {svm.support.shape[0]} support vectors, "
          f"{svm.mac_count} MACs per classification")
    fmts = svm.formats
    print(f"formats: input {fmts.input_fmt}, coefficients {fmts.coef_fmt}, "
          f"stage words {fmts.stage1_fmt}, accumulator {fmts.acc_fmt}")
    x = feats[0]
    print(f"margin on one row: kernel sum {margin_direct(svm, x):+.6f}, "
          f"folded quadratic form {margin_reformulated(svm, x):+.6f}")
    float_acc = (np.array([classify_direct(svm, row) for row in feats]) == labels).mean()
    fixed_acc = (classify_fixed_batch(svm, feats) == labels).mean()
    print(f"accuracy: float {float_acc:.4f}, fixed {fixed_acc:.4f}")

    forest = train_forest(
        train_ds, ForestConfig(n_trees=10), np.random.default_rng(args.seed + 2)
    )
    print(f"\nforest: {forest.n_trees} trees at Q8.7, "
          f"mean oob accuracy {forest.oob_accuracy.mean():.4f}")
    rf_acc = (classify_forest_batch(forest, feats) == labels).mean()
    print(f"majority-vote accuracy: {rf_acc:.4f}")
    for kind in ("weighted", "error-weighted"):
        acc = (classify_forest_batch(forest.with_voter(kind), feats) == labels).mean()
        print(f"{kind} voter accuracy:  {acc:.4f}")


if __name__ == "__main__":
    main()
