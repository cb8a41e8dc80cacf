"""Regenerate data/wdbc.csv from scikit-learn's bundled copy of the dataset.

The committed CSV is a snapshot in the canonical no-header layout
(id, M/B diagnosis, 30 features); this script only needs to run when
refreshing that snapshot, so sklearn is not a package dependency.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_breast_cancer


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/wdbc.csv")
    bunch = load_breast_cancer()
    # sklearn encodes 0 = malignant, 1 = benign
    diagnosis = np.where(bunch.target == 0, "M", "B")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n") as fh:
        for i, (diag, row) in enumerate(zip(diagnosis, bunch.data)):
            cells = [str(900000 + i), diag] + [repr(float(v)) for v in row]
            fh.write(",".join(cells) + "\n")
    n_pos = int((diagnosis == "M").sum())
    print(f"wrote {out}: {len(diagnosis)} rows, {bunch.data.shape[1]} features, {n_pos} malignant")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
