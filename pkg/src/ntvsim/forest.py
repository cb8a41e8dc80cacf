"""Bagged decision trees compiled to comparator/LUT form with output-flip injection.

Training is CART with Gini impurity on bootstrap bags, a small random feature
subset per node, and growth until a node is pure or at/below the minimum row
count (no depth limit). Split scores are compared in exact integer arithmetic
(the score ``sum_c n_c^2 / n_side`` summed over both sides) so that candidate
ties resolve deterministically: lowest feature index first, then lowest
threshold.

Compilation quantizes thresholds into the tree's fixed-point format and lays
the internal nodes out in preorder as a comparator array; the boolean function
from comparator bits to the output bit follows the root-to-leaf path, so bits
of comparators off the active path are don't-cares. Classification quantizes
the scaled features per the same format, which makes the compiled form agree
with plain traversal over quantized inputs whenever no error is injected.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ntvsim.dataset import Dataset, FeatureScaling, fit_scaling
from ntvsim.errormodel import ErrorPmfModel, sample_batch
from ntvsim.errors import ParseError, UnsupportedTreeError
from ntvsim.fixedpoint import FixedFormat, quantize, quantize_codes
from ntvsim.voting import (
    VoterWeights,
    error_weights,
    majority_vote_batch,
    weighted_vote_batch,
)

DIVERSE_TOTAL_BITS = (4, 5, 6, 7, 8)
LUT_CAP = 24
VOTER_KINDS = ("majority", "weighted", "error-weighted")


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    label: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 10
    features_per_node: int = 3
    min_samples: int = 2
    precision: str = "Q8.7"
    voter: str = "majority"
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.features_per_node < 1:
            raise ValueError("features_per_node must be >= 1")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if self.voter not in VOTER_KINDS:
            raise ValueError(f"voter must be one of {VOTER_KINDS}")
        if self.precision != "diverse":
            FixedFormat.from_descriptor(self.precision)  # validates

    def tree_format(self, rng: np.random.Generator) -> FixedFormat:
        if self.precision == "diverse":
            total = int(rng.choice(DIVERSE_TOTAL_BITS))
            return FixedFormat(total, total - 1)
        return FixedFormat.from_descriptor(self.precision)


def gini_impurity(labels: np.ndarray) -> float:
    """1 - sum_c (n_c / n)^2 over the label counts."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("cannot compute impurity of an empty node")
    counts = np.bincount(labels.astype(np.int64))
    frac = counts / labels.size
    return float(1.0 - (frac * frac).sum())


def bootstrap(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw-with-replacement bag of size n plus the sorted out-of-bag rows."""
    if n < 1:
        raise ValueError("bootstrap needs at least one row")
    bag = rng.integers(0, n, size=n)
    oob = np.setdiff1d(np.arange(n), bag)
    return bag, oob


def best_split(
    features: np.ndarray, labels: np.ndarray, feature_subset: np.ndarray
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, impurity decrease) over the candidate set of
    midpoints between consecutive distinct values, or None when no split
    strictly improves on the parent. Scores are compared exactly."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if n != features.shape[0]:
        raise ValueError("features and labels disagree on row count")
    subset = np.unique(np.asarray(feature_subset, dtype=np.int64))
    if subset.size == 0 or subset.min() < 0 or subset.max() >= features.shape[1]:
        raise ValueError("feature subset out of range")
    total_one = int(labels.sum())
    total_zero = n - total_one
    parent_ss = total_zero * total_zero + total_one * total_one

    best: tuple[int, int, int, float] | None = None  # (num, den, feature, threshold)
    for f in subset:
        vals = features[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sl = labels[order]
        change = np.flatnonzero(sv[1:] != sv[:-1]) + 1  # prefix sizes at value boundaries
        if change.size == 0:
            continue
        cum_one = np.cumsum(sl)
        n_left = change
        one_left = cum_one[change - 1]
        zero_left = n_left - one_left
        one_right = total_one - one_left
        zero_right = total_zero - zero_left
        n_right = n - n_left
        ss_left = zero_left * zero_left + one_left * one_left
        ss_right = zero_right * zero_right + one_right * one_right
        num = ss_left * n_right + ss_right * n_left
        den = n_left * n_right
        # float both: the integers are < 2^53, so the ratio is correctly
        # rounded and near-ties get re-checked exactly below.
        score = num / den
        top = score.max()
        near = np.flatnonzero(score >= top * (1.0 - 1e-12))
        for k in near:
            cand = (int(num[k]), int(den[k]), int(f), float((sv[change[k] - 1] + sv[change[k]]) / 2.0))
            if best is None or _beats(cand, best):
                best = cand
    if best is None:
        return None
    num_b, den_b, f_b, t_b = best
    # strict improvement over the parent score sum_c c^2 / n
    if num_b * n <= parent_ss * den_b:
        return None
    decrease = (num_b / den_b - parent_ss / n) / n
    return f_b, t_b, float(decrease)


def _beats(cand: tuple[int, int, int, float], best: tuple[int, int, int, float]) -> bool:
    # exact fraction comparison, then lowest feature index, then lowest threshold
    lhs = cand[0] * best[1]
    rhs = best[0] * cand[1]
    if lhs != rhs:
        return lhs > rhs
    if cand[2] != best[2]:
        return cand[2] < best[2]
    return cand[3] < best[3]


def _majority_label(labels: np.ndarray) -> int:
    ones = int(labels.sum())
    return int(ones * 2 > labels.size)  # tie -> 0


def train_tree(
    features: np.ndarray,
    labels: np.ndarray,
    cfg: ForestConfig,
    rng: np.random.Generator,
) -> TreeNode:
    """Grow a CART tree on (already scaled) features. Nodes draw
    ``features_per_node`` distinct candidate features; growth stops when a node
    is pure or holds at most ``min_samples`` rows or no split improves."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("training features must be a non-empty (n, m) array")
    if labels.shape != (features.shape[0],):
        raise ValueError("labels length must match feature rows")
    m = features.shape[1]
    k = min(cfg.features_per_node, m)

    def grow(idx: np.ndarray) -> TreeNode:
        ys = labels[idx]
        if ys.size <= cfg.min_samples or (ys == ys[0]).all():
            return TreeNode(label=_majority_label(ys))
        subset = np.sort(rng.choice(m, size=k, replace=False))
        found = best_split(features[idx], ys, subset)
        if found is None:
            return TreeNode(label=_majority_label(ys))
        f, t, _ = found
        go_right = features[idx, f] >= t
        left_idx = idx[~go_right]
        right_idx = idx[go_right]
        if left_idx.size == 0 or right_idx.size == 0:
            return TreeNode(label=_majority_label(ys))
        return TreeNode(
            feature=f,
            threshold=t,
            left=grow(left_idx),
            right=grow(right_idx),
        )

    return grow(np.arange(features.shape[0]))


@dataclass
class CompiledTree:
    """Preorder comparator array plus the path-semantics boolean function."""

    fmt: FixedFormat
    scaling: FeatureScaling
    comp_feature: np.ndarray
    comp_code: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_label: int  # used when there are no comparators at all
    source: TreeNode | None = field(default=None, repr=False, compare=False)

    @property
    def n_comparators(self) -> int:
        return int(self.comp_feature.size)

    def eval_bits(self, bits: np.ndarray) -> int:
        """Output bit for a full comparator bit vector; off-path bits are ignored."""
        bits = np.asarray(bits)
        if bits.shape != (self.n_comparators,):
            raise ValueError(
                f"expected {self.n_comparators} comparator bits, got {bits.shape}"
            )
        if self.n_comparators == 0:
            return int(self.leaf_label)
        node = 0
        while True:
            nxt = int(self.right[node] if bits[node] else self.left[node])
            if nxt < 0:
                return -nxt - 1
            node = nxt

    def comparator_bits(self, x: np.ndarray) -> np.ndarray:
        """Comparator outputs for one raw feature vector (scaled + quantized)."""
        x = np.asarray(x, dtype=np.float64)
        codes = quantize_codes(self.scaling.transform(x[np.newaxis, :])[0], self.fmt)
        if self.n_comparators == 0:
            return np.zeros(0, dtype=np.uint8)
        return (codes[self.comp_feature] >= self.comp_code).astype(np.uint8)

    def materialize_lut(self, lut_cap: int = LUT_CAP) -> np.ndarray:
        """Dense 2**K output table with don't-cares completed by path semantics.
        Trees above the cap stay in functional form."""
        k = self.n_comparators
        if k > lut_cap:
            raise UnsupportedTreeError(
                f"tree has {k} comparators, above the LUT cap of {lut_cap}"
            )
        if k == 0:
            return np.array([self.leaf_label], dtype=np.uint8)
        idx = np.arange(1 << k, dtype=np.int64)
        out = np.empty(1 << k, dtype=np.uint8)
        cur = np.zeros(1 << k, dtype=np.int64)
        active = np.ones(1 << k, dtype=bool)
        while active.any():
            rows = np.flatnonzero(active)
            node = cur[rows]
            bit = (idx[rows] >> node) & 1
            nxt = np.where(bit == 1, self.right[node], self.left[node])
            leaf = nxt < 0
            hit = rows[leaf]
            out[hit] = (-nxt[leaf] - 1).astype(np.uint8)
            active[hit] = False
            cur[rows[~leaf]] = nxt[~leaf]
        return out


def compile_tree(tree: TreeNode, fmt: FixedFormat, scaling: FeatureScaling) -> CompiledTree:
    """Quantize thresholds into ``fmt`` and lay internal nodes out in preorder."""
    comp_feature: list[int] = []
    comp_code: list[int] = []
    left: list[int] = []
    right: list[int] = []

    def walk(node: TreeNode) -> int:
        if node.is_leaf:
            return -(node.label + 1)
        me = len(comp_feature)
        comp_feature.append(node.feature)
        comp_code.append(quantize(node.threshold, fmt).code)
        left.append(0)
        right.append(0)
        left[me] = walk(node.left)
        right[me] = walk(node.right)
        return me

    if tree.is_leaf:
        return CompiledTree(
            fmt,
            scaling,
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            leaf_label=tree.label,
            source=tree,
        )
    walk(tree)
    return CompiledTree(
        fmt,
        scaling,
        np.asarray(comp_feature, dtype=np.int64),
        np.asarray(comp_code, dtype=np.int64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        leaf_label=-1,
        source=tree,
    )


def classify_tree(
    ct: CompiledTree,
    x: np.ndarray,
    tree_error: ErrorPmfModel | None = None,
    comparator_error: ErrorPmfModel | None = None,
    rng: np.random.Generator | None = None,
) -> int:
    """One classification: comparators, optional comparator-bit injection, the
    boolean function, then optional output-bit injection."""
    bits = ct.comparator_bits(x)
    if comparator_error is not None:
        if comparator_error.width != ct.n_comparators:
            raise ValueError(
                f"comparator error width {comparator_error.width} != {ct.n_comparators}"
            )
        bits = bits ^ sample_batch(comparator_error, 1, _req_rng(rng))[0]
    y = ct.eval_bits(bits)
    if tree_error is not None:
        if tree_error.width != 1:
            raise ValueError(f"tree output error width must be 1, got {tree_error.width}")
        y ^= int(sample_batch(tree_error, 1, _req_rng(rng))[0, 0])
    return int(y)


def _req_rng(rng: np.random.Generator | None) -> np.random.Generator:
    if rng is None:
        raise ValueError("an rng is required when injecting errors")
    return rng


def classify_tree_batch(
    ct: CompiledTree,
    features: np.ndarray,
    tree_error: ErrorPmfModel | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Vectorized error-free traversal plus optional output-bit injection."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if ct.n_comparators == 0:
        out = np.full(n, ct.leaf_label, dtype=np.uint8)
    else:
        codes = quantize_codes(ct.scaling.transform(features), ct.fmt)
        bits = (codes[:, ct.comp_feature] >= ct.comp_code[np.newaxis, :]).astype(np.uint8)
        out = np.empty(n, dtype=np.uint8)
        cur = np.zeros(n, dtype=np.int64)
        active = np.ones(n, dtype=bool)
        while active.any():
            rows = np.flatnonzero(active)
            node = cur[rows]
            b = bits[rows, node]
            nxt = np.where(b == 1, ct.right[node], ct.left[node])
            leaf = nxt < 0
            hit = rows[leaf]
            out[hit] = (-nxt[leaf] - 1).astype(np.uint8)
            active[hit] = False
            cur[rows[~leaf]] = nxt[~leaf]
    if tree_error is not None:
        if tree_error.width != 1:
            raise ValueError(f"tree output error width must be 1, got {tree_error.width}")
        out = out ^ sample_batch(tree_error, n, _req_rng(rng))[:, 0]
    return out


@dataclass
class ForestModel:
    trees: list[CompiledTree]
    bags: list[np.ndarray]
    oobs: list[np.ndarray]
    oob_accuracy: np.ndarray
    oob_fallback: np.ndarray
    error_rate: np.ndarray
    voter_kind: str
    scaling: FeatureScaling
    config: ForestConfig

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def with_error_rates(self, rates: np.ndarray) -> "ForestModel":
        rates = np.asarray(rates, dtype=np.float64)
        if rates.shape != (self.n_trees,):
            raise ValueError("error-rate vector length must match the ensemble")
        if np.any((rates < 0) | (rates > 1)):
            raise ValueError("error rates must lie in [0, 1]")
        return ForestModel(
            self.trees,
            self.bags,
            self.oobs,
            self.oob_accuracy,
            self.oob_fallback,
            rates,
            self.voter_kind,
            self.scaling,
            self.config,
        )

    def with_voter(self, kind: str) -> "ForestModel":
        """Same trees and statistics under a different voter."""
        if kind not in VOTER_KINDS:
            raise ValueError(f"voter must be one of {VOTER_KINDS}, got {kind!r}")
        return dataclasses.replace(self, voter_kind=kind)

    def voter_weights(self) -> VoterWeights | None:
        if self.voter_kind == "majority":
            return None
        if self.voter_kind == "weighted":
            return VoterWeights(self.oob_accuracy)
        return error_weights(self.oob_accuracy, self.error_rate)


def train_forest(
    ds: Dataset, cfg: ForestConfig, rng: np.random.Generator | None = None
) -> ForestModel:
    """Bag, grow, and compile ``cfg.n_trees`` trees.

    Each tree consumes two private streams seeded up front, one for
    bagging/growth and one for the precision draw, so uniform- and
    diverse-precision runs from the same incoming rng grow identical trees.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    scaling = ds.scaling if ds.scaling is not None else fit_scaling(ds.features)
    scaled = scaling.transform(ds.features)
    labels = ds.labels.astype(np.int64)
    n = ds.n_rows
    seeds = rng.integers(0, 2**63, size=(cfg.n_trees, 2))

    trees: list[CompiledTree] = []
    bags: list[np.ndarray] = []
    oobs: list[np.ndarray] = []
    oob_acc = np.empty(cfg.n_trees)
    fallback = np.zeros(cfg.n_trees, dtype=bool)
    for l in range(cfg.n_trees):
        grow_rng = np.random.default_rng(seeds[l, 0])
        bag, oob = bootstrap(n, grow_rng)
        tree = train_tree(scaled[bag], labels[bag], cfg, grow_rng)
        fmt = cfg.tree_format(np.random.default_rng(seeds[l, 1]))
        ct = compile_tree(tree, fmt, scaling)
        trees.append(ct)
        bags.append(bag)
        oobs.append(oob)
        eval_rows = oob
        if oob.size == 0:
            warnings.warn(
                f"tree {l} has no out-of-bag rows; falling back to in-bag accuracy",
                UserWarning,
                stacklevel=2,
            )
            fallback[l] = True
            eval_rows = np.unique(bag)
        pred = classify_tree_batch(ct, ds.features[eval_rows])
        oob_acc[l] = float((pred == ds.labels[eval_rows]).mean())
    return ForestModel(
        trees,
        bags,
        oobs,
        oob_acc,
        fallback,
        np.zeros(cfg.n_trees),
        cfg.voter,
        scaling,
        cfg,
    )


def estimate_oob(model: ForestModel, ds: Dataset) -> np.ndarray:
    """Recompute per-tree held-out accuracy from the stored bags."""
    out = np.empty(model.n_trees)
    for l, ct in enumerate(model.trees):
        rows = model.oobs[l]
        if rows.size == 0:
            rows = np.unique(model.bags[l])
        pred = classify_tree_batch(ct, ds.features[rows])
        out[l] = float((pred == ds.labels[rows]).mean())
    return out


def tree_votes_batch(
    model: ForestModel,
    features: np.ndarray,
    tree_errors: list[ErrorPmfModel | None] | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-tree output bits as an (n_trees, n_rows) matrix, before any voter."""
    if tree_errors is not None and len(tree_errors) != model.n_trees:
        raise ValueError("tree_errors length must match the ensemble")
    n = np.asarray(features).shape[0]
    votes = np.empty((model.n_trees, n), dtype=np.uint8)
    for l, ct in enumerate(model.trees):
        err = None if tree_errors is None else tree_errors[l]
        votes[l] = classify_tree_batch(ct, features, err, rng)
    return votes


def classify_forest_batch(
    model: ForestModel,
    features: np.ndarray,
    tree_errors: list[ErrorPmfModel | None] | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Ensemble predictions for a feature matrix under the model's voter."""
    votes = tree_votes_batch(model, features, tree_errors, rng)
    weights = model.voter_weights()
    if weights is None:
        return majority_vote_batch(votes)
    return weighted_vote_batch(votes, weights)


def classify_forest(
    model: ForestModel,
    x: np.ndarray,
    tree_errors: list[ErrorPmfModel | None] | None = None,
    rng: np.random.Generator | None = None,
) -> int:
    return int(classify_forest_batch(model, np.asarray(x)[np.newaxis, :], tree_errors, rng)[0])


# --- serialization ----------------------------------------------------------

def _node_to_json(node: TreeNode, fmt: FixedFormat) -> dict:
    if node.is_leaf:
        return {"label": node.label}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "threshold_code": quantize(node.threshold, fmt).code,
        "left": _node_to_json(node.left, fmt),
        "right": _node_to_json(node.right, fmt),
    }


def _node_from_json(doc: dict) -> TreeNode:
    if "label" in doc:
        return TreeNode(label=int(doc["label"]))
    return TreeNode(
        feature=int(doc["feature"]),
        threshold=float(doc["threshold"]),
        left=_node_from_json(doc["left"]),
        right=_node_from_json(doc["right"]),
    )


def config_to_json(cfg: ForestConfig) -> dict:
    return {
        "n_trees": cfg.n_trees,
        "features_per_node": cfg.features_per_node,
        "min_samples": cfg.min_samples,
        "precision": cfg.precision,
        "voter": cfg.voter,
        "seed": cfg.seed,
    }


def config_from_json(doc: dict) -> ForestConfig:
    known = {f for f in ForestConfig.__dataclass_fields__}
    extra = set(doc) - known
    if extra:
        raise ParseError(f"unknown forest config fields: {sorted(extra)}")
    return ForestConfig(**doc)


def forest_to_json(model: ForestModel) -> dict:
    return {
        "kind": "forest",
        "voter": model.voter_kind,
        "scaling": {"lo": model.scaling.lo.tolist(), "hi": model.scaling.hi.tolist()},
        "config": config_to_json(model.config),
        "trees": [
            {
                "format": ct.fmt.descriptor,
                "oob_accuracy": float(model.oob_accuracy[l]),
                "oob_fallback": bool(model.oob_fallback[l]),
                "error_rate": float(model.error_rate[l]),
                "bag": model.bags[l].tolist(),
                "oob": model.oobs[l].tolist(),
                "root": _node_to_json(ct.source, ct.fmt),
            }
            for l, ct in enumerate(model.trees)
        ],
    }


def forest_from_json(doc: dict) -> ForestModel:
    try:
        if doc.get("kind") != "forest":
            raise ParseError(f"not a forest document (kind={doc.get('kind')!r})")
        voter = doc["voter"]
        if voter not in VOTER_KINDS:
            raise ParseError(f"unknown voter kind {voter!r}")
        scaling = FeatureScaling(
            np.asarray(doc["scaling"]["lo"], dtype=np.float64),
            np.asarray(doc["scaling"]["hi"], dtype=np.float64),
        )
        cfg = config_from_json(doc["config"])
        trees: list[CompiledTree] = []
        bags: list[np.ndarray] = []
        oobs: list[np.ndarray] = []
        oob_acc = []
        fallback = []
        rates = []
        for entry in doc["trees"]:
            fmt = FixedFormat.from_descriptor(entry["format"])
            root = _node_from_json(entry["root"])
            trees.append(compile_tree(root, fmt, scaling))
            bags.append(np.asarray(entry["bag"], dtype=np.int64))
            oobs.append(np.asarray(entry["oob"], dtype=np.int64))
            oob_acc.append(float(entry["oob_accuracy"]))
            fallback.append(bool(entry.get("oob_fallback", False)))
            rates.append(float(entry.get("error_rate", 0.0)))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad forest document: {exc}") from exc
    return ForestModel(
        trees,
        bags,
        oobs,
        np.asarray(oob_acc),
        np.asarray(fallback, dtype=bool),
        np.asarray(rates),
        voter,
        scaling,
        cfg,
    )


def save_forest(model: ForestModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(forest_to_json(model), fh)
        fh.write("\n")


def load_forest(path) -> ForestModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    return forest_from_json(doc)
