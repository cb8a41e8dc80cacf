"""Empirical noise/bias/variance decomposition and the ensemble variance law.

The squared-error decomposition of a binary predictor at fixed test points
splits E[(C - Y)^2] into label variance (noise), squared bias, and predictor
variance, where the expectation runs over the label draw C, the training
resample, and the injected-error draw. Predictor outputs are treated as real
numbers in [0, 1] (a tree's bit, or an ensemble's unthresholded average), so
the identity holds exactly in expectation.

Estimates use every draw; standard errors come from splitting the draws into
batches and treating the per-batch estimates as replicates. The direct
estimate of the generalized error pairs predictions with fresh label draws,
independent of the draws behind the component estimates, which keeps the
identity check honest: both sides are unbiased for the same quantity at any
draw count, so their gap is pure Monte Carlo noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ntvsim.dataset import Dataset
from ntvsim.errormodel import ErrorPmfModel
from ntvsim.forest import ForestConfig, ForestModel, train_forest, tree_votes_batch

PredictFn = Callable[[int, int, np.random.Generator], np.ndarray]
TreeErrorFactory = Callable[[ForestModel, np.random.Generator], "list[ErrorPmfModel | None]"]


@dataclass(frozen=True)
class DecompositionResult:
    noise: float
    bias_sq: float
    variance: float
    generalized_error: float  # independent direct estimate of E[(C - Y)^2]
    se_noise: float
    se_bias_sq: float
    se_variance: float
    se_direct: float
    se_identity_gap: float
    n_draws: int
    n_batches: int

    @property
    def component_sum(self) -> float:
        return self.noise + self.bias_sq + self.variance

    @property
    def identity_gap(self) -> float:
        return self.generalized_error - self.component_sum


def decompose(
    predict: PredictFn,
    labels: np.ndarray,
    n_resamples: int,
    n_error_draws: int,
    rng: np.random.Generator,
    label_flip_prob: float = 0.0,
    n_batches: int = 10,
) -> DecompositionResult:
    """Decompose a predictor's generalized error over fixed test points.

    ``predict(resample, draw, rng)`` must return the predictor outputs for the
    whole test set, one value in [0, 1] per point, for training resample index
    ``resample`` under injected-error draw ``draw``. Each (resample, draw)
    cell receives its own seeded stream, so the grid can be evaluated in any
    order. ``label_flip_prob`` adds symmetric label noise to exercise the
    noise term; the base labels themselves are deterministic.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("labels must be a non-empty vector")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if n_resamples < 2:
        raise ValueError("need at least two training resamples")
    if n_error_draws < 1:
        raise ValueError("need at least one error draw")
    if not 0.0 <= label_flip_prob <= 1.0:
        raise ValueError("label flip probability must lie in [0, 1]")
    k_total = n_resamples * n_error_draws
    n_batches = min(n_batches, k_total)
    if n_batches < 2:
        raise ValueError("need at least two batches for standard errors")

    npts = labels.size
    cell_seeds = rng.integers(0, 2**63, size=(n_resamples, n_error_draws))
    preds = np.empty((k_total, npts))
    k = 0
    for r in range(n_resamples):
        for d in range(n_error_draws):
            out = np.asarray(predict(r, d, np.random.default_rng(cell_seeds[r, d])), dtype=np.float64)
            if out.shape != (npts,):
                raise ValueError(f"predictor returned shape {out.shape}, want ({npts},)")
            if not np.isfinite(out).all() or out.min() < 0.0 or out.max() > 1.0:
                raise ValueError("predictor outputs must lie in [0, 1]")
            preds[k] = out
            k += 1

    base = labels.astype(np.float64)[np.newaxis, :]
    flips = (rng.random((k_total, npts)) < label_flip_prob).astype(np.float64)
    c_draws = np.abs(base - flips)  # XOR on 0/1 reals
    fresh_flips = (rng.random((k_total, npts)) < label_flip_prob).astype(np.float64)
    c_fresh = np.abs(base - fresh_flips)

    batch_of = np.arange(k_total) % n_batches

    def components(sel: np.ndarray) -> tuple[float, float, float, float]:
        cb, yb, fb = c_draws[sel], preds[sel], c_fresh[sel]
        noise = float(cb.var(axis=0).mean())
        bias_sq = float(((cb.mean(axis=0) - yb.mean(axis=0)) ** 2).mean())
        variance = float(yb.var(axis=0).mean())
        direct = float(((fb - yb) ** 2).mean())
        return noise, bias_sq, variance, direct

    noise, bias_sq, variance, direct = components(np.ones(k_total, dtype=bool))
    series = np.array([components(batch_of == b) for b in range(n_batches)])
    gaps = series[:, 3] - series[:, :3].sum(axis=1)
    ses = series.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return DecompositionResult(
        noise=noise,
        bias_sq=bias_sq,
        variance=variance,
        generalized_error=direct,
        se_noise=float(ses[0]),
        se_bias_sq=float(ses[1]),
        se_variance=float(ses[2]),
        se_direct=float(ses[3]),
        se_identity_gap=float(gaps.std(ddof=1) / np.sqrt(n_batches)),
        n_draws=k_total,
        n_batches=n_batches,
    )


def ensemble_variance(run_outputs: np.ndarray) -> float:
    """Mean over test points of the across-run variance of the ensemble mean.

    ``run_outputs`` is (n_runs, n_points): each row holds one run's averaged
    member outputs per point.
    """
    run_outputs = np.asarray(run_outputs, dtype=np.float64)
    if run_outputs.ndim != 2 or run_outputs.shape[0] < 2:
        raise ValueError("need a (runs, points) matrix with at least two runs")
    return float(run_outputs.var(axis=0, ddof=1).mean())


@dataclass(frozen=True)
class VariancePoint:
    l: int
    variance: float
    se: float
    n_runs: int


def _resample(ds: Dataset, rng: np.random.Generator) -> Dataset:
    rows = rng.integers(0, ds.n_rows, size=ds.n_rows)
    # keep the parent's scaling: preprocessing is part of the deployed
    # pipeline, not retrained per resample
    return Dataset(ds.features[rows], ds.labels[rows], ds.scaling)


def variance_vs_L(
    train_ds: Dataset,
    test_features: np.ndarray,
    l_values: Sequence[int],
    n_runs: int,
    rng: np.random.Generator,
    tree_error_factory: TreeErrorFactory | None = None,
    diverse: bool = False,
    base_config: ForestConfig | None = None,
) -> list[VariancePoint]:
    """Across-run ensemble variance for each ensemble size.

    Every run draws a fresh bootstrap of the training rows, trains an L-tree
    forest, builds per-tree error models through the factory, and records the
    unthresholded ensemble average on the test points. Standard errors come
    from leave-one-run-out replicates of the variance estimate.
    """
    if len(l_values) == 0:
        raise ValueError("need at least one ensemble size")
    if n_runs < 2:
        raise ValueError("need at least two runs per ensemble size")
    if base_config is None:
        base_config = ForestConfig()
    precision = "diverse" if diverse else base_config.precision
    test_features = np.asarray(test_features, dtype=np.float64)
    points: list[VariancePoint] = []
    for l in l_values:
        cfg = ForestConfig(
            n_trees=int(l),
            features_per_node=base_config.features_per_node,
            min_samples=base_config.min_samples,
            precision=precision,
            voter=base_config.voter,
        )
        outputs = np.empty((n_runs, test_features.shape[0]))
        for run in range(n_runs):
            ds_run = _resample(train_ds, rng)
            model = train_forest(ds_run, cfg, rng)
            errors = None if tree_error_factory is None else tree_error_factory(model, rng)
            votes = tree_votes_batch(model, test_features, errors, rng)
            outputs[run] = votes.mean(axis=0)
        var_full = ensemble_variance(outputs)
        drop = np.array(
            [ensemble_variance(np.delete(outputs, i, axis=0)) for i in range(n_runs)]
        )
        se = float(np.sqrt((n_runs - 1) / n_runs * ((drop - drop.mean()) ** 2).sum()))
        points.append(VariancePoint(int(l), var_full, se, n_runs))
    return points
