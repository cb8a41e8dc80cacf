"""Tests for the error decomposition and the ensemble variance law."""

from __future__ import annotations

import numpy as np
import pytest

from ntvsim.analysis import (
    VariancePoint,
    decompose,
    ensemble_variance,
    variance_vs_L,
)
from ntvsim.dataset import Dataset
from ntvsim.errormodel import synthesize
from ntvsim.forest import ForestConfig, compile_tree, train_forest, train_tree


def _labels(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 2, size=n).astype(np.uint8)


def test_perfect_predictor_all_terms_zero():
    labels = _labels(50)

    def predict(r, d, rng):
        return labels.astype(float)

    out = decompose(predict, labels, 5, 4, np.random.default_rng(1))
    assert out.noise == 0.0
    assert out.bias_sq == 0.0
    assert out.variance == 0.0
    assert out.generalized_error == 0.0


def test_coin_flip_predictor_matches_bernoulli_variance():
    labels = _labels(60, seed=2)
    q = 0.3

    def predict(r, d, rng):
        flip = rng.random(labels.size) < q
        return np.abs(labels.astype(float) - flip)

    out = decompose(predict, labels, 20, 20, np.random.default_rng(3))
    want_var = q * (1 - q)
    assert abs(out.variance - want_var) <= 3 * out.se_variance
    assert abs(out.bias_sq - q * q) <= 3 * out.se_bias_sq
    assert abs(out.generalized_error - q) <= 3 * out.se_direct
    assert out.noise == 0.0


def test_sum_identity_on_random_configurations():
    rng = np.random.default_rng(44)
    for case in range(20):
        npts = int(rng.integers(20, 60))
        labels = rng.integers(0, 2, size=npts).astype(np.uint8)
        q_label = float(rng.uniform(0.0, 0.3))
        f_pred = float(rng.uniform(0.05, 0.45))

        def predict(r, d, cell_rng, f=f_pred, lab=labels):
            flip = cell_rng.random(lab.size) < f
            return np.abs(lab.astype(float) - flip)

        out = decompose(
            predict,
            labels,
            15,
            20,
            np.random.default_rng(1000 + case),
            label_flip_prob=q_label,
        )
        assert abs(out.identity_gap) <= 3 * out.se_identity_gap, (
            f"case {case}: gap {out.identity_gap:.5f} vs se {out.se_identity_gap:.5f}"
        )


def test_label_noise_term():
    labels = _labels(80, seed=5)
    q = 0.2

    def predict(r, d, rng):
        return labels.astype(float)

    out = decompose(
        predict, labels, 15, 15, np.random.default_rng(6), label_flip_prob=q
    )
    assert abs(out.noise - q * (1 - q)) <= 3 * out.se_noise
    assert out.variance == 0.0


def test_cross_term_covariance_vanishes():
    # cov(C - E[C], E[C] - Y) over independent draws is zero in expectation
    rng = np.random.default_rng(7)
    npts, k = 40, 600
    labels = _labels(npts, seed=8).astype(float)
    q, f = 0.2, 0.3
    c = np.abs(labels[None, :] - (rng.random((k, npts)) < q))
    y = np.abs(labels[None, :] - (rng.random((k, npts)) < f))
    e_c = labels * (1 - q) + (1 - labels) * q
    a = c - e_c[None, :]
    b = e_c[None, :] - y
    prods = (a * b).mean(axis=1)
    se = prods.std(ddof=1) / np.sqrt(k)
    assert abs(prods.mean()) <= 3 * se


def test_decompose_validation():
    labels = _labels(10)
    ok = lambda r, d, rng: labels.astype(float)
    with pytest.raises(ValueError, match="resamples"):
        decompose(ok, labels, 1, 5, np.random.default_rng(0))
    with pytest.raises(ValueError, match="error draw"):
        decompose(ok, labels, 3, 0, np.random.default_rng(0))
    with pytest.raises(ValueError, match="0/1"):
        decompose(ok, np.array([0, 2]), 3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError, match="flip"):
        decompose(ok, labels, 3, 2, np.random.default_rng(0), label_flip_prob=1.5)
    bad_range = lambda r, d, rng: labels.astype(float) + 0.5
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        decompose(bad_range, labels, 3, 2, np.random.default_rng(0))
    bad_shape = lambda r, d, rng: np.zeros(3)
    with pytest.raises(ValueError, match="shape"):
        decompose(bad_shape, labels, 3, 2, np.random.default_rng(0))


def test_decompose_deterministic():
    labels = _labels(30, seed=9)

    def predict(r, d, rng):
        return np.abs(labels.astype(float) - (rng.random(labels.size) < 0.25))

    a = decompose(predict, labels, 6, 6, np.random.default_rng(11))
    b = decompose(predict, labels, 6, 6, np.random.default_rng(11))
    assert a == b


# --- ensemble variance ------------------------------------------------------

def test_ensemble_variance_identical_runs_is_zero():
    outputs = np.tile(np.random.default_rng(0).random(25), (8, 1))
    assert ensemble_variance(outputs) == pytest.approx(0.0, abs=1e-30)


def test_ensemble_variance_iid_bernoulli_law():
    rng = np.random.default_rng(13)
    runs, npts, l = 2000, 50, 10
    members = rng.random((runs, l, npts)) < 0.5
    outputs = members.mean(axis=1)
    got = ensemble_variance(outputs)
    assert got == pytest.approx(0.25 / l, rel=0.10)


def test_ensemble_variance_single_member_reduces_to_member_variance():
    rng = np.random.default_rng(14)
    outputs = (rng.random((3000, 40)) < 0.5).astype(float)
    assert ensemble_variance(outputs) == pytest.approx(0.25, rel=0.05)


def test_ensemble_variance_scaling_law_synthetic():
    # var * L stays constant for independent members
    rng = np.random.default_rng(15)
    runs, npts = 800, 40
    for l in (1, 5, 10, 25):
        members = rng.random((runs, l, npts)) < 0.5
        got = ensemble_variance(members.mean(axis=1))
        assert abs(got * l - 0.25) <= 0.15 * 0.25, f"L={l}: {got * l}"


def test_ensemble_variance_validation():
    with pytest.raises(ValueError):
        ensemble_variance(np.zeros(5))
    with pytest.raises(ValueError):
        ensemble_variance(np.zeros((1, 5)))


# --- variance vs ensemble size ----------------------------------------------

def _toy_dataset(n: int = 60, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    feats = rng.random((n, 4))
    labels = ((feats[:, 0] + feats[:, 2]) > 1.0).astype(np.uint8)
    return Dataset(feats, labels)


def _flip_factory(p: float):
    def factory(model, rng):
        return [synthesize(np.array([p]), 0.0) for _ in range(model.n_trees)]

    return factory


def test_variance_vs_l_decreases_with_ensemble_size():
    ds = _toy_dataset()
    test_feats = np.random.default_rng(1).random((40, 4))
    curve = variance_vs_L(
        ds,
        test_feats,
        [1, 5, 15],
        n_runs=30,
        rng=np.random.default_rng(2),
        tree_error_factory=_flip_factory(0.15),
    )
    assert [p.l for p in curve] == [1, 5, 15]
    for a, b in zip(curve, curve[1:]):
        assert b.variance <= a.variance + 2 * np.hypot(a.se, b.se), (a, b)
    # the big-ensemble end must sit well below the single tree
    assert curve[-1].variance < curve[0].variance


def test_variance_vs_l_matches_decompose_at_single_tree():
    ds = _toy_dataset(seed=3)
    test_feats = np.random.default_rng(4).random((40, 4))
    flip = 0.15
    curve = variance_vs_L(
        ds,
        test_feats,
        [1],
        n_runs=60,
        rng=np.random.default_rng(5),
        tree_error_factory=_flip_factory(flip),
    )

    cfg = ForestConfig(n_trees=1)

    def predict(r, d, rng):
        rows = rng.integers(0, ds.n_rows, size=ds.n_rows)
        ds_run = Dataset(ds.features[rows], ds.labels[rows], ds.scaling)
        model = train_forest(ds_run, cfg, rng)
        errs = _flip_factory(flip)(model, rng)
        from ntvsim.forest import tree_votes_batch

        return tree_votes_batch(model, test_feats, errs, rng).mean(axis=0)

    labels = (test_feats[:, 0] + test_feats[:, 2] > 1.0).astype(np.uint8)
    out = decompose(predict, labels, 30, 2, np.random.default_rng(6))
    tol = 3 * np.hypot(curve[0].se, out.se_variance)
    assert abs(curve[0].variance - out.variance) <= tol


def test_variance_vs_l_diverse_smoke():
    ds = _toy_dataset(seed=7)
    test_feats = np.random.default_rng(8).random((20, 4))
    curve = variance_vs_L(
        ds,
        test_feats,
        [3],
        n_runs=6,
        rng=np.random.default_rng(9),
        tree_error_factory=_flip_factory(0.1),
        diverse=True,
    )
    assert len(curve) == 1
    assert np.isfinite(curve[0].variance)
    assert curve[0].se >= 0.0


def test_variance_vs_l_validation():
    ds = _toy_dataset()
    feats = ds.features[:5]
    with pytest.raises(ValueError):
        variance_vs_L(ds, feats, [], 5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        variance_vs_L(ds, feats, [2], 1, np.random.default_rng(0))
