"""Tests for SMO training, the folded quadratic form, and the fixed pipeline."""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from ntvsim.dataset import Dataset, split
from ntvsim.errormodel import synthesize
from ntvsim.errors import ParseError, TrainingFailed
from ntvsim.fixedpoint import FixedFormat
from ntvsim.svm import (
    FixedDecision,
    SvmConfig,
    SvmModel,
    classify_direct,
    classify_fixed,
    classify_fixed_batch,
    fit_formats,
    load_svm,
    margin_codes_batch,
    margin_direct,
    margin_reformulated,
    save_svm,
    svm_from_json,
    svm_to_json,
    train_svm,
)


def _toy_dataset(n: int = 60, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    feats = rng.random((n, 2))
    labels = ((feats[:, 0] + feats[:, 1]) > 1.0).astype(np.uint8)
    return Dataset(feats, labels)


@pytest.fixture(scope="module")
def toy_model() -> SvmModel:
    return train_svm(_toy_dataset(), SvmConfig(seed=3))


def _probe(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).random((n, 2))


# --- training ---------------------------------------------------------------

def test_training_separates_toy_data(toy_model):
    ds = _toy_dataset()
    pred = np.array([classify_direct(toy_model, x) for x in ds.features])
    assert (pred == ds.labels).mean() >= 0.95


def test_training_deterministic_under_seed():
    cfg = SvmConfig(seed=5)
    a = svm_to_json(train_svm(_toy_dataset(), cfg))
    b = svm_to_json(train_svm(_toy_dataset(), cfg))
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_training_failure_on_pass_cap():
    with pytest.raises(TrainingFailed, match="sweeps"):
        train_svm(_toy_dataset(), SvmConfig(pass_cap=0, seed=0))


def test_training_needs_two_rows():
    ds = Dataset(np.array([[0.1, 0.2]]), np.array([1], dtype=np.uint8))
    with pytest.raises(TrainingFailed):
        train_svm(ds, SvmConfig(seed=0))


def test_multipliers_respect_box(toy_model):
    assert (toy_model.folded != 0).all()
    assert np.abs(toy_model.folded).max() <= 1.0 + 1e-12  # penalty defaults to 1


def test_optimality_conditions_hold_at_tolerance(toy_model):
    """Zero multipliers demand margin >= 1, box-interior ones margin == 1,
    saturated ones margin <= 1, all within the dual tolerance."""
    ds = _toy_dataset()
    y = ds.labels.astype(np.float64) * 2.0 - 1.0
    margins = np.array([margin_direct(toy_model, x) for x in ds.features])
    r = y * margins - 1.0
    # recover per-row multipliers: non-support rows carry alpha = 0
    alphas = np.zeros(ds.n_rows)
    scaled = toy_model.scaling.transform(ds.features)
    for s, a in zip(toy_model.support, np.abs(toy_model.folded)):
        hit = np.flatnonzero((np.abs(scaled - s) < 1e-12).all(axis=1))
        alphas[hit] = a
    slack = 2e-3
    at_zero = alphas <= 1e-4
    at_cap = alphas >= 1.0 - 1e-4
    interior = ~at_zero & ~at_cap
    assert (r[at_zero] >= -slack).all()
    assert (np.abs(r[interior]) <= slack).all()
    assert (r[at_cap] <= slack).all()


# --- folded form ------------------------------------------------------------

def test_reformulated_margin_matches_kernel_sum(toy_model):
    for x in _probe(100, 11):
        d = margin_direct(toy_model, x)
        r = margin_reformulated(toy_model, x)
        assert r == pytest.approx(d, rel=1e-9, abs=1e-12)


def test_wtilde_is_symmetric(toy_model):
    np.testing.assert_allclose(toy_model.wtilde, toy_model.wtilde.T, atol=1e-12)


def test_mac_count(toy_model):
    m1 = toy_model.n_features + 1
    assert toy_model.mac_count == m1 * m1 + m1
    out = classify_fixed(toy_model, np.array([0.4, 0.7]))
    assert out.mac_count == toy_model.mac_count


# --- fixed pipeline vs exact oracle -----------------------------------------

def _q_oracle(value: float, fmt: FixedFormat) -> int:
    code = round(Fraction(value) * (1 << fmt.frac_bits))
    return min(max(code, fmt.min_code), fmt.max_code)


def _mac_oracle(acc: int, a: int, b: int, a_fmt, b_fmt, out_fmt) -> int:
    exact = Fraction(acc, 1 << out_fmt.frac_bits) + Fraction(
        a * b, 1 << (a_fmt.frac_bits + b_fmt.frac_bits)
    )
    code = round(exact * (1 << out_fmt.frac_bits))
    return min(max(code, out_fmt.min_code), out_fmt.max_code)


def margin_code_oracle(model: SvmModel, x: np.ndarray) -> int:
    f = model.formats
    scaled = model.scaling.transform(np.asarray(x, dtype=np.float64)[np.newaxis, :])[0]
    xt = [1.0] + [float(v) for v in scaled]
    xq = [_q_oracle(v, f.input_fmt) for v in xt]
    m1 = len(xq)
    z = []
    for j in range(m1):
        acc = 0
        for i in range(m1):
            acc = _mac_oracle(
                acc, int(model.coef_codes[j, i]), xq[i], f.coef_fmt, f.input_fmt, f.stage1_fmt
            )
        z.append(acc)
    acc = model.bias_code
    for i in range(m1):
        acc = _mac_oracle(acc, xq[i], z[i], f.input_fmt, f.stage1_fmt, f.acc_fmt)
    return acc


def test_fixed_pipeline_matches_exact_oracle(toy_model):
    # probes beyond [0, 1] exercise the input saturation rails too
    probes = np.vstack([_probe(40, 21), _probe(10, 22) * 3.0 - 1.0])
    for x in probes:
        want = margin_code_oracle(toy_model, x)
        got = classify_fixed(toy_model, x)
        assert got.margin_code == want
        assert got.label == int(want >= 0)


def test_scalar_and_batch_fixed_agree(toy_model):
    probes = _probe(60, 31)
    codes = margin_codes_batch(toy_model, probes)
    labels = classify_fixed_batch(toy_model, probes)
    for k, x in enumerate(probes):
        out = classify_fixed(toy_model, x)
        assert out.margin_code == codes[k]
        assert out.label == labels[k]


def test_default_format_widths(toy_model):
    f = toy_model.formats
    assert f.input_fmt == FixedFormat(8, 6)
    assert f.coef_fmt.total_bits == 8
    assert f.stage1_fmt.total_bits == 10
    assert f.acc_fmt.total_bits == 16


def test_format_fit_covers_observed_ranges(toy_model):
    # every training-row stage value must be representable without saturating
    ds = _toy_dataset()
    scaled = toy_model.scaling.transform(ds.features)
    xt = np.column_stack([np.ones(len(scaled)), scaled])
    z = xt @ toy_model.wtilde.T
    assert np.abs(z).max() < toy_model.formats.stage1_fmt.max_code * toy_model.formats.stage1_fmt.resolution
    partials = toy_model.bias + np.cumsum(xt * z, axis=1)
    assert np.abs(partials).max() < toy_model.formats.acc_fmt.max_code * toy_model.formats.acc_fmt.resolution


def test_high_precision_formats_track_float(toy_model):
    ds = _toy_dataset()
    scaled = toy_model.scaling.transform(ds.features)
    xt = np.column_stack([np.ones(len(scaled)), scaled])
    wide = fit_formats(
        toy_model.wtilde, toy_model.bias, xt, 24, 28, 32, input_fmt=FixedFormat(18, 16)
    )
    model = toy_model.with_formats(wide)
    probes = _probe(1000, 41)
    fixed = classify_fixed_batch(model, probes)
    floats = np.array([classify_direct(model, x) for x in probes])
    assert (fixed == floats).mean() >= 0.999


# --- error injection --------------------------------------------------------

def test_stage1_zero_model_is_exact_noop(toy_model):
    w = toy_model.formats.stage1_fmt.total_bits
    quiet = synthesize(np.zeros(w), 0.0)
    probes = _probe(30, 51)
    clean = margin_codes_batch(toy_model, probes)
    noisy = margin_codes_batch(
        toy_model, probes, stage1_error=quiet, rng=np.random.default_rng(0)
    )
    np.testing.assert_array_equal(clean, noisy)


def test_acc_sign_bit_flip_inverts_every_label(toy_model):
    w = toy_model.formats.acc_fmt.total_bits
    bits = np.zeros(w)
    bits[w - 1] = 1.0  # certain flip of the sign bit
    flip = synthesize(bits, 0.0)
    probes = _probe(40, 61)
    clean = classify_fixed_batch(toy_model, probes)
    noisy = classify_fixed_batch(
        toy_model, probes, acc_error=flip, rng=np.random.default_rng(0)
    )
    np.testing.assert_array_equal(noisy, 1 - clean)


def test_stage1_flip_rate_statistics(toy_model):
    # LSB flips at rate 0.5 perturb the margin but rarely the label; a certain
    # flip of the stage-1 sign bits shifts nearly everything
    w = toy_model.formats.stage1_fmt.total_bits
    bits = np.zeros(w)
    bits[w - 1] = 1.0
    heavy = synthesize(bits, 0.0)
    probes = _probe(200, 71)
    clean = margin_codes_batch(toy_model, probes)
    noisy = margin_codes_batch(
        toy_model, probes, stage1_error=heavy, rng=np.random.default_rng(1)
    )
    assert (clean != noisy).mean() >= 0.99

def test_error_width_validation(toy_model):
    rng = np.random.default_rng(0)
    x = np.array([0.5, 0.5])
    with pytest.raises(ValueError, match="stage-1"):
        classify_fixed(toy_model, x, stage1_error=synthesize(np.zeros(4), 0.0), rng=rng)
    with pytest.raises(ValueError, match="accumulator"):
        classify_fixed(toy_model, x, acc_error=synthesize(np.zeros(4), 0.0), rng=rng)
    with pytest.raises(ValueError, match="rng"):
        classify_fixed(toy_model, x, acc_error=synthesize(np.zeros(16), 0.0))


# --- serialization ----------------------------------------------------------

def test_json_roundtrip_preserves_codes(toy_model, tmp_path):
    path = tmp_path / "svm.json"
    save_svm(toy_model, path)
    back = load_svm(path)
    np.testing.assert_array_equal(back.coef_codes, toy_model.coef_codes)
    assert back.bias_code == toy_model.bias_code
    assert back.formats == toy_model.formats
    probes = _probe(50, 81)
    np.testing.assert_array_equal(
        margin_codes_batch(back, probes), margin_codes_batch(toy_model, probes)
    )
    for x in probes[:10]:
        assert margin_direct(back, x) == pytest.approx(margin_direct(toy_model, x), rel=1e-12)


def test_json_rejects_wrong_kind():
    with pytest.raises(ParseError, match="kind"):
        svm_from_json({"kind": "forest"})


def test_json_rejects_missing_fields():
    with pytest.raises(ParseError):
        svm_from_json({"kind": "svm", "beta": 1.0})


def test_config_validation():
    with pytest.raises(ValueError):
        SvmConfig(penalty=0.0)
    with pytest.raises(ValueError):
        SvmConfig(tol=-1.0)
    with pytest.raises(ValueError):
        SvmConfig(quiet_passes=0)
