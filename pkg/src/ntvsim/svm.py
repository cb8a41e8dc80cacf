"""Second-order polynomial-kernel SVM with a two-stage fixed-point margin unit.

Training runs a simplified SMO: sweep the rows, pick a random partner for each
multiplier that violates its optimality condition beyond the tolerance, solve
the two-variable subproblem in closed form, and stop after a run of quiescent
sweeps. A hard cap on total sweeps turns non-convergence into a raised error
rather than a silent bad model.

The kernel (beta * u.v + gamma)^2 factors through the augmented vectors
xt = [1; x] and st = [gamma; beta * s], which folds the support-vector sum into
one symmetric matrix W: margin(x) = xt' W xt + bias. The fixed-point unit
evaluates that form in two stages: stage 1 forms z = W xt with one multiply
accumulate per coefficient, stage 2 forms xt.z on top of the quantized bias.
Error injection points are the stage-1 output words and the final stage-2
accumulator, both as XOR masks on two's-complement patterns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ntvsim.dataset import Dataset, FeatureScaling, fit_scaling
from ntvsim.errormodel import ErrorPmfModel, patterns_to_masks, sample_batch
from ntvsim.errors import ParseError, TrainingFailed
from ntvsim.fixedpoint import (
    FixedFormat,
    FixedWord,
    codes_to_patterns,
    mac,
    mac_codes,
    patterns_to_codes,
    quantize,
    quantize_codes,
)

INPUT_FORMAT = FixedFormat(8, 6)
SUPPORT_EPS = 1e-8
# Multipliers closer to a box edge than the minimum update step count as
# sitting on that edge: the solver cannot clear a smaller residual.
ALPHA_ATOL = 1e-5


@dataclass(frozen=True)
class SvmConfig:
    penalty: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    tol: float = 1e-3
    quiet_passes: int = 1
    pass_cap: int = 500
    coef_bits: int = 8
    stage1_bits: int = 10
    acc_bits: int = 16
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.quiet_passes < 1:
            raise ValueError("quiet_passes must be >= 1")


@dataclass(frozen=True)
class SvmFormats:
    input_fmt: FixedFormat
    coef_fmt: FixedFormat
    stage1_fmt: FixedFormat
    acc_fmt: FixedFormat


def _int_bits_for(max_abs: float) -> int:
    """Smallest k >= 0 with max_abs < 2**k."""
    k = 0
    while max_abs >= float(1 << k):
        k += 1
    return k


def _fit_format(max_abs: float, total_bits: int, headroom_bits: int) -> FixedFormat:
    k = _int_bits_for(max_abs) + headroom_bits
    frac = min(max(total_bits - 1 - k, 0), total_bits - 1)
    return FixedFormat(total_bits, frac)


def fit_formats(
    wtilde: np.ndarray,
    bias: float,
    xt: np.ndarray,
    coef_bits: int = 8,
    stage1_bits: int = 10,
    acc_bits: int = 16,
    input_fmt: FixedFormat = INPUT_FORMAT,
) -> SvmFormats:
    """Pick fractional splits from the observed value ranges.

    Coefficients get no headroom (their range is exact); the stage-1 words and
    the stage-2 accumulator each keep one extra integer bit because their
    fitted ranges come from float evaluation over the training rows only.
    """
    coef_fmt = _fit_format(float(np.abs(wtilde).max()), coef_bits, 0)
    z = xt @ wtilde.T
    stage1_fmt = _fit_format(float(np.abs(z).max()), stage1_bits, 1)
    partials = bias + np.cumsum(xt * z, axis=1)
    acc_max = max(abs(bias), float(np.abs(partials).max()))
    acc_fmt = _fit_format(acc_max, acc_bits, 1)
    return SvmFormats(input_fmt, coef_fmt, stage1_fmt, acc_fmt)


@dataclass
class SvmModel:
    support: np.ndarray  # (S, M) scaled support vectors
    folded: np.ndarray  # (S,) multiplier * class sign
    bias: float
    beta: float
    gamma: float
    scaling: FeatureScaling
    wtilde: np.ndarray  # (M+1, M+1)
    formats: SvmFormats
    coef_codes: np.ndarray = field(init=False)
    bias_code: int = field(init=False)

    def __post_init__(self) -> None:
        self.coef_codes = quantize_codes(self.wtilde, self.formats.coef_fmt)
        self.bias_code = quantize(self.bias, self.formats.acc_fmt).code

    @property
    def n_features(self) -> int:
        return self.support.shape[1]

    @property
    def mac_count(self) -> int:
        """Multiply-accumulates per classification: (M+1)^2 + (M+1)."""
        m1 = self.n_features + 1
        return m1 * m1 + m1

    def with_formats(self, formats: SvmFormats) -> "SvmModel":
        return replace(self, formats=formats)


def _augment(scaled: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(scaled.shape[0]), scaled])


class _SmoState:
    """Pairwise dual ascent with a cached decision-error vector."""

    def __init__(self, kernel: np.ndarray, y: np.ndarray, cfg: SvmConfig):
        self.kernel = kernel
        self.y = y
        self.cfg = cfg
        self.n = y.size
        self.alphas = np.zeros(self.n)
        self.b = 0.0
        self.errors = -y.copy()  # f - y with all multipliers at zero

    def _refresh_errors(self) -> None:
        self.errors = (self.alphas * self.y) @ self.kernel + self.b - self.y

    def violations(self) -> np.ndarray:
        r = self.y * self.errors
        c, tol = self.cfg.penalty, self.cfg.tol
        below_c = self.alphas < c - ALPHA_ATOL
        above_0 = self.alphas > ALPHA_ATOL
        return ((r < -tol) & below_c) | ((r > tol) & above_0)

    def violated(self, i: int) -> bool:
        r = self.y[i] * self.errors[i]
        c, tol = self.cfg.penalty, self.cfg.tol
        return (r < -tol and self.alphas[i] < c - ALPHA_ATOL) or (
            r > tol and self.alphas[i] > ALPHA_ATOL
        )

    def try_pair(self, i: int, j: int) -> bool:
        if i == j:
            return False
        k, y, a, c = self.kernel, self.y, self.alphas, self.cfg.penalty
        a_i, a_j = a[i], a[j]
        if y[i] != y[j]:
            lo, hi = max(0.0, a_j - a_i), min(c, c + a_j - a_i)
        else:
            lo, hi = max(0.0, a_i + a_j - c), min(c, a_i + a_j)
        if lo >= hi:
            return False
        eta = 2.0 * k[i, j] - k[i, i] - k[j, j]
        if eta >= 0:
            return False
        e_i, e_j = self.errors[i], self.errors[j]
        a_j_new = min(max(a_j - y[j] * (e_i - e_j) / eta, lo), hi)
        if abs(a_j_new - a_j) < 1e-5:
            return False
        a_i_new = a_i + y[i] * y[j] * (a_j - a_j_new)
        b1 = (
            self.b - e_i
            - y[i] * (a_i_new - a_i) * k[i, i]
            - y[j] * (a_j_new - a_j) * k[i, j]
        )
        b2 = (
            self.b - e_j
            - y[i] * (a_i_new - a_i) * k[i, j]
            - y[j] * (a_j_new - a_j) * k[j, j]
        )
        if 0 < a_i_new < c:
            self.b = b1
        elif 0 < a_j_new < c:
            self.b = b2
        else:
            self.b = (b1 + b2) / 2.0
        a[i], a[j] = a_i_new, a_j_new
        self._refresh_errors()
        return True

    def step(self, i: int, rng: np.random.Generator) -> bool:
        # best partner first (largest error gap drives the largest move),
        # then an exhaustive shuffled fallback
        gap = np.abs(self.errors[i] - self.errors)
        gap[i] = -1.0
        if self.try_pair(i, int(gap.argmax())):
            return True
        for j in rng.permutation(self.n):
            if self.try_pair(i, int(j)):
                return True
        return False


def _smo(
    kernel: np.ndarray,
    y: np.ndarray,
    cfg: SvmConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    n = y.size
    if n < 2:
        raise TrainingFailed("need at least two training rows")
    state = _SmoState(kernel, y, cfg)
    quiet = 0
    total = 0
    while quiet < cfg.quiet_passes:
        if total >= cfg.pass_cap:
            raise TrainingFailed(
                f"no convergence after {cfg.pass_cap} sweeps "
                f"({int(state.violations().sum())} rows still violate the "
                f"optimality conditions at tolerance {cfg.tol})"
            )
        changed = 0
        for i in range(n):
            if state.violated(i) and state.step(i, rng):
                changed += 1
        quiet = quiet + 1 if changed == 0 else 0
        total += 1
    # a quiescent sweep with residual violations means the solver stalled
    left = state.violations()
    if left.any():
        r = np.abs(y * state.errors)[left].max()
        raise TrainingFailed(
            f"stalled with {int(left.sum())} optimality violations "
            f"(worst {r:.3g}, tolerance {cfg.tol})"
        )
    return state.alphas, state.b


def train_svm(
    ds: Dataset, cfg: SvmConfig = SvmConfig(), rng: np.random.Generator | None = None
) -> SvmModel:
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    scaling = ds.scaling if ds.scaling is not None else fit_scaling(ds.features)
    scaled = scaling.transform(ds.features)
    y = ds.labels.astype(np.float64) * 2.0 - 1.0
    gram = (cfg.beta * (scaled @ scaled.T) + cfg.gamma) ** 2
    alphas, b = _smo(gram, y, cfg, rng)
    keep = alphas > SUPPORT_EPS
    if not keep.any():
        raise TrainingFailed("no support vectors survived training")
    support = scaled[keep]
    folded = (alphas * y)[keep]
    st = np.column_stack([np.full(support.shape[0], cfg.gamma), cfg.beta * support])
    wtilde = st.T @ (folded[:, np.newaxis] * st)
    formats = fit_formats(
        wtilde, b, _augment(scaled), cfg.coef_bits, cfg.stage1_bits, cfg.acc_bits
    )
    return SvmModel(support, folded, b, cfg.beta, cfg.gamma, scaling, wtilde, formats)


# --- float paths ------------------------------------------------------------

def margin_direct(model: SvmModel, x: np.ndarray) -> float:
    """Kernel-sum margin over the stored support vectors."""
    scaled = model.scaling.transform(np.asarray(x, dtype=np.float64)[np.newaxis, :])[0]
    k = (model.beta * (model.support @ scaled) + model.gamma) ** 2
    return float(model.folded @ k + model.bias)


def classify_direct(model: SvmModel, x: np.ndarray) -> int:
    return int(margin_direct(model, x) >= 0.0)


def margin_reformulated(model: SvmModel, x: np.ndarray) -> float:
    """Folded quadratic-form margin xt' W xt + bias."""
    scaled = model.scaling.transform(np.asarray(x, dtype=np.float64)[np.newaxis, :])
    xt = _augment(scaled)[0]
    return float(xt @ model.wtilde @ xt + model.bias)


# --- fixed-point pipeline ---------------------------------------------------

@dataclass(frozen=True)
class FixedDecision:
    label: int
    margin_code: int
    stage1_codes: np.ndarray
    mac_count: int


def classify_fixed(
    model: SvmModel,
    x: np.ndarray,
    stage1_error: ErrorPmfModel | None = None,
    acc_error: ErrorPmfModel | None = None,
    rng: np.random.Generator | None = None,
) -> FixedDecision:
    """Scalar two-stage evaluation built on single-word operations."""
    fmts = model.formats
    scaled = model.scaling.transform(np.asarray(x, dtype=np.float64)[np.newaxis, :])
    xt = _augment(scaled)[0]
    xw = [quantize(v, fmts.input_fmt) for v in xt]
    cw = [
        [FixedWord(int(code), fmts.coef_fmt) for code in row]
        for row in model.coef_codes
    ]
    m1 = len(xw)
    macs = 0
    _check_widths(model, stage1_error, acc_error, rng)
    stage1: list[FixedWord] = []
    for j in range(m1):
        acc = FixedWord(0, fmts.stage1_fmt)
        for i in range(m1):
            acc = mac(acc, cw[j][i], xw[i], fmts.stage1_fmt)
            macs += 1
        stage1.append(acc)
    if stage1_error is not None:
        etas = sample_batch(stage1_error, m1, rng)
        masks = patterns_to_masks(etas)
        stage1 = [
            FixedWord.from_bit_pattern(w.bit_pattern ^ int(masks[j]), fmts.stage1_fmt)
            for j, w in enumerate(stage1)
        ]
    acc = FixedWord(model.bias_code, fmts.acc_fmt)
    for i in range(m1):
        acc = mac(acc, xw[i], stage1[i], fmts.acc_fmt)
        macs += 1
    if acc_error is not None:
        mask = int(patterns_to_masks(sample_batch(acc_error, 1, rng))[0])
        acc = FixedWord.from_bit_pattern(acc.bit_pattern ^ mask, fmts.acc_fmt)
    return FixedDecision(
        label=int(acc.code >= 0),
        margin_code=acc.code,
        stage1_codes=np.array([w.code for w in stage1], dtype=np.int64),
        mac_count=macs,
    )


def _check_widths(
    model: SvmModel,
    stage1_error: ErrorPmfModel | None,
    acc_error: ErrorPmfModel | None,
    rng: np.random.Generator | None,
) -> None:
    if (stage1_error is not None or acc_error is not None) and rng is None:
        raise ValueError("an rng is required when injecting errors")
    if stage1_error is not None and stage1_error.width != model.formats.stage1_fmt.total_bits:
        raise ValueError(
            f"stage-1 error width {stage1_error.width} != "
            f"{model.formats.stage1_fmt.total_bits}"
        )
    if acc_error is not None and acc_error.width != model.formats.acc_fmt.total_bits:
        raise ValueError(
            f"accumulator error width {acc_error.width} != {model.formats.acc_fmt.total_bits}"
        )


def classify_fixed_batch(
    model: SvmModel,
    features: np.ndarray,
    stage1_error: ErrorPmfModel | None = None,
    acc_error: ErrorPmfModel | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Vectorized two-stage evaluation; returns the 0/1 labels."""
    codes = margin_codes_batch(model, features, stage1_error, acc_error, rng)
    return (codes >= 0).astype(np.uint8)


def margin_codes_batch(
    model: SvmModel,
    features: np.ndarray,
    stage1_error: ErrorPmfModel | None = None,
    acc_error: ErrorPmfModel | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    fmts = model.formats
    _check_widths(model, stage1_error, acc_error, rng)
    features = np.asarray(features, dtype=np.float64)
    xt = _augment(model.scaling.transform(features))
    xq = quantize_codes(xt, fmts.input_fmt)
    n, m1 = xq.shape
    z = np.zeros((n, m1), dtype=np.int64)
    for j in range(m1):
        acc = np.zeros(n, dtype=np.int64)
        for i in range(m1):
            acc = mac_codes(
                acc, model.coef_codes[j, i], fmts.coef_fmt, xq[:, i], fmts.input_fmt,
                fmts.stage1_fmt,
            )
        z[:, j] = acc
    if stage1_error is not None:
        etas = sample_batch(stage1_error, n * m1, rng)
        masks = patterns_to_masks(etas).reshape(n, m1)
        z = patterns_to_codes(codes_to_patterns(z, fmts.stage1_fmt) ^ masks, fmts.stage1_fmt)
    acc = np.full(n, model.bias_code, dtype=np.int64)
    for i in range(m1):
        acc = mac_codes(
            acc, xq[:, i], fmts.input_fmt, z[:, i], fmts.stage1_fmt, fmts.acc_fmt
        )
    if acc_error is not None:
        etas = sample_batch(acc_error, n, rng)
        masks = patterns_to_masks(etas)
        acc = patterns_to_codes(codes_to_patterns(acc, fmts.acc_fmt) ^ masks, fmts.acc_fmt)
    return acc


# --- serialization ----------------------------------------------------------

def svm_to_json(model: SvmModel) -> dict:
    return {
        "kind": "svm",
        "beta": model.beta,
        "gamma": model.gamma,
        "bias": model.bias,
        "support": model.support.tolist(),
        "folded": model.folded.tolist(),
        "wtilde": model.wtilde.tolist(),
        "scaling": {"lo": model.scaling.lo.tolist(), "hi": model.scaling.hi.tolist()},
        "formats": {
            "input": model.formats.input_fmt.descriptor,
            "coef": model.formats.coef_fmt.descriptor,
            "stage1": model.formats.stage1_fmt.descriptor,
            "acc": model.formats.acc_fmt.descriptor,
        },
    }


def svm_from_json(doc: dict) -> SvmModel:
    try:
        if doc.get("kind") != "svm":
            raise ParseError(f"not an svm document (kind={doc.get('kind')!r})")
        formats = SvmFormats(
            FixedFormat.from_descriptor(doc["formats"]["input"]),
            FixedFormat.from_descriptor(doc["formats"]["coef"]),
            FixedFormat.from_descriptor(doc["formats"]["stage1"]),
            FixedFormat.from_descriptor(doc["formats"]["acc"]),
        )
        return SvmModel(
            np.asarray(doc["support"], dtype=np.float64),
            np.asarray(doc["folded"], dtype=np.float64),
            float(doc["bias"]),
            float(doc["beta"]),
            float(doc["gamma"]),
            FeatureScaling(
                np.asarray(doc["scaling"]["lo"], dtype=np.float64),
                np.asarray(doc["scaling"]["hi"], dtype=np.float64),
            ),
            np.asarray(doc["wtilde"], dtype=np.float64),
            formats,
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad svm document: {exc}") from exc


def save_svm(model: SvmModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(svm_to_json(model), fh)
        fh.write("\n")


def load_svm(path) -> SvmModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    return svm_from_json(doc)
