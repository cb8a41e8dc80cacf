"""Correlated multi-bit error model built on a thresholded latent Gaussian.

An error vector of width B is modeled by a latent normal ``u ~ N(mu, C)`` with
unit-variance marginals; bit i fires iff ``u_i >= 0``. The marginal firing rate
of bit i is then ``Phi(mu_i)`` and pairwise joint rates follow the bivariate
normal orthant probability, which is what the fitting routine inverts. Sampling
draws ``u = mu + F z`` with ``F F^T = C`` and thresholds at zero, so sampled
vectors and the analytic pmf describe the same distribution.

Probabilities requested as exactly 0 or 1 in ``synthesize`` are honored as
deterministic bits (latent mean at -inf/+inf); this is what makes an all-zero
model a true no-op in the injection paths. Empirical rates in ``fit`` are
clipped away from {0, 1} because finite samples can produce them spuriously.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.stats import norm

from ntvsim.errors import ParseError
from ntvsim.fixedpoint import FixedFormat, FixedWord

PROB_CLIP = 1e-6
EIGENVALUE_FLOOR = 1e-8
PAIRWISE_TOL = 1e-4
MC_MIN_DRAWS = 1_000_000


@dataclass
class ErrorPmfModel:
    width: int
    latent_mean: np.ndarray
    latent_corr: np.ndarray
    _factor: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.latent_mean = np.asarray(self.latent_mean, dtype=np.float64)
        self.latent_corr = np.asarray(self.latent_corr, dtype=np.float64)
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        if self.latent_mean.shape != (self.width,):
            raise ValueError("latent mean length must equal width")
        if self.latent_corr.shape != (self.width, self.width):
            raise ValueError("latent correlation must be width x width")
        if not np.allclose(self.latent_corr, self.latent_corr.T, atol=1e-12):
            raise ValueError("latent correlation must be symmetric")
        if not np.allclose(np.diag(self.latent_corr), 1.0, atol=1e-9):
            raise ValueError("latent correlation must have unit diagonal")

    @property
    def bit_probs(self) -> np.ndarray:
        return norm.cdf(self.latent_mean)

    def factor(self) -> np.ndarray:
        """Cached F with F F^T = C; eigen-based so singular C (perfectly
        correlated bits) factors exactly instead of failing a Cholesky."""
        if self._factor is None:
            w, v = np.linalg.eigh(self.latent_corr)
            w = np.clip(w, 0.0, None)
            self._factor = v * np.sqrt(w)[np.newaxis, :]
        return self._factor


def repair_correlation(c: np.ndarray, floor: float = EIGENVALUE_FLOOR) -> np.ndarray:
    """Return a PSD correlation matrix near ``c``.

    Pairwise-fitted matrices can be indefinite; those get their eigenvalues
    clipped at ``floor`` and the diagonal re-normalized to 1. A matrix that is
    already PSD is only symmetrized, so exact singular cases (perfectly
    correlated bits) keep their structure.
    """
    c = np.asarray(c, dtype=np.float64)
    c = (c + c.T) / 2.0
    w = np.linalg.eigvalsh(c)
    if w.min() >= -1e-12:
        out = c.copy()
        np.fill_diagonal(out, 1.0)
        return out
    w, v = np.linalg.eigh(c)
    w = np.clip(w, floor, None)
    out = (v * w[np.newaxis, :]) @ v.T
    d = np.sqrt(np.diag(out))
    out = out / np.outer(d, d)
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 1.0)
    return np.clip(out, -1.0, 1.0)


def orthant2(mean1: float, mean2: float, corr: float) -> float:
    """P(u1 >= 0, u2 >= 0) for unit-variance bivariate normal u with the given
    means and correlation.

    Reduced to a single adaptive quadrature over the first coordinate with the
    conditional normal CDF of the second; degenerate correlations +-1 collapse
    to one-dimensional expressions. Absolute error is held below 1e-8, well
    inside the 1e-6 contract.
    """
    if not -1.0 <= corr <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {corr}")
    for m in (mean1, mean2):
        if math.isnan(m):
            raise ValueError("latent means must not be NaN")
    # Deterministic bits (infinite means) short-circuit.
    if math.isinf(mean1) or math.isinf(mean2):
        if mean1 == -math.inf or mean2 == -math.inf:
            return 0.0
        if mean1 == math.inf:
            return float(norm.cdf(mean2)) if math.isfinite(mean2) else 1.0
        return float(norm.cdf(mean1))
    if corr == 1.0:
        return float(norm.cdf(min(mean1, mean2)))
    if corr == -1.0:
        return float(max(0.0, norm.cdf(mean1) + norm.cdf(mean2) - 1.0))

    denom = math.sqrt(1.0 - corr * corr)

    def integrand(z: float) -> float:
        return norm.pdf(z) * norm.cdf((mean2 + corr * z) / denom)

    val, _ = integrate.quad(integrand, -mean1, np.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
    return float(min(max(val, 0.0), 1.0))


def _orthant3(means: np.ndarray, corr: np.ndarray) -> float:
    """P(u >= 0) for a trivariate unit-variance normal, by quadrature over the
    first coordinate with the conditional bivariate orthant inside."""
    m1, m2, m3 = means
    r12, r13, r23 = corr[0, 1], corr[0, 2], corr[1, 2]
    s2 = math.sqrt(max(1.0 - r12 * r12, 1e-12))
    s3 = math.sqrt(max(1.0 - r13 * r13, 1e-12))
    cc = (r23 - r12 * r13) / (s2 * s3)
    cc = min(max(cc, -1.0), 1.0)

    def integrand(z: float) -> float:
        cm2 = (m2 + r12 * z) / s2
        cm3 = (m3 + r13 * z) / s3
        return norm.pdf(z) * orthant2(cm2, cm3, cc)

    val, _ = integrate.quad(integrand, -m1, np.inf, epsabs=1e-9, epsrel=1e-9, limit=200)
    return float(min(max(val, 0.0), 1.0))


def _clip_probability(p: float) -> float:
    return float(min(max(p, PROB_CLIP), 1.0 - PROB_CLIP))


def synthesize(bit_probs: np.ndarray, corr: float | np.ndarray = 0.0) -> ErrorPmfModel:
    """Build a model from requested marginal firing rates and a latent
    correlation (scalar = equicorrelated off-diagonal, or a full matrix)."""
    probs = np.asarray(bit_probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size < 1:
        raise ValueError("bit_probs must be a non-empty vector")
    if np.any((probs < 0.0) | (probs > 1.0)):
        raise ValueError("bit probabilities must lie in [0, 1]")
    width = probs.size
    mean = np.empty(width)
    for i, p in enumerate(probs):
        if p == 0.0:
            mean[i] = -np.inf
        elif p == 1.0:
            mean[i] = np.inf
        else:
            mean[i] = norm.ppf(_clip_probability(float(p)))
    if np.isscalar(corr) or np.ndim(corr) == 0:
        rho = float(corr)
        if not -1.0 <= rho <= 1.0:
            raise ValueError(f"correlation must lie in [-1, 1], got {rho}")
        c = np.full((width, width), rho)
        np.fill_diagonal(c, 1.0)
    else:
        c = np.asarray(corr, dtype=np.float64)
        if c.shape != (width, width):
            raise ValueError("correlation matrix shape must match width")
    return ErrorPmfModel(width, mean, repair_correlation(c))


def fit(samples: np.ndarray) -> ErrorPmfModel:
    """Fit latent means from marginals and pairwise latent correlations by
    root-bracketing the orthant probability against empirical joint rates."""
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise ValueError("samples must be a non-empty (n, width) array")
    if not np.isin(samples, (0, 1)).all():
        raise ValueError("samples must contain only 0/1 entries")
    bits = samples.astype(np.float64)
    n, width = bits.shape
    p_hat = np.clip(bits.mean(axis=0), PROB_CLIP, 1.0 - PROB_CLIP)
    mean = norm.ppf(p_hat)
    c = np.eye(width)
    for i in range(width):
        for j in range(i + 1, width):
            p11 = float((bits[:, i] * bits[:, j]).mean())
            c[i, j] = c[j, i] = _fit_pair(mean[i], mean[j], p11)
    return ErrorPmfModel(width, mean, repair_correlation(c))


def _fit_pair(mean_i: float, mean_j: float, p11: float) -> float:
    """Latent correlation whose orthant probability matches the empirical joint
    rate within PAIRWISE_TOL; clamps to the attainable range at the ends."""
    lo, hi = -1.0 + 1e-9, 1.0 - 1e-9
    f_lo = orthant2(mean_i, mean_j, lo) - p11
    f_hi = orthant2(mean_i, mean_j, hi) - p11
    if f_lo >= 0.0:
        return -1.0 if f_lo > PAIRWISE_TOL else lo
    if f_hi <= 0.0:
        return 1.0 if -f_hi > PAIRWISE_TOL else hi
    return float(
        brentq(
            lambda r: orthant2(mean_i, mean_j, r) - p11,
            lo,
            hi,
            xtol=1e-7,
            rtol=1e-10,
        )
    )


def _validate_pattern(model: ErrorPmfModel, eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta)
    if eta.shape != (model.width,):
        raise ValueError(f"pattern length {eta.shape} does not match width {model.width}")
    if not np.isin(eta, (0, 1)).all():
        raise ValueError("pattern must contain only 0/1 entries")
    return eta.astype(np.int64)


def pmf(model: ErrorPmfModel, eta: np.ndarray, rng: np.random.Generator | None = None) -> float:
    """Probability of the exact bit pattern ``eta``.

    Quadrature for effective width <= 3; Monte Carlo over the latent Gaussian
    beyond that (see ``pmf_with_error`` for the attached standard error).
    """
    p, _ = pmf_with_error(model, eta, rng=rng)
    return p


def pmf_with_error(
    model: ErrorPmfModel,
    eta: np.ndarray,
    rng: np.random.Generator | None = None,
    n_draws: int = MC_MIN_DRAWS,
) -> tuple[float, float]:
    """Pattern probability plus its standard error (0 for the exact widths)."""
    eta = _validate_pattern(model, eta)
    # Bits with infinite latent mean are deterministic: mismatch kills the
    # pattern, matches marginalize out.
    det = np.isinf(model.latent_mean)
    want = (model.latent_mean > 0).astype(np.int64)
    if np.any(det & (eta != want)):
        return 0.0, 0.0
    keep = ~det
    signs = np.where(eta[keep] == 1, 1.0, -1.0)
    mean = signs * model.latent_mean[keep]
    corr = np.outer(signs, signs) * model.latent_corr[np.ix_(keep, keep)]
    np.fill_diagonal(corr, 1.0)
    b = mean.size
    if b == 0:
        return 1.0, 0.0
    if b == 1:
        return float(norm.cdf(mean[0])), 0.0
    if b == 2:
        return orthant2(mean[0], mean[1], float(corr[0, 1])), 0.0
    if b == 3:
        return _orthant3(mean, corr), 0.0
    if n_draws < MC_MIN_DRAWS:
        raise ValueError(f"Monte Carlo pmf needs >= {MC_MIN_DRAWS} draws, got {n_draws}")
    if rng is None:
        rng = np.random.default_rng(0)
    draws = sample_batch(model, n_draws, rng)
    hit = (draws == eta[np.newaxis, :]).all(axis=1)
    p = float(hit.mean())
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n_draws)
    return p, se


def sample(model: ErrorPmfModel, rng: np.random.Generator) -> np.ndarray:
    return sample_batch(model, 1, rng)[0]


def sample_batch(model: ErrorPmfModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` error vectors as a (n, width) uint8 array."""
    if n < 0:
        raise ValueError("sample count must be non-negative")
    z = rng.standard_normal((n, model.width))
    finite_mean = np.where(np.isfinite(model.latent_mean), model.latent_mean, 0.0)
    u = finite_mean[np.newaxis, :] + z @ model.factor().T
    out = (u >= 0.0).astype(np.uint8)
    # Pin deterministic bits explicitly so infinities never enter the algebra.
    det = np.isinf(model.latent_mean)
    if det.any():
        out[:, det] = (model.latent_mean[det] > 0).astype(np.uint8)
    return out


def inject(word: FixedWord, eta: np.ndarray) -> FixedWord:
    """XOR the error pattern onto the word's two's-complement bit pattern.

    ``eta[i]`` flips bit i (LSB = index 0). Additive-over-GF(2): applying the
    same pattern twice restores the word.
    """
    eta = np.asarray(eta)
    if eta.shape != (word.fmt.total_bits,):
        raise ValueError(
            f"pattern width {eta.shape} does not match word width {word.fmt.total_bits}"
        )
    if not np.isin(eta, (0, 1)).all():
        raise ValueError("pattern must contain only 0/1 entries")
    mask = int(np.bitwise_or.reduce((eta.astype(np.int64) << np.arange(word.fmt.total_bits))))
    return FixedWord.from_bit_pattern(word.bit_pattern ^ mask, word.fmt)


def patterns_to_masks(eta: np.ndarray) -> np.ndarray:
    """Pack (n, B) bit rows into integer XOR masks (LSB = column 0)."""
    eta = np.asarray(eta, dtype=np.int64)
    weights = 1 << np.arange(eta.shape[1], dtype=np.int64)
    return eta @ weights


# --- sample-set CSV ---------------------------------------------------------

def write_samples(path, samples: np.ndarray) -> None:
    """Write rows of 0/1 bits as comma-separated values under a `width=B` header."""
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("samples must be a (n, width) array")
    with open(path, "w", newline="\n") as fh:
        fh.write(f"width={samples.shape[1]}\n")
        for row in samples:
            fh.write(",".join(str(int(b)) for b in row) + "\n")


def read_samples(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("width="):
            raise ParseError(f"{path}: line 1: expected 'width=B' header, got {header!r}")
        try:
            width = int(header.split("=", 1)[1])
        except ValueError as exc:
            raise ParseError(f"{path}: line 1: bad width in header {header!r}") from exc
        if width < 1:
            raise ParseError(f"{path}: line 1: width must be >= 1")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != width:
                raise ParseError(
                    f"{path}: line {lineno}: expected {width} cells, got {len(cells)}"
                )
            try:
                row = [int(c) for c in cells]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: non-integer cell") from exc
            if any(b not in (0, 1) for b in row):
                raise ParseError(f"{path}: line {lineno}: cells must be 0 or 1")
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no sample rows after the header")
    return np.asarray(rows, dtype=np.uint8)


# --- model JSON -------------------------------------------------------------

def model_to_json(model: ErrorPmfModel) -> dict:
    return {
        "width": model.width,
        "latent_mean": [_encode_float(x) for x in model.latent_mean],
        "latent_corr": model.latent_corr.tolist(),
    }


def model_from_json(doc: dict) -> ErrorPmfModel:
    try:
        width = int(doc["width"])
        mean = np.asarray([_decode_float(x) for x in doc["latent_mean"]], dtype=np.float64)
        corr = np.asarray(doc["latent_corr"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad error-model document: {exc}") from exc
    return ErrorPmfModel(width, mean, repair_correlation(corr))


def _encode_float(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _decode_float(x) -> float:
    if isinstance(x, str):
        return float(x)
    return float(x)


def save_model(model: ErrorPmfModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_json(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> ErrorPmfModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    return model_from_json(doc)
