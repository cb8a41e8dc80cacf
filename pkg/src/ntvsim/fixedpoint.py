"""Two's-complement fixed-point words and the saturating MAC used by the datapaths.

Values are stored as signed integer codes; a format ``Q<B>.<F>`` has ``B`` total
bits (one of them sign) and ``F`` fractional bits, so a code ``k`` represents the
real number ``k * 2**-F``. Quantization rounds to nearest with ties to even and
saturates at both rails. The MAC computes ``acc + a*b`` exactly in a wide
intermediate and applies a single round/saturate into the output format, which
is the reference behavior the error-injection pipelines rely on.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

_DESCRIPTOR_RE = re.compile(r"^Q(\d+)\.(\d+)$")


@dataclass(frozen=True)
class FixedFormat:
    total_bits: int
    frac_bits: int

    def __post_init__(self) -> None:
        if not 2 <= self.total_bits <= 32:
            raise ValueError(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError(
                f"frac_bits must be in [0, {self.total_bits - 1}], got {self.frac_bits}"
            )

    @property
    def min_code(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_code(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def descriptor(self) -> str:
        return f"Q{self.total_bits}.{self.frac_bits}"

    @classmethod
    def from_descriptor(cls, text: str) -> "FixedFormat":
        m = _DESCRIPTOR_RE.match(text.strip())
        if m is None:
            raise ValueError(f"bad format descriptor {text!r}, expected 'Q<B>.<F>'")
        return cls(int(m.group(1)), int(m.group(2)))


@dataclass(frozen=True)
class FixedWord:
    code: int
    fmt: FixedFormat

    def __post_init__(self) -> None:
        if not self.fmt.min_code <= self.code <= self.fmt.max_code:
            raise ValueError(
                f"code {self.code} out of range for {self.fmt.descriptor}"
            )

    @property
    def value(self) -> float:
        return self.code * 2.0 ** -self.fmt.frac_bits

    @property
    def bit_pattern(self) -> int:
        """Unsigned two's-complement pattern, the view the injection path XORs."""
        return self.code & ((1 << self.fmt.total_bits) - 1)

    @classmethod
    def from_bit_pattern(cls, pattern: int, fmt: FixedFormat) -> "FixedWord":
        if not 0 <= pattern < (1 << fmt.total_bits):
            raise ValueError(f"pattern {pattern} does not fit in {fmt.total_bits} bits")
        if pattern > fmt.max_code:
            pattern -= 1 << fmt.total_bits
        return cls(pattern, fmt)


def _saturate(code: int, fmt: FixedFormat) -> int:
    if code > fmt.max_code:
        return fmt.max_code
    if code < fmt.min_code:
        return fmt.min_code
    return code


def round_half_even(num: int, shift: int) -> int:
    """Round ``num / 2**shift`` to the nearest integer, ties to even."""
    if shift < 0:
        raise ValueError("shift must be non-negative")
    if shift == 0:
        return num
    q = num >> shift
    r = num - (q << shift)
    half = 1 << (shift - 1)
    if r > half or (r == half and (q & 1)):
        return q + 1
    return q


def quantize(x: float, fmt: FixedFormat) -> FixedWord:
    """Round ``x`` to the nearest code (ties to even), saturating at the rails."""
    if math.isnan(x):
        raise ValueError("cannot quantize NaN")
    if math.isinf(x):
        return FixedWord(fmt.max_code if x > 0 else fmt.min_code, fmt)
    # Fraction is exact for finite floats and round() on it is half-to-even.
    code = round(Fraction(x) * (1 << fmt.frac_bits))
    return FixedWord(_saturate(code, fmt), fmt)


def to_real(w: FixedWord) -> float:
    return w.value


def compare(x: FixedWord, t: FixedWord) -> int:
    """Hardware comparator bit: 1 iff x >= t. Ties report 1."""
    if x.fmt != t.fmt:
        raise ValueError(
            f"comparator operands must share a format, got {x.fmt.descriptor} vs {t.fmt.descriptor}"
        )
    return 1 if x.code >= t.code else 0


def mac(acc: FixedWord, a: FixedWord, b: FixedWord, out_fmt: FixedFormat) -> FixedWord:
    """acc + a*b with one rounding: the product is kept exact until the final
    round/saturate into ``out_fmt``. The accumulator must already carry ``out_fmt``."""
    if acc.fmt != out_fmt:
        raise ValueError(
            f"accumulator format {acc.fmt.descriptor} must equal output format {out_fmt.descriptor}"
        )
    prod_frac = a.fmt.frac_bits + b.fmt.frac_bits
    shift = out_fmt.frac_bits - prod_frac
    if shift >= 0:
        code = acc.code + (a.code * b.code << shift)
    else:
        code = round_half_even((acc.code << -shift) + a.code * b.code, -shift)
    return FixedWord(_saturate(code, out_fmt), out_fmt)


# Vectorized helpers for the batched classification paths. These operate on
# int64 code arrays and mirror the scalar ops bit for bit.

def quantize_codes(x: np.ndarray, fmt: FixedFormat) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise ValueError("cannot quantize NaN")
    # Scaling by a power of two is exact, so np.round sees the true ties and
    # resolves them to even exactly like the scalar path.
    scaled = np.round(x * float(1 << fmt.frac_bits))
    scaled = np.clip(scaled, fmt.min_code, fmt.max_code)
    return scaled.astype(np.int64)


def _round_half_even_codes(num: np.ndarray, shift: int) -> np.ndarray:
    if shift == 0:
        return num
    q = num >> shift
    r = num - (q << shift)
    half = 1 << (shift - 1)
    up = (r > half) | ((r == half) & ((q & 1) == 1))
    return q + up.astype(num.dtype)


def mac_codes(
    acc_codes: np.ndarray,
    a_codes: np.ndarray,
    a_fmt: FixedFormat,
    b_codes: np.ndarray,
    b_fmt: FixedFormat,
    out_fmt: FixedFormat,
) -> np.ndarray:
    """Vectorized ``mac`` over int64 code arrays (accumulator already in out_fmt)."""
    prod = np.asarray(a_codes, dtype=np.int64) * np.asarray(b_codes, dtype=np.int64)
    shift = out_fmt.frac_bits - (a_fmt.frac_bits + b_fmt.frac_bits)
    if shift >= 0:
        code = acc_codes + (prod << shift)
    else:
        code = _round_half_even_codes((acc_codes << -shift) + prod, -shift)
    return np.clip(code, out_fmt.min_code, out_fmt.max_code)


def codes_to_patterns(codes: np.ndarray, fmt: FixedFormat) -> np.ndarray:
    return codes & ((1 << fmt.total_bits) - 1)


def patterns_to_codes(patterns: np.ndarray, fmt: FixedFormat) -> np.ndarray:
    wrap = np.where(patterns > fmt.max_code, 1 << fmt.total_bits, 0)
    return patterns - wrap
