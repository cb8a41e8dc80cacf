from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from ntvsim.fixedpoint import (
    FixedFormat,
    FixedWord,
    codes_to_patterns,
    compare,
    mac,
    mac_codes,
    patterns_to_codes,
    quantize,
    quantize_codes,
    round_half_even,
    to_real,
)

Q8_6 = FixedFormat(8, 6)


def mac_oracle(acc: FixedWord, a: FixedWord, b: FixedWord, out_fmt: FixedFormat) -> int:
    """Exact rational acc + a*b, one half-even rounding, then saturation."""
    exact = Fraction(acc.code, 1 << acc.fmt.frac_bits) + Fraction(
        a.code * b.code, 1 << (a.fmt.frac_bits + b.fmt.frac_bits)
    )
    code = round(exact * (1 << out_fmt.frac_bits))
    return min(max(code, out_fmt.min_code), out_fmt.max_code)


def _random_format(rng: np.random.Generator) -> FixedFormat:
    total = int(rng.integers(2, 17))
    frac = int(rng.integers(0, total))
    return FixedFormat(total, frac)


def _random_word(rng: np.random.Generator, fmt: FixedFormat) -> FixedWord:
    return FixedWord(int(rng.integers(fmt.min_code, fmt.max_code + 1)), fmt)


class TestFormat:
    def test_descriptor_roundtrip(self):
        fmt = FixedFormat.from_descriptor("Q10.4")
        assert (fmt.total_bits, fmt.frac_bits) == (10, 4)
        assert fmt.descriptor == "Q10.4"

    @pytest.mark.parametrize("text", ["Q1.0", "8.6", "Q8", "Q8.8", "Q33.1", "Q-2.1"])
    def test_bad_descriptor_rejected(self, text):
        with pytest.raises(ValueError):
            FixedFormat.from_descriptor(text)

    def test_bit_bounds(self):
        with pytest.raises(ValueError):
            FixedFormat(1, 0)
        with pytest.raises(ValueError):
            FixedFormat(8, 8)


class TestQuantize:
    def test_exact_half(self):
        assert quantize(0.5, Q8_6).code == 32

    def test_saturates_positive(self):
        assert quantize(100.0, Q8_6).code == Q8_6.max_code

    def test_saturates_negative(self):
        assert quantize(-100.0, Q8_6).code == Q8_6.min_code

    def test_most_negative_value(self):
        assert to_real(FixedWord(Q8_6.min_code, Q8_6)) == -2.0

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            quantize(float("nan"), Q8_6)

    def test_ties_to_even(self):
        # 1.5 ulp and 2.5 ulp above zero both land on the even code.
        fmt = FixedFormat(8, 4)
        assert quantize(1.5 / 16, fmt).code == 2
        assert quantize(2.5 / 16, fmt).code == 2
        assert quantize(-1.5 / 16, fmt).code == -2

    def test_roundtrip_error_bound(self):
        rng = np.random.default_rng(7)
        for _ in range(2000):
            fmt = _random_format(rng)
            span = fmt.max_code * fmt.resolution
            x = float(rng.uniform(-span, span))
            w = quantize(x, fmt)
            assert abs(to_real(w) - x) <= fmt.resolution / 2 + 1e-15

    def test_monotone(self):
        rng = np.random.default_rng(8)
        for _ in range(500):
            fmt = _random_format(rng)
            xs = np.sort(rng.uniform(-4.0, 4.0, size=8))
            codes = [quantize(float(x), fmt).code for x in xs]
            assert all(c1 <= c2 for c1, c2 in zip(codes, codes[1:]))

    def test_matches_vectorized(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            fmt = _random_format(rng)
            xs = rng.uniform(-5.0, 5.0, size=64)
            vec = quantize_codes(xs, fmt)
            ref = [quantize(float(x), fmt).code for x in xs]
            assert vec.tolist() == ref


class TestCompare:
    def test_tie_reports_one(self):
        w = quantize(0.25, Q8_6)
        assert compare(w, w) == 1

    def test_basic_order(self):
        lo, hi = quantize(0.1, Q8_6), quantize(0.9, Q8_6)
        assert compare(hi, lo) == 1
        assert compare(lo, hi) == 0

    def test_format_mismatch_rejected(self):
        with pytest.raises(ValueError):
            compare(quantize(0.0, Q8_6), quantize(0.0, FixedFormat(8, 5)))

    def test_duality_shifted_by_one_ulp(self):
        # compare(x, t) == 1 - compare(t + 1ulp, x) away from the adjacent-code
        # edge: at x exactly t + 1ulp both sides see equal codes and report 1.
        rng = np.random.default_rng(10)
        for _ in range(2000):
            fmt = _random_format(rng)
            xc = int(rng.integers(fmt.min_code, fmt.max_code + 1))
            tc = int(rng.integers(fmt.min_code, fmt.max_code))  # room for +1 ulp
            if xc == tc or xc == tc + 1:
                continue
            x, t = FixedWord(xc, fmt), FixedWord(tc, fmt)
            t_up = FixedWord(tc + 1, fmt)
            assert compare(x, t) == 1 - compare(t_up, x)


class TestMac:
    def test_identity_multiplicand(self):
        acc = quantize(0.25, Q8_6)
        a = quantize(0.5, Q8_6)
        one = quantize(1.0, Q8_6)
        assert to_real(mac(acc, a, one, Q8_6)) == pytest.approx(0.75)

    def test_accumulator_format_must_match(self):
        with pytest.raises(ValueError):
            mac(quantize(0.0, FixedFormat(8, 5)), quantize(0.1, Q8_6), quantize(0.1, Q8_6), Q8_6)

    def test_against_rational_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(10000):
            a_fmt = _random_format(rng)
            b_fmt = _random_format(rng)
            out_fmt = _random_format(rng)
            acc = _random_word(rng, out_fmt)
            a = _random_word(rng, a_fmt)
            b = _random_word(rng, b_fmt)
            got = mac(acc, a, b, out_fmt)
            assert got.code == mac_oracle(acc, a, b, out_fmt)
            assert got.fmt == out_fmt

    def test_single_rounding_not_two(self):
        # Product carries 14 fractional bits, output keeps 4: rounding the
        # product first and the sum second would land one code off.
        fmt_in = FixedFormat(8, 7)
        out = FixedFormat(8, 4)
        acc = FixedWord(0, out)
        a = FixedWord(4, fmt_in)   # 0.03125
        b = FixedWord(80, fmt_in)  # 0.625; product = 320/2^14 = 0.01953125
        got = mac(acc, a, b, out)
        assert got.code == mac_oracle(acc, a, b, out)

    def test_saturation_at_rails(self):
        out = FixedFormat(8, 6)
        acc = FixedWord(out.max_code, out)
        a = quantize(1.5, out)
        b = quantize(1.5, out)
        assert mac(acc, a, b, out).code == out.max_code
        neg = FixedWord(out.min_code, out)
        assert mac(neg, quantize(-1.5, out), b, out).code == out.min_code

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            a_fmt = _random_format(rng)
            b_fmt = _random_format(rng)
            out_fmt = _random_format(rng)
            n = 128
            acc = rng.integers(out_fmt.min_code, out_fmt.max_code + 1, size=n)
            a = rng.integers(a_fmt.min_code, a_fmt.max_code + 1, size=n)
            b = rng.integers(b_fmt.min_code, b_fmt.max_code + 1, size=n)
            vec = mac_codes(acc, a, a_fmt, b, b_fmt, out_fmt)
            ref = [
                mac(FixedWord(int(acc[i]), out_fmt), FixedWord(int(a[i]), a_fmt),
                    FixedWord(int(b[i]), b_fmt), out_fmt).code
                for i in range(n)
            ]
            assert vec.tolist() == ref


class TestBitPatterns:
    def test_pattern_roundtrip(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            fmt = _random_format(rng)
            w = _random_word(rng, fmt)
            assert FixedWord.from_bit_pattern(w.bit_pattern, fmt) == w

    def test_pattern_arrays_match_scalar(self):
        rng = np.random.default_rng(14)
        fmt = FixedFormat(10, 3)
        codes = rng.integers(fmt.min_code, fmt.max_code + 1, size=256)
        pats = codes_to_patterns(codes, fmt)
        assert patterns_to_codes(pats, fmt).tolist() == codes.tolist()
        for c, p in zip(codes[:32], pats[:32]):
            assert FixedWord(int(c), fmt).bit_pattern == int(p)


def test_round_half_even_small_cases():
    # 2.5 -> 2, 3.5 -> 4, -2.5 -> -2 at shift 1
    assert round_half_even(5, 1) == 2
    assert round_half_even(7, 1) == 4
    assert round_half_even(-5, 1) == -2
    assert round_half_even(6, 1) == 3
