"""Strict CSV parsing for the chart tool.

Each chart kind reads exactly one column layout. The header must match
verbatim and every numeric cell must parse as a finite real; anything else
raises :class:`FrameError` naming the offending line and column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class FrameError(Exception):
    """Input file does not match the expected column layout."""


HEADERS = {
    "fig5a": "arch,delay_variation,word_error_rate",
    "fig5b": "arch,delay_variation,median_pdet,std_pdet",
    "fig5c": "arch,delay_variation,median_pdet,std_pdet",
    "fig6": "L,diversity,noise,bias_sq,variance,direct,se",
}

# Columns holding group labels or counts; everything else parses as float.
_STR_COLUMNS = frozenset({"arch"})
_INT_COLUMNS = frozenset({"L", "diversity", "instance"})


@dataclass(frozen=True)
class Frame:
    """Rows of one result CSV, cells already parsed per column."""

    columns: tuple[str, ...]
    rows: list[tuple]

    def column(self, name: str) -> list:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise FrameError(f"frame has no column {name!r}") from None
        return [row[idx] for row in self.rows]


def _parse_cell(name: str, text: str, where: str):
    if name in _STR_COLUMNS:
        return text
    try:
        value = int(text) if name in _INT_COLUMNS else float(text)
    except ValueError:
        raise FrameError(f"{where}: column {name!r}: bad value {text!r}") from None
    if not math.isfinite(value):
        raise FrameError(f"{where}: column {name!r}: value must be finite")
    return value


def load_frame(path, kind: str) -> Frame:
    if kind not in HEADERS:
        raise FrameError(f"unknown chart kind {kind!r}, expected one of {', '.join(HEADERS)}")
    expected = HEADERS[kind]
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    got = lines[0] if lines else ""
    if got != expected:
        raise FrameError(f"{path}: expected columns {expected!r}, got {got!r}")
    columns = tuple(expected.split(","))
    rows: list[tuple] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(columns):
            raise FrameError(
                f"{path}: line {lineno}: expected {len(columns)} columns, got {len(cells)}"
            )
        where = f"{path}: line {lineno}"
        rows.append(tuple(_parse_cell(n, c, where) for n, c in zip(columns, cells)))
    return Frame(columns, rows)


def series(frame: Frame, key_col: str, x_col: str, y_col: str):
    """Group rows by the key column, in first-appearance order.

    Returns a list of (key, xs, ys) with row order preserved inside each
    group, so sorted input files plot left to right without resorting.
    """
    keys = frame.column(key_col)
    xs = frame.column(x_col)
    ys = frame.column(y_col)
    order: list = []
    grouped: dict = {}
    for key, x, y in zip(keys, xs, ys):
        if key not in grouped:
            order.append(key)
            grouped[key] = ([], [])
        grouped[key][0].append(x)
        grouped[key][1].append(y)
    return [(key, grouped[key][0], grouped[key][1]) for key in order]
