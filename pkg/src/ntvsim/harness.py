"""Delay sweep: block error profiles, instance synthesis, CSV result contracts.

A profile pins, per delay point and per pipeline block, the per-bit flip
probabilities of that block's stored word. The bundled default interpolates
word error rates log-linearly in delay between endpoint anchors and spreads
each rate over the bits with a geometric taper, heaviest at the MSB (the
longest carry paths miss timing first). Sweep cells jitter the profile
lognormally per instance, classify the held-out split under injection, and
record one detection probability per (architecture, delay, instance) row;
medians and spreads land in a summary table.

Every random draw flows through a SeedSequence spawn key derived from the
master seed and the cell coordinates, so repeat runs and different worker
counts produce byte-identical result files.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ntvsim.analysis import DecompositionResult, decompose
from ntvsim.dataset import Dataset, split
from ntvsim.errormodel import ErrorPmfModel, synthesize
from ntvsim.errors import ParseError, SchemaError
from ntvsim.forest import (
    ForestConfig,
    ForestModel,
    classify_forest_batch,
    train_forest,
    tree_votes_batch,
)
from ntvsim.svm import SvmConfig, SvmModel, classify_fixed_batch, train_svm

ARCHITECTURES = ("SVM", "RF-M", "RF-W", "RF-EW")

SVM_STAGE1_BLOCK = "svm_stage1"
SVM_STAGE2_BLOCK = "svm_stage2"
RF_TREE_BLOCK = "rf_tree"

# Word error rates at the first and last delay point; interior points follow
# a straight line in log-rate over delay.
DELAY_POINTS = (0.028, 0.06, 0.10, 0.15, 0.20, 0.25, 0.29, 0.33)
SVM_RATE_ANCHORS = (2.1e-3, 0.99)
RF_RATE_ANCHORS = (1.1e-3, 0.61)

# Per-tree rates are quoted at an 8-bit tree word; a B-bit tree scales the
# rate by 2^(B-8), clamped into [0, 1].
BASE_TREE_BITS = 8
JITTER_SIGMA = 0.5

RESULTS_HEADER = "arch,delay_variation,instance,p_det"
SUMMARY_HEADER = "arch,delay_variation,median_pdet,std_pdet"
RATES_HEADER = "arch,delay_variation,word_error_rate"
DECOMP_HEADER = "L,diversity,noise,bias_sq,variance,direct,se"

_DOMAIN_SPLIT = 0
_DOMAIN_TRAIN = 1
_DOMAIN_CELL = 2
_DOMAIN_DECOMP = 3


def seed_stream(seed: int, *key: int) -> np.random.Generator:
    """Generator keyed by (seed, coordinates); order of creation is irrelevant."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


# --- profiles ---------------------------------------------------------------

@dataclass(frozen=True)
class BlockErrors:
    """Per-bit flip probabilities of one stored word at one delay point."""

    block_id: str
    width: int
    bit_probs: np.ndarray
    bit_corr: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "bit_probs", np.asarray(self.bit_probs, dtype=np.float64)
        )
        if not self.block_id:
            raise ValueError("block id must be non-empty")
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        if self.bit_probs.shape != (self.width,):
            raise ValueError(
                f"block {self.block_id!r}: expected {self.width} bit probabilities, "
                f"got shape {self.bit_probs.shape}"
            )
        if np.any((self.bit_probs < 0.0) | (self.bit_probs > 1.0)):
            raise ValueError(f"block {self.block_id!r}: bit probabilities must lie in [0, 1]")
        if not -1.0 <= self.bit_corr <= 1.0:
            raise ValueError(f"block {self.block_id!r}: bit correlation must lie in [-1, 1]")

    def word_error_rate(self) -> float:
        """Rate at which the whole word is hit, under independent bits."""
        return float(1.0 - np.prod(1.0 - self.bit_probs))


@dataclass(frozen=True)
class ProfilePoint:
    delay_variation: float
    blocks: tuple[BlockErrors, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.delay_variation > 0.0:
            raise ValueError(
                f"delay variation must be positive, got {self.delay_variation}"
            )
        ids = [b.block_id for b in self.blocks]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate block ids at delay {self.delay_variation:g}")

    def block(self, block_id: str) -> BlockErrors:
        for b in self.blocks:
            if b.block_id == block_id:
                return b
        raise SchemaError(
            f"profile point {self.delay_variation:g} has no block {block_id!r}"
        )


@dataclass(frozen=True)
class ErrorProfile:
    points: tuple[ProfilePoint, ...]
    provenance: str = "synthetic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        delays = [pt.delay_variation for pt in self.points]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("profile points must have strictly increasing delay variation")


def _log_linear(d: float, d0: float, r0: float, d1: float, r1: float) -> float:
    t = (d - d0) / (d1 - d0)
    return math.exp((1.0 - t) * math.log(r0) + t * math.log(r1))


def msb_weighted_probs(width: int, word_rate: float) -> np.ndarray:
    """Per-bit probabilities halving from MSB toward LSB (bit 0 = LSB) whose
    independent-bits word rate equals ``word_rate`` exactly."""
    if not 0.0 <= word_rate <= 1.0:
        raise ValueError(f"word rate must lie in [0, 1], got {word_rate}")
    if word_rate == 0.0:
        return np.zeros(width)
    weights = 2.0 ** (np.arange(width) - (width - 1))

    def gap(c: float) -> float:
        return 1.0 - float(np.prod(1.0 - np.minimum(c * weights, 1.0))) - word_rate

    # The rate lies between the MSB probability c and the sum of all bit
    # probabilities (< 2c), so [rate/2, rate] always brackets the root.
    c = brentq(gap, word_rate / 2.0, word_rate)
    return np.minimum(c * weights, 1.0)


def default_profile() -> ErrorProfile:
    """Synthetic stress profile over eight delay points.

    SVM stage words and tree output words take separate rate anchors; both
    SVM blocks share the per-word rate at each point.
    """
    svm_cfg = SvmConfig()
    d0, d1 = DELAY_POINTS[0], DELAY_POINTS[-1]
    points = []
    for d in DELAY_POINTS:
        svm_rate = _log_linear(d, d0, SVM_RATE_ANCHORS[0], d1, SVM_RATE_ANCHORS[1])
        rf_rate = _log_linear(d, d0, RF_RATE_ANCHORS[0], d1, RF_RATE_ANCHORS[1])
        points.append(
            ProfilePoint(
                d,
                (
                    BlockErrors(
                        SVM_STAGE1_BLOCK,
                        svm_cfg.stage1_bits,
                        msb_weighted_probs(svm_cfg.stage1_bits, svm_rate),
                    ),
                    BlockErrors(
                        SVM_STAGE2_BLOCK,
                        svm_cfg.acc_bits,
                        msb_weighted_probs(svm_cfg.acc_bits, svm_rate),
                    ),
                    BlockErrors(RF_TREE_BLOCK, 1, np.array([rf_rate])),
                ),
            )
        )
    return ErrorProfile(tuple(points))


def profile_to_json(profile: ErrorProfile) -> dict:
    return {
        "kind": "error-profile",
        "provenance": profile.provenance,
        "points": [
            {
                "delay_variation": float(pt.delay_variation),
                "blocks": [
                    {
                        "id": b.block_id,
                        "width": int(b.width),
                        "bit_probs": [float(p) for p in b.bit_probs],
                        "bit_corr": float(b.bit_corr),
                    }
                    for b in pt.blocks
                ],
            }
            for pt in profile.points
        ],
    }


def profile_from_json(doc: dict) -> ErrorProfile:
    try:
        if doc["kind"] != "error-profile":
            raise ParseError(f"expected kind 'error-profile', got {doc['kind']!r}")
        points = []
        for pt in doc["points"]:
            blocks = tuple(
                BlockErrors(
                    b["id"],
                    int(b["width"]),
                    np.asarray(b["bit_probs"], dtype=np.float64),
                    float(b.get("bit_corr", 0.0)),
                )
                for b in pt["blocks"]
            )
            points.append(ProfilePoint(float(pt["delay_variation"]), blocks))
        return ErrorProfile(tuple(points), str(doc.get("provenance", "unknown")))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed error profile: {exc}") from exc


def save_profile(profile: ErrorProfile, path) -> None:
    with open(path, "w") as fh:
        json.dump(profile_to_json(profile), fh, indent=2)
        fh.write("\n")


def load_profile(path) -> ErrorProfile:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    return profile_from_json(doc)


# --- per-instance error models ----------------------------------------------

@dataclass(frozen=True)
class InstanceErrors:
    """Error models drawn for one sweep cell: either the two SVM stage blocks
    or one width-1 model per tree plus the rates behind them."""

    stage1: ErrorPmfModel | None = None
    stage2: ErrorPmfModel | None = None
    tree_models: list[ErrorPmfModel] | None = None
    tree_rates: np.ndarray | None = None


def _jitter_probs(
    probs: np.ndarray, rng: np.random.Generator, sigma: float
) -> np.ndarray:
    if sigma == 0.0:
        return probs.copy()
    return np.clip(probs * rng.lognormal(0.0, sigma, size=probs.shape), 0.0, 1.0)


def tree_error_models(
    model: ForestModel,
    block: BlockErrors,
    rng: np.random.Generator,
    jitter_sigma: float = JITTER_SIGMA,
) -> tuple[list[ErrorPmfModel], np.ndarray]:
    """Per-tree output-flip models: block word rate, jittered per tree, scaled
    by 2^(B-8) for a B-bit tree, clamped into [0, 1]."""
    base = block.word_error_rate()
    n = model.n_trees
    factors = np.ones(n) if jitter_sigma == 0.0 else rng.lognormal(0.0, jitter_sigma, size=n)
    rates = np.empty(n)
    for l, ct in enumerate(model.trees):
        scale = 2.0 ** (ct.fmt.total_bits - BASE_TREE_BITS)
        rates[l] = min(max(base * factors[l] * scale, 0.0), 1.0)
    models = [synthesize(np.array([r]), 0.0) for r in rates]
    return models, rates


def tree_error_factory(block: BlockErrors, jitter_sigma: float = JITTER_SIGMA):
    """Adapter for the variance experiments: (model, rng) -> per-tree models."""

    def factory(model: ForestModel, rng: np.random.Generator) -> list[ErrorPmfModel]:
        models, _ = tree_error_models(model, block, rng, jitter_sigma)
        return models

    return factory


def instantiate(
    arch: str,
    point: ProfilePoint,
    model: SvmModel | ForestModel,
    rng: np.random.Generator,
    jitter_sigma: float = JITTER_SIGMA,
) -> InstanceErrors:
    """Draw one instance's error models from a profile point."""
    if arch not in ARCHITECTURES:
        raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {arch!r}")
    if arch == "SVM":
        s1 = point.block(SVM_STAGE1_BLOCK)
        s2 = point.block(SVM_STAGE2_BLOCK)
        fmts = model.formats
        if s1.width != fmts.stage1_fmt.total_bits:
            raise SchemaError(
                f"block {SVM_STAGE1_BLOCK!r} is {s1.width} bits wide but the model "
                f"stores {fmts.stage1_fmt.total_bits}-bit stage words"
            )
        if s2.width != fmts.acc_fmt.total_bits:
            raise SchemaError(
                f"block {SVM_STAGE2_BLOCK!r} is {s2.width} bits wide but the model "
                f"stores a {fmts.acc_fmt.total_bits}-bit accumulator word"
            )
        return InstanceErrors(
            stage1=synthesize(_jitter_probs(s1.bit_probs, rng, jitter_sigma), s1.bit_corr),
            stage2=synthesize(_jitter_probs(s2.bit_probs, rng, jitter_sigma), s2.bit_corr),
        )
    blk = point.block(RF_TREE_BLOCK)
    if blk.width != 1:
        raise SchemaError(f"block {RF_TREE_BLOCK!r} must be 1 bit wide, got {blk.width}")
    models, rates = tree_error_models(model, blk, rng, jitter_sigma)
    return InstanceErrors(tree_models=models, tree_rates=rates)


# --- sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    architectures: tuple[str, ...] = ARCHITECTURES
    n_instances: int = 30
    n_trees: int = 10
    tree_precision: str = "Q8.7"
    ratio: float = 0.5
    seed: int = 0
    jitter_sigma: float = JITTER_SIGMA
    workers: int = 1
    svm: SvmConfig = field(default_factory=SvmConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "architectures", tuple(self.architectures))
        for arch in self.architectures:
            if arch not in ARCHITECTURES:
                raise ValueError(
                    f"architecture must be one of {ARCHITECTURES}, got {arch!r}"
                )
        if len(set(self.architectures)) != len(self.architectures):
            raise ValueError("architectures must not repeat")
        if self.n_instances < 1:
            raise ValueError(f"n_instances must be >= 1, got {self.n_instances}")
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"ratio must lie in (0, 1), got {self.ratio}")
        if self.jitter_sigma < 0.0:
            raise ValueError(f"jitter sigma must be >= 0, got {self.jitter_sigma}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        ForestConfig(n_trees=self.n_trees, precision=self.tree_precision)


@dataclass(frozen=True)
class SweepRow:
    arch: str
    delay_variation: float
    instance: int
    p_det: float


@dataclass(frozen=True)
class SummaryRow:
    arch: str
    delay_variation: float
    median_pdet: float
    std_pdet: float


@dataclass(frozen=True)
class RateRow:
    arch: str
    delay_variation: float
    word_error_rate: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    summary: list[SummaryRow]
    rates: list[RateRow]
    config: SweepConfig
    profile: ErrorProfile


def summarize(rows: list[SweepRow]) -> list[SummaryRow]:
    """Median and sample deviation per (arch, delay) group, encounter order.

    A single-instance group has no sample deviation; 0.0 stands in.
    """
    groups: dict[tuple[str, float], list[float]] = {}
    order: list[tuple[str, float]] = []
    for row in rows:
        key = (row.arch, row.delay_variation)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row.p_det)
    out = []
    for arch, delay in order:
        vals = np.asarray(groups[(arch, delay)])
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out.append(SummaryRow(arch, delay, float(np.median(vals)), std))
    return out


def word_rate_rows(profile: ErrorProfile) -> list[RateRow]:
    """Per-word nominal error rate of the SVM stage-1 word and the tree output
    word at each profile point, for the rate-vs-delay chart."""
    out = []
    for arch, block_id in (("SVM", SVM_STAGE1_BLOCK), ("RF", RF_TREE_BLOCK)):
        for pt in profile.points:
            for b in pt.blocks:
                if b.block_id == block_id:
                    out.append(RateRow(arch, pt.delay_variation, b.word_error_rate()))
                    break
    return out


def _cell_pdet(
    arch: str,
    view: SvmModel | ForestModel,
    inst: InstanceErrors | None,
    features: np.ndarray,
    truth: np.ndarray,
    rng: np.random.Generator | None,
) -> float:
    if arch == "SVM":
        stage1 = None if inst is None else inst.stage1
        stage2 = None if inst is None else inst.stage2
        pred = classify_fixed_batch(view, features, stage1, stage2, rng)
    else:
        model = view
        errors = None
        if inst is not None:
            errors = inst.tree_models
            if arch == "RF-EW":
                model = view.with_error_rates(inst.tree_rates)
        pred = classify_forest_batch(model, features, errors, rng)
    return float((pred == truth).mean())


def run_sweep(
    cfg: SweepConfig, ds: Dataset, profile: ErrorProfile | None = None
) -> SweepResult:
    """Train once, then classify the held-out split per sweep cell.

    All RF variants share one trained ensemble and differ only in the voter;
    RF-EW weighs with the cell's true per-tree rates. Row order is
    architecture-major, then delay ascending with the error-free baseline at
    delay 0 first, then instance.
    """
    if profile is None:
        profile = default_profile()
    rates = word_rate_rows(profile)
    if not cfg.architectures:
        return SweepResult([], [], rates, cfg, profile)

    train_ds, test_ds = split(ds, cfg.ratio, seed_stream(cfg.seed, _DOMAIN_SPLIT))
    features, truth = test_ds.features, test_ds.labels

    views: dict[str, SvmModel | ForestModel] = {}
    if "SVM" in cfg.architectures:
        views["SVM"] = train_svm(train_ds, cfg.svm, seed_stream(cfg.seed, _DOMAIN_TRAIN, 0))
    if any(arch != "SVM" for arch in cfg.architectures):
        forest = train_forest(
            train_ds,
            ForestConfig(n_trees=cfg.n_trees, precision=cfg.tree_precision),
            seed_stream(cfg.seed, _DOMAIN_TRAIN, 1),
        )
        for arch, kind in (
            ("RF-M", "majority"),
            ("RF-W", "weighted"),
            ("RF-EW", "error-weighted"),
        ):
            if arch in cfg.architectures:
                views[arch] = forest.with_voter(kind)

    baseline = {
        arch: _cell_pdet(arch, views[arch], None, features, truth, None)
        for arch in cfg.architectures
    }

    points = list(profile.points)

    def run_cell(key: tuple[int, int, int]) -> float:
        ai, pi, ii = key
        arch = ARCHITECTURES[ai]
        rng = seed_stream(cfg.seed, _DOMAIN_CELL, ai, pi, ii)
        inst = instantiate(arch, points[pi], views[arch], rng, cfg.jitter_sigma)
        return _cell_pdet(arch, views[arch], inst, features, truth, rng)

    keys = [
        (ARCHITECTURES.index(arch), pi, ii)
        for arch in cfg.architectures
        for pi in range(len(points))
        for ii in range(cfg.n_instances)
    ]
    if cfg.workers > 1 and keys:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            values = list(pool.map(run_cell, keys))
    else:
        values = [run_cell(key) for key in keys]
    cell_pdet = dict(zip(keys, values))

    rows = []
    for arch in cfg.architectures:
        ai = ARCHITECTURES.index(arch)
        for ii in range(cfg.n_instances):
            rows.append(SweepRow(arch, 0.0, ii, baseline[arch]))
        for pi, pt in enumerate(points):
            for ii in range(cfg.n_instances):
                rows.append(SweepRow(arch, pt.delay_variation, ii, cell_pdet[(ai, pi, ii)]))
    return SweepResult(rows, summarize(rows), rates, cfg, profile)


# --- result files -----------------------------------------------------------

def _fmt(x: float) -> str:
    # repr of a Python float is the shortest string that parses back exactly,
    # so summaries recomputed from a results file match bit for bit.
    return repr(float(x))


def results_text(rows: list[SweepRow]) -> str:
    lines = [RESULTS_HEADER]
    lines += [
        f"{r.arch},{_fmt(r.delay_variation)},{r.instance},{_fmt(r.p_det)}" for r in rows
    ]
    return "\n".join(lines) + "\n"


def summary_text(summary: list[SummaryRow]) -> str:
    lines = [SUMMARY_HEADER]
    lines += [
        f"{r.arch},{_fmt(r.delay_variation)},{_fmt(r.median_pdet)},{_fmt(r.std_pdet)}"
        for r in summary
    ]
    return "\n".join(lines) + "\n"


def rates_text(rates: list[RateRow]) -> str:
    lines = [RATES_HEADER]
    lines += [
        f"{r.arch},{_fmt(r.delay_variation)},{_fmt(r.word_error_rate)}" for r in rates
    ]
    return "\n".join(lines) + "\n"


def write_results(
    result: SweepResult, results_path, summary_path, rates_path=None
) -> None:
    """Write the raw per-instance rows and the summary table (and, when a path
    is given, the per-word rate table). Empty sweeps write header-only files."""
    with open(results_path, "w") as fh:
        fh.write(results_text(result.rows))
    with open(summary_path, "w") as fh:
        fh.write(summary_text(result.summary))
    if rates_path is not None:
        with open(rates_path, "w") as fh:
            fh.write(rates_text(result.rates))


def read_results(path) -> list[SweepRow]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        got = lines[0] if lines else "<empty file>"
        raise SchemaError(f"{path}: expected header {RESULTS_HEADER!r}, got {got!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != 4:
            raise SchemaError(f"{path}: line {lineno}: expected 4 columns, got {len(cells)}")
        try:
            row = SweepRow(cells[0], float(cells[1]), int(cells[2]), float(cells[3]))
        except ValueError as exc:
            raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
        if not 0.0 <= row.p_det <= 1.0:
            raise SchemaError(f"{path}: line {lineno}: p_det must lie in [0, 1]")
        if row.delay_variation < 0.0:
            raise SchemaError(f"{path}: line {lineno}: delay variation must be >= 0")
        rows.append(row)
    return rows


# --- decomposition tables ---------------------------------------------------

@dataclass(frozen=True)
class DecompositionRow:
    n_trees: int
    diverse: bool
    result: DecompositionResult


def decomposition_text(rows: list[DecompositionRow]) -> str:
    lines = [DECOMP_HEADER]
    for row in rows:
        r = row.result
        lines.append(
            f"{row.n_trees},{int(row.diverse)},{_fmt(r.noise)},{_fmt(r.bias_sq)},"
            f"{_fmt(r.variance)},{_fmt(r.generalized_error)},{_fmt(r.se_variance)}"
        )
    return "\n".join(lines) + "\n"


def point_at(profile: ErrorProfile, delay_variation: float) -> ProfilePoint:
    for pt in profile.points:
        if abs(pt.delay_variation - delay_variation) <= 1e-12:
            return pt
    known = ", ".join(f"{pt.delay_variation:g}" for pt in profile.points)
    raise SchemaError(
        f"profile has no point at delay {delay_variation:g} (points: {known})"
    )


def _resample(ds: Dataset, rng: np.random.Generator) -> Dataset:
    idx = rng.integers(0, ds.n_rows, size=ds.n_rows)
    return Dataset(ds.features[idx], ds.labels[idx], ds.scaling)


def _forest_predictor(
    train_ds: Dataset,
    test_features: np.ndarray,
    cfg: ForestConfig,
    block: BlockErrors | None,
    jitter_sigma: float,
):
    cache: dict[int, ForestModel] = {}

    def predict(r: int, d: int, rng: np.random.Generator) -> np.ndarray:
        model = cache.get(r)
        if model is None:
            model = train_forest(_resample(train_ds, rng), cfg, rng)
            cache[r] = model
        errors = None
        if block is not None:
            errors, _ = tree_error_models(model, block, rng, jitter_sigma)
        votes = tree_votes_batch(model, test_features, errors, None if errors is None else rng)
        return votes.mean(axis=0)

    return predict


def decomposition_table(
    ds: Dataset,
    l_values: list[int],
    *,
    profile: ErrorProfile | None = None,
    delay_variation: float = 0.29,
    include_diverse: bool = False,
    n_resamples: int = 20,
    n_error_draws: int = 5,
    ratio: float = 0.5,
    seed: int = 0,
    label_flip_prob: float = 0.0,
    jitter_sigma: float = JITTER_SIGMA,
    tree_precision: str = "Q8.7",
) -> list[DecompositionRow]:
    """Squared-error decomposition of the ensemble-average output per ensemble
    size, at one profile point (``delay_variation == 0`` means no injection)."""
    if profile is None:
        profile = default_profile()
    block = None
    if delay_variation != 0.0:
        block = point_at(profile, delay_variation).block(RF_TREE_BLOCK)
    train_ds, test_ds = split(ds, ratio, seed_stream(seed, _DOMAIN_SPLIT))
    rows = []
    for l in l_values:
        for diverse in (False, True) if include_diverse else (False,):
            cfg = ForestConfig(
                n_trees=l, precision="diverse" if diverse else tree_precision
            )
            predict = _forest_predictor(
                train_ds, test_ds.features, cfg, block, jitter_sigma
            )
            res = decompose(
                predict,
                test_ds.labels,
                n_resamples,
                n_error_draws,
                seed_stream(seed, _DOMAIN_DECOMP, l, int(diverse)),
                label_flip_prob=label_flip_prob,
            )
            rows.append(DecompositionRow(l, diverse, res))
    return rows
