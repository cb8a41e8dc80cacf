"""Fixed-point classifier ensembles under correlated timing-error injection."""

from ntvsim.dataset import Dataset, FeatureScaling, load_wdbc, save_wdbc, split
from ntvsim.errormodel import (
    ErrorPmfModel,
    fit,
    inject,
    load_model,
    orthant2,
    pmf,
    sample,
    sample_batch,
    save_model,
    synthesize,
)
from ntvsim.errors import (
    NtvsimError,
    ParseError,
    SchemaError,
    SplitError,
    TrainingFailed,
    UnsupportedTreeError,
)
from ntvsim.fixedpoint import FixedFormat, FixedWord, compare, mac, quantize, to_real
from ntvsim.forest import (
    ForestConfig,
    ForestModel,
    classify_forest,
    classify_forest_batch,
    load_forest,
    save_forest,
    train_forest,
)
from ntvsim.harness import (
    ErrorProfile,
    SweepConfig,
    SweepResult,
    decomposition_table,
    default_profile,
    load_profile,
    read_results,
    run_sweep,
    save_profile,
    summarize,
    write_results,
)
from ntvsim.svm import (
    SvmConfig,
    SvmModel,
    classify_fixed,
    classify_fixed_batch,
    load_svm,
    save_svm,
    train_svm,
)
from ntvsim.voting import (
    VoterWeights,
    error_weights,
    majority_vote,
    map_vote,
    weighted_vote,
)

__all__ = [
    "Dataset",
    "ErrorPmfModel",
    "ErrorProfile",
    "FeatureScaling",
    "FixedFormat",
    "FixedWord",
    "ForestConfig",
    "ForestModel",
    "NtvsimError",
    "ParseError",
    "SchemaError",
    "SplitError",
    "SvmConfig",
    "SvmModel",
    "SweepConfig",
    "SweepResult",
    "TrainingFailed",
    "UnsupportedTreeError",
    "VoterWeights",
    "classify_fixed",
    "classify_fixed_batch",
    "classify_forest",
    "classify_forest_batch",
    "compare",
    "decomposition_table",
    "default_profile",
    "error_weights",
    "fit",
    "inject",
    "load_forest",
    "load_model",
    "load_profile",
    "load_svm",
    "load_wdbc",
    "mac",
    "majority_vote",
    "map_vote",
    "orthant2",
    "pmf",
    "quantize",
    "read_results",
    "run_sweep",
    "sample",
    "sample_batch",
    "save_forest",
    "save_model",
    "save_profile",
    "save_svm",
    "save_wdbc",
    "split",
    "summarize",
    "synthesize",
    "to_real",
    "train_forest",
    "train_svm",
    "weighted_vote",
    "write_results",
]
