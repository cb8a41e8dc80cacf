"""Exception and warning types shared across the package."""

from __future__ import annotations


class NtvsimError(Exception):
    """Base class for package-specific failures."""


class ParseError(NtvsimError):
    """A text input (CSV or config document) could not be parsed."""


class SchemaError(NtvsimError):
    """A parsed document does not match the expected column/field layout."""


class SplitError(NtvsimError):
    """A requested dataset split cannot preserve class stratification."""


class TrainingFailed(NtvsimError):
    """A solver failed to converge or produced an unusable model."""


class UnsupportedTreeError(NtvsimError):
    """A compiled tree exceeds the configured LUT materialization cap."""


class DegenerateWeightsWarning(UserWarning):
    """All voter weights were zero; the vote fell back to unweighted majority."""
