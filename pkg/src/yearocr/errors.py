"""Exception hierarchy shared across the package.

``UserError`` subclasses mark problems the caller can fix (bad paths,
malformed manifests, mismatched counts); the CLI maps them to exit code 2.
Everything else surfaces as an internal error (exit code 1).
"""


class YearOcrError(Exception):
    """Base class for all package errors."""


class UserError(YearOcrError):
    """Invalid input the user can correct."""


class CorpusError(UserError):
    """Fatal problem with an on-disk corpus or manifest."""


class SynthesisError(UserError):
    """Synthetic string generation cannot proceed."""


class BundleError(UserError):
    """Model bundle is missing, corrupt, or schema-incompatible."""


class TrainingError(YearOcrError):
    """Training run failed (divergence, infeasible labels, empty corpus)."""


class MetricsError(YearOcrError):
    """Evaluation input is malformed."""
