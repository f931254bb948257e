"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to distinct
process exit statuses without a lookup table living elsewhere.
"""

from __future__ import annotations


class CfkmError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    kind = "error"

    def to_record(self) -> dict:
        return {"error": self.kind, "message": str(self), "exit_code": self.exit_code}


class ValidationError(CfkmError, ValueError):
    """Bad input. ``row`` and ``column`` locate the problem in a file when known."""

    exit_code = 10
    kind = "validation"

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column

    def to_record(self) -> dict:
        rec = super().to_record()
        if self.row is not None:
            rec["row"] = self.row
        if self.column is not None:
            rec["column"] = self.column
        return rec


class EmptySampleError(ValidationError):
    exit_code = 11
    kind = "empty_sample"


class NegativeDurationError(ValidationError):
    exit_code = 12
    kind = "negative_duration"


class InvalidCensoringError(ValidationError):
    exit_code = 13
    kind = "invalid_censoring"


class RaggedCovariatesError(ValidationError):
    exit_code = 14
    kind = "ragged_covariates"


class GridError(ValidationError):
    exit_code = 15
    kind = "grid"


class SchemaError(ValidationError):
    """CSV header or cell problems; ``row`` counts data rows from 1, header excluded."""

    exit_code = 16
    kind = "schema"


class DimensionMismatchError(ValidationError):
    exit_code = 17
    kind = "dimension_mismatch"


class ConfigError(ValidationError):
    exit_code = 18
    kind = "config"


class EmptyNeighborhoodError(CfkmError):
    """No usable kernel mass around a query point.

    ``row`` is the index of the offending query (e.g. the counterfactual row)
    when the caller knows it.
    """

    exit_code = 20
    kind = "empty_neighborhood"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row

    def to_record(self) -> dict:
        rec = super().to_record()
        rec["row"] = self.row
        return rec


class HazardDivergenceError(CfkmError):
    exit_code = 21
    kind = "hazard_divergence"


class GuardViolationError(CfkmError):
    exit_code = 22
    kind = "guard_violation"


class QuadratureError(CfkmError):
    exit_code = 23
    kind = "quadrature"


class EstimationFailure(CfkmError):
    """A replication of the simulation study failed in fail-fast mode."""

    exit_code = 24
    kind = "estimation_failure"
