"""Exception hierarchy shared by all weylkit modules.

Every error carries a stable ``error_id`` so that the command line front end
can report which check failed without parsing messages.
"""

from __future__ import annotations


class WeylkitError(Exception):
    """Base class for all library errors."""

    error_id = "WeylkitError"


class ConfigError(WeylkitError):
    error_id = "ConfigError"


class NumericFailure(WeylkitError):
    """Base class for failures of a numerical check or computation."""

    error_id = "NumericFailure"


class ConsistencyError(NumericFailure):
    error_id = "ConsistencyError"


# blockspace
class NonHermitian(NumericFailure):
    error_id = "NonHermitian"


# propagator
class IntegratorFailure(NumericFailure):
    error_id = "IntegratorFailure"


class IndeterminateMode(NumericFailure):
    error_id = "IndeterminateMode"


# boundary
class RelationViolated(NumericFailure):
    error_id = "RelationViolated"

    def __init__(self, relation: str, residual: float):
        super().__init__(f"relation {relation} violated (residual {residual:.3e})")
        self.relation = relation
        self.residual = residual


class ExtensionFailure(NumericFailure):
    error_id = "ExtensionFailure"


class UnsupportedEndpoint(NumericFailure):
    error_id = "UnsupportedEndpoint"


class OutOfScope(NumericFailure):
    error_id = "OutOfScope"


class CaseMismatch(NumericFailure):
    error_id = "CaseMismatch"


# weyl
class SingularBoundaryMatrix(NumericFailure):
    error_id = "SingularBoundaryMatrix"


class ShapeMismatch(NumericFailure):
    error_id = "ShapeMismatch"


class IllPosedParameter(NumericFailure):
    error_id = "IllPosedParameter"


class PreconditionFailed(NumericFailure):
    error_id = "PreconditionFailed"


# spectral
class NonMonotone(NumericFailure):
    error_id = "NonMonotone"


class NoConvergence(NumericFailure):
    error_id = "NoConvergence"


# oddorder
class SingularQ0(NumericFailure):
    error_id = "SingularQ0"


class EigenCrossing(NumericFailure):
    error_id = "EigenCrossing"


class UnsupportedSubclass(NumericFailure):
    error_id = "UnsupportedSubclass"


class MatchFailure(NumericFailure):
    error_id = "MatchFailure"


class NotSelfAdjointPair(NumericFailure):
    error_id = "NotSelfAdjointPair"
