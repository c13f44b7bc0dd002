"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`RadcalError`, which
also subclasses :class:`ValueError` so callers that only care about bad input
can catch the builtin. Each concrete class carries an ``exit_code`` used by
the command-line front end.
"""

from __future__ import annotations


class RadcalError(ValueError):
    exit_code = 10


# radiometry
class NonPositivePolynomialError(RadcalError):
    """Vignette polynomial k(r) is not positive at some pixel."""

    exit_code = 11


class DenominatorNonPositiveError(RadcalError):
    """Row/exposure denominator of the DN-to-radiance model is not positive."""

    exit_code = 12


class EmptyRoiError(RadcalError):
    exit_code = 13


class ZeroEstimatedReflectanceError(RadcalError):
    exit_code = 14


class ZeroIrradianceError(RadcalError):
    exit_code = 15


# simulation
class LayoutOverflowError(RadcalError):
    exit_code = 20


class SceneCoverageError(RadcalError):
    exit_code = 21


# calibration / metrics
class DegenerateFitError(RadcalError):
    exit_code = 30


class ZeroVarianceError(RadcalError):
    exit_code = 31


class ZeroActualError(RadcalError):
    exit_code = 32


# exposure analysis
class EmptyWindowError(RadcalError):
    exit_code = 40


# vegetation indices
class ZeroDenominatorError(RadcalError):
    exit_code = 50


class MissingBandError(RadcalError):
    exit_code = 51


class EmptyPlotError(RadcalError):
    exit_code = 52


# io
class MalformedPgmError(RadcalError):
    exit_code = 60


class MissingSidecarError(RadcalError):
    exit_code = 61


class SchemaViolationError(RadcalError):
    exit_code = 62


class NonMonotonicWavelengthsError(RadcalError):
    exit_code = 63


class GapInCoverageError(RadcalError):
    exit_code = 64


class MissingInputError(RadcalError):
    """A required input file (config, capture, curve) does not exist."""

    exit_code = 65


def all_error_classes() -> list[type[RadcalError]]:
    """Concrete error classes in exit-code order."""
    found: list[type[RadcalError]] = []
    stack = [RadcalError]
    while stack:
        cls = stack.pop()
        found.append(cls)
        stack.extend(cls.__subclasses__())
    return sorted(set(found), key=lambda c: c.exit_code)
