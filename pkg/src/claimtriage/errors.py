"""Shared exception types for the claim-triage pipeline.

Every domain error raised by this package derives from ClaimTriageError so the
CLI can map any of them to a single-line diagnostic and exit status 1.
"""


class ClaimTriageError(Exception):
    """Base class for all domain errors in this package."""


# --- parsing / dataset ---

class EmptyInput(ClaimTriageError):
    pass


class NonMonotonicNumbering(ClaimTriageError):
    pass


# --- injection / generation ---

class NotApplicable(ClaimTriageError):
    pass


class InvalidInput(ClaimTriageError):
    pass


class InsufficientPool(ClaimTriageError):
    pass


# --- gatekeeper ---

class EmptyTrainingSet(ClaimTriageError):
    pass


class DimensionMismatch(ClaimTriageError):
    pass


class SchemaError(ClaimTriageError):
    pass


# --- router / metrics ---

class LengthMismatch(ClaimTriageError):
    pass


class EmptySweep(ClaimTriageError):
    pass


class SingleClass(ClaimTriageError):
    pass


class InsufficientPoints(ClaimTriageError):
    pass


class TooFewSamples(ClaimTriageError):
    pass


# --- expert transport ---

class TransportError(ClaimTriageError):
    pass


class AuthError(ClaimTriageError):
    pass


class ConfigError(ClaimTriageError):
    pass
