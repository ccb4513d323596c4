"""Exception hierarchy shared by every module.

All errors derive from :class:`RoadInspectError` so the CLI can report them
uniformly. ``stage`` is filled in by the pipeline when an error escapes one
of its stages.
"""

from __future__ import annotations


class RoadInspectError(ValueError):
    stage: str | None = None

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


# pci_engine
class UnknownDistress(RoadInspectError):
    pass


class InvalidDensity(RoadInspectError):
    pass


class InvalidDeduct(RoadInspectError):
    pass


class MissingCorrectionCurve(RoadInspectError):
    pass


class EmptyCurveSet(RoadInspectError):
    pass


class InvalidCurve(RoadInspectError):
    pass


class OutOfRange(RoadInspectError):
    pass


class NegativeDamage(RoadInspectError):
    pass


# baseline_models
class ZeroCenterDeflection(RoadInspectError):
    pass


class NegativeDeflection(RoadInspectError):
    pass


class NonPositiveIri(RoadInspectError):
    pass


class NegativeIri(RoadInspectError):
    pass


class InvalidTreatment(RoadInspectError):
    pass


class InvalidInput(RoadInspectError):
    pass


# dataset_io
class ParseError(RoadInspectError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SchemaMismatch(RoadInspectError):
    pass


class InvariantViolation(RoadInspectError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class TooFewSegments(RoadInspectError):
    pass


class DegenerateFeature(RoadInspectError):
    pass


class InvalidParams(RoadInspectError):
    pass


# mlp_core / rbf_core
class NonFiniteInput(RoadInspectError):
    pass


class EmptyBatch(RoadInspectError):
    pass


class SingularNormalMatrix(RoadInspectError):
    pass


class NonFiniteLoss(RoadInspectError):
    pass


class SingularSystem(RoadInspectError):
    pass


class LengthMismatch(RoadInspectError):
    pass


# metaheuristics
class NonFiniteFitness(RoadInspectError):
    pass


# cmis_ensemble
class NonFinitePrediction(RoadInspectError):
    pass


class RankDeficient(RoadInspectError):
    pass


# eval_metrics
class ZeroObserved(RoadInspectError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"observed value at index {index} is zero; relative error undefined")


class InsufficientSamples(RoadInspectError):
    pass


class ArtifactMismatch(RoadInspectError):
    pass


# cli
class InputFileError(RoadInspectError):
    """A named input file is missing or unreadable."""


class ReproducibilityError(RoadInspectError):
    """A manifest rerun produced outputs that differ from the recorded digests."""
