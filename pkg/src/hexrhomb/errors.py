"""Exception types shared across the package."""

from __future__ import annotations


class HexRhombError(Exception):
    """Base class for all package errors."""


class NonTraceFree(HexRhombError):
    pass


class DegenerateDifference(HexRhombError):
    pass


class OutsideStar(HexRhombError):
    pass


class LambdaOutOfRange(HexRhombError):
    pass


class NotRankOne(HexRhombError):
    pass


class BadConvexSplit(HexRhombError):
    pass


class EpsilonTooLarge(HexRhombError):
    pass


class ExteriorStrain(HexRhombError):
    pass


class Unclassifiable(HexRhombError):
    pass


class CertificateInvalid(HexRhombError):
    pass


class AspectOutOfRange(HexRhombError):
    pass


class BoundaryStrainNotInterior(HexRhombError):
    pass


class InvariantViolation(HexRhombError):
    """A monitor inequality failed; carries the monitor name and cell id."""

    def __init__(self, monitor: str, cell: int, detail: str = ""):
        self.monitor = monitor
        self.cell = cell
        self.detail = detail
        msg = f"monitor '{monitor}' failed on cell {cell}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class StateMismatch(HexRhombError):
    pass


class DomainError(HexRhombError):
    pass


class DegenerateDomain(HexRhombError):
    pass


class AngleSumMismatch(HexRhombError):
    pass


class ContinuityUnsolvable(HexRhombError):
    pass


class MeshFormatError(HexRhombError):
    pass


class ConfigError(HexRhombError):
    pass
