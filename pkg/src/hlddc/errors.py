"""Exception and warning types raised by the toolkit."""


class HlddcError(Exception):
    """Base class for all toolkit errors."""


class InputError(HlddcError):
    """Bad user input (malformed data, invalid options)."""


class NumericalError(HlddcError):
    """A numerical step could not be carried out."""


# lti_core
class ImproperTF(InputError):
    pass


class PoleHit(NumericalError):
    """Evaluation point coincides with a pole."""


class SingularPencil(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass


class NonStandardForm(NumericalError):
    pass


# loewner
class InconsistentConjugate(InputError):
    pass


class TooFewPoints(InputError):
    pass


class NodeCollision(InputError):
    pass


class ResidualImaginary(NumericalError):
    """Realification left a non-negligible imaginary part."""


class RankDeficientProjection(UserWarning):
    pass


# synthesis
class SingularPlantSample(InputError):
    pass


class ReferenceSaturated(InputError):
    """The reference model equals one at a sample, so (1 - M) is singular."""


class AboveNyquist(InputError):
    pass


class HoldZero(InputError):
    pass


class InvalidRange(InputError):
    pass


class DefectiveSpectrum(NumericalError):
    pass


# hybrid simulation
class AlgebraicLoopSingularity(NumericalError):
    pass


class DivergedSimulation(NumericalError):
    pass


class TimeBaseMismatch(InputError):
    pass


# cli
class MalformedRow(InputError):
    def __init__(self, line, text=""):
        self.line = line
        super().__init__(f"malformed row at line {line}: {text!r}")


class DuplicateFrequency(InputError):
    pass


class EmptyFile(InputError):
    pass


class IoError(HlddcError):
    """Output could not be written."""
