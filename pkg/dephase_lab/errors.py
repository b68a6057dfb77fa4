"""
Exception hierarchy shared by the library modules and the command line
"""


class DephaseLabError(Exception):
    """Base class for every error raised on purpose by dephase_lab"""


class InvalidStateError(DephaseLabError, ValueError):
    pass


class DimensionMismatchError(DephaseLabError, ValueError):
    pass


class UnitarityError(DephaseLabError, ValueError):
    def __init__(self, message, deviation):
        super().__init__(message)
        self.deviation = deviation


class PovmError(DephaseLabError, ValueError):
    pass


class PovmCompletenessError(PovmError):
    def __init__(self, message, deviation):
        super().__init__(message)
        self.deviation = deviation


class OrthogonalInputError(DephaseLabError, ValueError):
    """Raised where the computation needs a nonzero overlap"""


class NonorthogonalInputError(DephaseLabError, ValueError):
    """Raised where the computation needs orthogonal inputs"""


class InputFormatError(DephaseLabError, ValueError):
    pass


class ConfigError(DephaseLabError, ValueError):
    pass


class ParameterError(DephaseLabError, ValueError):
    """Priors, amplitudes or other scalar parameters out of range"""
