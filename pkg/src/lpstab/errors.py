"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class LpstabError(Exception):
    exit_code = 2


class FormatError(LpstabError):
    """Malformed input (bad table, bad matrix file, duplicate entries...)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidMetricError(LpstabError):
    pass


class ParameterError(LpstabError):
    pass


class StepTooLargeError(ParameterError):
    pass


class ShapeError(LpstabError):
    pass


class StructureError(LpstabError):
    pass


class DegenerateInputError(LpstabError):
    pass


class FeasibilityError(LpstabError):
    pass


class CapacityError(LpstabError):
    exit_code = 3


class NotBoundedBelowError(LpstabError):
    def __init__(self, sigma_min, sigma_max=None):
        super().__init__(f"matrix is not bounded below: sigma_min={sigma_min:.3e}")
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


class DecayViolationError(LpstabError):
    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured or {}


class VerificationError(LpstabError):
    exit_code = 1
