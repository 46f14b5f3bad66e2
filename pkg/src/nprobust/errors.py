"""Exception hierarchy.

Precondition violations on arguments raise plain ``ValueError``; the classes
below mark the domain-specific failure modes callers may want to catch.
"""


class NprobustError(Exception):
    pass


class DataParseError(NprobustError, ValueError):
    def __init__(self, row, message):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EmptyDatasetError(NprobustError, ValueError):
    pass


class DegenerateBisectorError(NprobustError, ValueError):
    pass


class SolverError(NprobustError, RuntimeError):
    """Simplex failed to terminate or returned an inconsistent answer.

    ``tableau`` holds the final tableau for post-mortem dumps.
    """

    def __init__(self, message, tableau=None, basis=None):
        super().__init__(message)
        self.tableau = tableau
        self.basis = basis


class ConvergenceError(SolverError):
    pass


class NoAdversarialExampleError(NprobustError):
    """No region with a different label exists (constant classifier)."""


class NoCandidateError(NprobustError):
    """The approximate attack's budget covered no differently-labeled region."""


class InconsistencyError(NprobustError, ValueError):
    pass


class ConstraintViolation(NprobustError, ValueError):
    def __init__(self, pair, distance):
        super().__init__(f"points {pair[0]} and {pair[1]} are {distance:.6g} apart, within 2r")
        self.pair = pair
        self.distance = distance


class InstanceTooLarge(NprobustError, ValueError):
    pass


class ProtocolError(NprobustError):
    pass


class StageError(NprobustError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
