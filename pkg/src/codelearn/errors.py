"""Exception hierarchy shared by every module."""


class CodelearnError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CodelearnError, ValueError):
    pass


class InstanceInvariantError(CodelearnError):
    """A problem instance violates one of its own structural assumptions."""


class EmptyLevelSetError(CodelearnError):
    pass


class GenerationError(CodelearnError):
    pass


class SamplerEfficiencyError(CodelearnError):
    pass


class BudgetExhaustedError(CodelearnError):
    pass


class NoClassError(CodelearnError):
    """Queried point lies outside the support of every class."""


class DegenerateInstanceError(CodelearnError):
    pass


class InfeasibleRadiusError(CodelearnError):
    pass


class NoPlanesDetectedError(CodelearnError):
    pass


class PartialResultError(CodelearnError):
    """A learner stopped early; ``ledger`` holds the queries issued so far."""

    def __init__(self, message, ledger=None):
        super().__init__(message)
        self.ledger = ledger
