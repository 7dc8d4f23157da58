"""Exception hierarchy shared by every votelearn module."""


class VoteLearnError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(VoteLearnError, ValueError):
    pass


class CapacityError(VoteLearnError):
    """An input exceeds a fixed capacity (solver cap, padded width, ...)."""


class DegenerateWelfareError(VoteLearnError, ArithmeticError):
    pass


class DistributionDegeneracyError(VoteLearnError):
    """Tie-rejection sampling exhausted its attempt budget."""


class NonFiniteError(VoteLearnError, FloatingPointError):
    pass


class ParseError(VoteLearnError, ValueError):
    """Malformed input file; ``lineno`` is 1-based, or None for whole-file problems."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        self.detail = message
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
