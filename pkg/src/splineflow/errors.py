"""Exception hierarchy shared by all splineflow modules.

Each class carries the CLI exit code it maps to:
2 for usage/validation problems, 3 for unreadable files, 4 for numeric or
shape problems discovered while computing.
"""


class SplineFlowError(Exception):
    exit_code = 4


class InvalidArgumentError(SplineFlowError, ValueError):
    exit_code = 2


class DivisibilityError(InvalidArgumentError):
    """Strict partitioning requested but p does not divide M."""


class ShapeError(SplineFlowError, ValueError):
    exit_code = 4


class RangeError(SplineFlowError, ValueError):
    exit_code = 4


class IncompleteInputError(SplineFlowError):
    exit_code = 4


class NumericError(SplineFlowError, ArithmeticError):
    exit_code = 4


class ParseError(SplineFlowError):
    exit_code = 3

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ShardError(SplineFlowError):
    """A kernel failed inside one SPMD worker."""

    def __init__(self, shard, cause):
        self.shard = shard
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 4)
        super().__init__(f"shard {shard[0]}:{shard[1]} failed: {cause}")
