"""Exception hierarchy shared by every stage of the pipeline."""


class LiftError(Exception):
    pass


class SourceSyntaxError(LiftError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class UnsupportedConstruct(LiftError):
    pass


class NoLoop(LiftError):
    pass


class IRTypeError(LiftError):
    pass


class UnboundVariable(LiftError):
    pass


class UnknownOperator(LiftError):
    pass


class ArityMismatch(LiftError):
    pass


class IndexOutOfBounds(LiftError):
    pass


class NonRectangularMatrix(LiftError):
    pass


class NonPositiveStride(LiftError):
    pass


class SolverUnavailable(LiftError):
    pass


class ProtocolError(LiftError):
    pass


class UnsupportedType(LiftError):
    pass


class NotFound(LiftError):
    pass
