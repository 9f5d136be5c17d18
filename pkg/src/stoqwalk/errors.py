"""Exception types shared across the package."""


class StoqwalkError(Exception):
    """Base class for all package errors."""


class InstanceParseError(StoqwalkError):
    """Malformed instance or circuit file.

    ``line``/``column`` are set for syntax errors, ``path`` for schema errors.
    """

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if path is not None:
            where.append(f"at {path}")
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)


class InvalidInstanceError(StoqwalkError):
    """Instance violates projection-uniform invariants."""

    def __init__(self, report):
        self.report = report
        super().__init__("invalid instance:\n" + "\n".join(str(v) for v in report))


class CapacityError(StoqwalkError):
    """Requested size is above a configured cap."""


class ConvergenceError(StoqwalkError):
    def __init__(self, message, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")


class LemmaViolation(StoqwalkError):
    """A numerically checked inequality failed.

    ``details`` holds the measured quantities so callers can report them.
    """

    def __init__(self, message, **details):
        self.details = details
        super().__init__(message)


class CalibrationError(StoqwalkError):
    def __init__(self, message, curve):
        self.curve = curve
        super().__init__(message)
