"""Exception hierarchy shared across the package."""


class BiasedSplineError(Exception):
    """Base class for all package errors."""


class GeometryError(BiasedSplineError):
    pass


class NonInvertibleMetricError(GeometryError):
    """A metric (or cometric) failed symmetric positive definite factorization."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateInducedMetricError(NonInvertibleMetricError):
    pass


class EvaluationError(GeometryError):
    """A tensor field evaluator raised or returned nonfinite values."""


class DimensionError(BiasedSplineError, ValueError):
    pass


class ExpressionError(BiasedSplineError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExpressionDomainError(ExpressionError):
    def __init__(self, message, offset=None):
        where = "" if offset is None else f" (expression offset {offset})"
        super().__init__(message + where)
        self.offset = offset


class UnboundIdentifierError(ExpressionError):
    def __init__(self, name, offset):
        super().__init__(f"unbound identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class SystemSpecError(BiasedSplineError, ValueError):
    """Invalid system name, parameters, or expression-defined field."""


class IntegrationDivergence(BiasedSplineError):
    def __init__(self, message, last_time, state=None):
        super().__init__(f"{message} (last finite state at t={last_time:.6g})")
        self.last_time = last_time
        self.state = state


class ConfigError(BiasedSplineError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
