"""Exception hierarchy shared by all modules."""


class SpiderError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(SpiderError, ValueError):
    pass


class PoleError(SpiderError, ZeroDivisionError):
    pass


class NoPreimageError(SpiderError):
    """The target value has no preimage under the requested branch (it is 0)."""


class NonConvergenceError(SpiderError):
    """An iterative solver hit its cap; ``last`` carries the final iterate."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class WrongBasinError(NonConvergenceError):
    """Newton converged, but to a parameter with the wrong collision pattern."""


class PortraitSyntaxError(SpiderError, ValueError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class PortraitValidationError(SpiderError, ValueError):
    """A portrait or address violates one or more named invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{name}: {msg}" for name, msg in self.violations))

    @property
    def names(self):
        return [name for name, _ in self.violations]


class ConfigurationError(SpiderError):
    pass


class StepError(SpiderError):
    """A pullback step failed; ``index`` names the offending marked point."""

    def __init__(self, message, index=None, step=None):
        super().__init__(message)
        self.index = index
        self.step = step


class SeedRejectedError(SpiderError):
    pass


class BranchTrackingError(SpiderError):
    pass


class BoundedGeometryError(SpiderError):
    pass


class QuadratureError(SpiderError):
    pass
