"""Exception hierarchy shared by every module in the package."""


class BoundGPError(Exception):
    """Base class; ``module`` names where the failure originated."""

    module = "boundgp"

    def to_dict(self):
        return {"error": type(self).__name__, "module": self.module, "message": str(self)}


class ValidationError(BoundGPError, ValueError):
    module = "validation"


class SupportError(ValidationError):
    """Observation outside the likelihood support; ``indices`` lists the offenders."""

    module = "likelihoods"

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = [int(i) for i in indices]

    def to_dict(self):
        d = super().to_dict()
        d["indices"] = self.indices
        return d


class NumericalError(BoundGPError, ArithmeticError):
    """Cholesky factorization failed at every jitter level in ``jitter_levels``."""

    module = "linalg"

    def __init__(self, message, jitter_levels=()):
        super().__init__(message)
        self.jitter_levels = list(jitter_levels)

    def to_dict(self):
        d = super().to_dict()
        d["jitter_levels"] = self.jitter_levels
        return d


class DivergenceError(BoundGPError, RuntimeError):
    module = "svgp"

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StateError(BoundGPError, RuntimeError):
    module = "hbp"


class DataError(BoundGPError, IOError):
    module = "data"


class InsufficientDataError(DataError):
    pass


class ConfigError(ValidationError):
    """Collects every violated config field instead of stopping at the first."""

    module = "cli"

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

    def to_dict(self):
        d = super().to_dict()
        d["fields"] = self.problems
        return d
