"""Exception types shared across the package."""


class SectorCalcError(Exception):
    pass


class ParameterError(SectorCalcError, ValueError):
    """A parameter lies outside the range where an operation is valid."""


class DomainError(ParameterError):
    """Evaluation point outside the domain of a function."""


class HypothesisError(ParameterError):
    """The hypotheses of a resolvent representation are not met.

    ``case`` names the violated branch: "injective-or-bf" when neither an
    injective matrix with an E-class function nor a Bernstein function is
    supplied, "angle" for sector conditions, "q" for the exponent range.
    """

    def __init__(self, message, case=None):
        super().__init__(message)
        self.case = case


class TagRuleError(ParameterError):
    """A declared class tag cannot be derived from the rule table."""


class QuadratureError(SectorCalcError):
    """Adaptive quadrature failed; ``result`` holds the partial result."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class CertificationError(SectorCalcError):
    """A matrix could not be certified sectorial at the requested angle."""


class SingularSystemError(SectorCalcError):
    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class ContourError(SectorCalcError):
    pass


class NumericalOverflowError(SectorCalcError):
    """A matrix exponential or power left the floating point range."""
