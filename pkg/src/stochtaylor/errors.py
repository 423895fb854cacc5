"""Exception types shared across the package."""


class StochTaylorError(Exception):
    pass


class ConfigurationError(StochTaylorError, ValueError):
    """Incompatible inputs (alphabet size, truncation degree, dimensions)."""


class DomainError(StochTaylorError, ValueError):
    """Input outside the mathematical domain of an operation."""


class CostError(StochTaylorError, ValueError):
    """Request exceeds a combinatorial cost guard."""


class IntegrationError(StochTaylorError, RuntimeError):
    """ODE integration failed (step exhaustion, possible blow-up)."""


class QuadratureError(StochTaylorError, RuntimeError):
    """Numerical quadrature did not converge."""


class ValidationError(StochTaylorError, ValueError):
    """A structured input violates its required symmetries."""
