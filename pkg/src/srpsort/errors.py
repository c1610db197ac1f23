"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a quantity is defined."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (step underflow, non-convergence)."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class HyperbolicEjection(DomainError):
    """The ejection speed produces an unbound two-body orbit."""


class ClosedRegionImpossible(DomainError):
    """Zero-velocity curves are open even for a particle at rest."""


class Unreachable(DomainError):
    """A value is not reachable along the requested Hamiltonian isoline."""


class StrategyInfeasible(RuntimeError):
    """A sorting strategy cannot be evaluated (escape, timeout, no root)."""


class DirectReimpact(StrategyInfeasible):
    """The particle falls back before its first pericenter passage."""


class ConfigError(ValueError):
    """A run configuration failed validation.

    ``diagnostics`` holds one message per violated field.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))
