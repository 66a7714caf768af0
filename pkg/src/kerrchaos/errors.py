"""Exception types shared across the package."""


class KerrChaosError(Exception):
    """Base class for all package-specific failures."""


class TruncationError(KerrChaosError):
    """Fock-space truncation too small for the requested object."""


class ConvergenceError(KerrChaosError):
    """A spectral or iterative quantity did not converge at the given settings."""


class RootBracketError(KerrChaosError):
    """A scalar root-find could not bracket a solution (target out of range)."""


class StabilityError(KerrChaosError):
    """A potential minimum turned out to be unstable (non-positive curvature)."""


class FluxConfigurationError(KerrChaosError):
    """No potential minimum exists on the principal flux branch."""


class IntegrationError(KerrChaosError):
    """Time integration failed to meet its accuracy or unitarity contract."""


class StatisticsError(KerrChaosError):
    """Too few levels (or samples) for the requested statistic."""


class SchemaError(KerrChaosError):
    """A persisted file has an unknown, corrupted, or incompatible layout."""


class ContractError(KerrChaosError):
    """An input violated a documented precondition (e.g. non-normalized state)."""
