"""Exception types shared across the package.

The CLI maps these onto exit codes: config problems exit 2, domain/cone
violations exit 3, numerical divergence exit 4.
"""


class DomainError(ValueError):
    """Evaluation requested outside the valid domain (singular line, cone, ...)."""


class ConeError(DomainError):
    """A backward light cone leaves the computational domain."""


class DivergenceError(RuntimeError):
    """A time integration left the stability/boundedness envelope."""


class InsufficientDataError(ValueError):
    """Not enough usable samples for a fit or estimate."""
