"""Exception hierarchy shared by the simulation and analysis modules."""


class BlightError(Exception):
    """Base class for all package errors."""


class DomainError(BlightError, ValueError):
    """An input lies outside the domain an operation is defined on."""


class InstabilityError(BlightError):
    """A recorded snapshot violates a state invariant beyond tolerance.

    Attributes name the first offending location so the failure can be
    reproduced and inspected.
    """

    def __init__(self, message, *, time=None, cell=None, compartment=None):
        super().__init__(message)
        self.time = time
        self.cell = cell
        self.compartment = compartment


class BlowUpError(BlightError):
    """The integrator produced non-finite values or failed to advance."""

    def __init__(self, message, *, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(BlightError, ValueError):
    """A run configuration is malformed, incomplete or inconsistent."""
