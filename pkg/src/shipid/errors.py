"""Exception hierarchy shared across the toolkit."""


class ShipIdError(Exception):
    """Base class for all toolkit errors."""


class DegenerateParametersError(ShipIdError):
    """Inertia matrix is numerically singular for the given parameters."""


class IntegrationBlowupError(ShipIdError):
    """A rollout produced non-finite state values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ParseError(ShipIdError):
    """A data file violates the documented schema."""

    def __init__(self, message, path=None, row=None):
        super().__init__(message)
        self.path = path
        self.row = row


class InsufficientDataError(ShipIdError):
    """Not enough samples (or rank) to carry out the requested operation."""


class UnidentifiableError(ShipIdError):
    """The data carries no information about the requested parameters."""


class SolverError(ShipIdError):
    """The optimizer could not even start (e.g. non-finite residual at the
    initial point). Ordinary non-convergence is reported in the SolveReport
    status instead of raising."""
