class DriftLearnError(Exception):
    """Base class for library errors."""


class DomainError(DriftLearnError, ValueError):
    """Input outside the domain where a formula is defined."""


class BlowupError(DriftLearnError):
    """Value function is infinite at the requested time (CRRA, gamma < 1)."""

    def __init__(self, message, t_tilde):
        super().__init__(message)
        self.t_tilde = t_tilde


class RiccatiEscapeError(DriftLearnError):
    """Backward ODE integration left the representable range."""

    def __init__(self, message, t_escape):
        super().__init__(message)
        self.t_escape = t_escape
