"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when a game instance, strategy or scenario file is malformed."""


class ResourceLimitError(RuntimeError):
    """Raised when a grid or table would exceed its configured size cap.

    ``required`` carries the estimated size so callers can report it.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required
