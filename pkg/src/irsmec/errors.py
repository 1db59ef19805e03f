"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid configuration value. ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class InfeasibleOffloadError(ValueError):
    pass


class AccountingError(ValueError):
    pass


class SizeGuardError(ValueError):
    pass
