class SubsidyLabError(Exception):
    """Base class for library errors."""


class GameError(SubsidyLabError, ValueError):
    """A game, scheme or instance violates its schema or invariants."""


class CapExceeded(SubsidyLabError):
    """An exhaustive enumeration would exceed its configured cap."""


class InconsistentRevelation(SubsidyLabError):
    """A revealed cost has no support under the world distribution."""

    def __init__(self, message="inconsistent revelation"):
        super().__init__(message)


class UndefinedMetric(SubsidyLabError):
    """A ratio metric has an undefined denominator or an empty equilibrium set."""

    def __init__(self, message="undefined-denominator"):
        super().__init__(message)
