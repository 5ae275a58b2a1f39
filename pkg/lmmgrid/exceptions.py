class LmmError(Exception):
    """
    Base class for everything the engine raises on purpose.
    """


class ValidationError(LmmError, ValueError):
    pass


class ConfigError(ValidationError):
    """
    A config entry failed validation. `field` is the dotted path to it.
    """

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class DomainError(LmmError, ValueError):
    pass


class DegenerateVolError(DomainError):
    pass


class RateIndexError(LmmError, IndexError):
    pass


class SequencingError(LmmError, RuntimeError):
    pass


class HorizonError(LmmError, ValueError):
    pass


class NumericalError(LmmError, ArithmeticError):
    pass


class SizeError(NumericalError):
    pass


class NoSolutionError(NumericalError):
    pass


class DriverMomentWarning(UserWarning):
    pass
