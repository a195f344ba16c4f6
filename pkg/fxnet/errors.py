class FxnetError(Exception):
    exit_code = 1


class InputError(FxnetError):
    """Bad input, configuration or usage. Maps to exit code 2 / HTTP 400."""

    exit_code = 2


class IngestionError(InputError):
    def __init__(self, message: str, *, row: int | None = None, column: str | None = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class InvalidSampleError(InputError):
    pass


class InvalidParameterError(InputError):
    pass


class InvalidPairError(InputError):
    pass


class DegenerateSampleError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class UnknownCurrencyError(InputError):
    def __init__(self, code: str, available: list[str] | tuple[str, ...] | None = None):
        message = f"Unknown currency: {code}"
        if available:
            message += f" (available: {', '.join(available)})"
        super().__init__(message)
        self.code = code


class MissingRunError(InputError):
    pass
