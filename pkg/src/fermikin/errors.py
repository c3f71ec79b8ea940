"""Exception hierarchy shared by every module."""


class FermikinError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FermikinError, ValueError):
    """Invalid model input: bad rates, non-Hermitian drive, missing fields.

    ``pointer`` is a JSON pointer into the scenario document when the error
    comes from file parsing, otherwise ``None``.
    """

    def __init__(self, message, pointer=None):
        super().__init__(message if pointer is None else f"{pointer}: {message}")
        self.pointer = pointer


class DimensionMismatch(FermikinError, ValueError):
    pass


class ContractViolation(FermikinError, ValueError):
    """A documented precondition of an operation does not hold."""


class IntegrationDiverged(FermikinError, RuntimeError):
    """State left the admissible set by more than the hard-error margin."""

    def __init__(self, message, time, lambda_min=None, lambda_max=None):
        time = float(time)
        super().__init__(f"{message} (t={time!r})")
        self.time = time
        self.lambda_min = lambda_min
        self.lambda_max = lambda_max


class PicardNotConverged(FermikinError, RuntimeError):
    def __init__(self, message, window, last_ratio, last_delta):
        super().__init__(
            f"{message} (window {window}, last ratio {last_ratio!r}, last delta {last_delta!r})"
        )
        self.window = window
        self.last_ratio = last_ratio
        self.last_delta = last_delta


class StructureViolation(FermikinError, RuntimeError):
    """Quasiparticle block structure lost during evolution."""

    def __init__(self, message, time, violation):
        time = float(time)
        super().__init__(f"{message} (t={time!r}, violation={violation!r})")
        self.time = time
        self.violation = violation
