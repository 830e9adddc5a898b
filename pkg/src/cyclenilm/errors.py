"""Exception hierarchy shared by all cyclenilm modules."""


class NilmError(ValueError):
    """Base class for all validation and processing errors raised here."""


class TooShort(NilmError):
    """Fewer than two usable zero crossings were found."""


class AllZero(NilmError):
    """The reference signal never leaves the hysteresis band."""


class BadLevel(NilmError):
    """Operating level index is not defined for the load."""


class ScheduleOutOfRange(NilmError):
    """A schedule event lies outside the simulated interval or names an unknown load."""


class LengthMismatch(NilmError):
    """Arrays that must be aligned have different lengths or sample rates."""


class CycleTooShort(NilmError):
    """Cycle is too short for the requested wavelet decomposition depth."""


class EmptyData(NilmError):
    """Training was requested on an empty data set."""


class DimMismatch(NilmError):
    """Input feature dimension does not match the fitted model."""


class OutOfRange(NilmError):
    """Power-set label outside ``[0, 2**n_loads)``."""


class EmptyGrid(NilmError):
    """Hyperparameter grid has no points."""


class DegenerateColumn(NilmError):
    """Column has fewer than two distinct values and cannot be power-transformed."""


class NonFiniteLoss(NilmError):
    """Training diverged (loss became NaN or infinite)."""


class BadId(NilmError):
    """Requested data set id is not present."""


class FormatError(NilmError):
    """A file does not follow the expected on-disk layout."""
