"""Exception types shared across the toolkit."""


class DpPcaError(Exception):
    """Base class for all package-specific failures."""


class InvalidInput(DpPcaError, ValueError):
    """Input violates a documented precondition (non-finite, wrong shape, ...)."""


class DeflationError(DpPcaError, ValueError):
    """Attempted to deflate a direction that is not in the image of the projector."""


class DegenerateDirection(DpPcaError, RuntimeError):
    """A projected vector has (numerically) zero norm; the caller may resample."""


class RankError(DpPcaError, ValueError):
    """Matrix columns are rank deficient where independence is required."""


class OutOfRange(DpPcaError, ValueError):
    """A privacy parameter is outside the range a composition lemma supports."""


class InsufficientData(DpPcaError, ValueError):
    """Not enough points to run a private subroutine at the requested budget."""


class RangeFailure(DpPcaError, RuntimeError):
    """A per-coordinate histogram inside private mean estimation returned bottom."""


class GapFailure(DpPcaError, RuntimeError):
    """Private eigengap resampling exhausted its retry budget."""


class UsageError(DpPcaError, ValueError):
    """Bad CLI or config usage (unknown preset, malformed config file)."""
