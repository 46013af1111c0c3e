"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An input violated a documented precondition; message names the field."""


class DegenerateFitError(RuntimeError):
    """Least-squares normal system is rank deficient."""


class SingularSweepError(RuntimeError):
    """Forward sweep hit a near-zero pivot (should be unreachable under
    diagonal dominance)."""


class UnstableClosureError(RuntimeError):
    """Boundary closure denominator is not positive."""


class InvalidTapeError(RuntimeError):
    """State tape is incomplete or inconsistent with the requested replay."""


class DegenerateRecordError(InvalidArgumentError):
    """Heating record's total duration is below one time step."""


class InvalidConfigError(ValueError):
    """Run or training configuration is unusable (bad key, empty split, ...)."""
