"""Exception types shared across the package."""


class SceneError(ValueError):
    """Missing or inconsistent input files. Maps to CLI exit code 1."""


class DegenerateError(ValueError):
    """Raised for degenerate inputs such as an empty superpoint."""


class InvariantViolation(RuntimeError):
    """Internal consistency check failed. Maps to CLI exit code 2."""
