"""Exception types shared across the package."""


class SpecValidationError(ValueError):
    """A run specification (grid, trig terms, config file) is invalid."""


class PositivityError(RuntimeError):
    """A form that must be strictly positive failed the eigenvalue test.

    Carries the offending grid point (flat index tuple, or None for a
    pointwise check) and the minimum eigenvalue found there.
    """

    def __init__(self, message, point=None, min_eigenvalue=None):
        super().__init__(message)
        self.point = point
        self.min_eigenvalue = min_eigenvalue


class StiffnessError(RuntimeError):
    """The time stepper could not find an acceptable step size.

    ``diagnostics`` holds the last accepted diagnostics record, if any.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
