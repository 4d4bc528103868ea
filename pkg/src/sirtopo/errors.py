"""Exception types shared across the package.

The CLI maps these onto exit codes: ValidationError -> 2,
NumericalError -> 3.  Plain argparse usage errors exit with 1.
"""


class ValidationError(ValueError):
    """Bad input data or parameters (shape, range, or format violations)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-finite values, degenerate inputs)."""
