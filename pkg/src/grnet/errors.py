"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericsError -> 3.
"""


class GrnetError(Exception):
    """Base class for all package errors."""


class DataError(GrnetError):
    """Malformed or invalid input data (files, matrices, gene universes).

    Where the problem is tied to a file location, ``row`` and ``column``
    are 1-based indices into the offending file.
    """

    def __init__(self, message, row=None, column=None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.row = row
        self.column = column


class NumericsError(GrnetError):
    """Numerical failure during training (divergence, covariance breakdown)."""
