"""Error taxonomy shared across the package.

DataError covers malformed or inconsistent input (files, labels, dimensions)
and maps to CLI exit code 3. NumericError covers factorization and
finiteness failures in the solvers and maps to exit code 4. Usage errors are
argparse's problem (exit 2).
"""


class DataError(Exception):
    """Bad input data: parse failures, label domain, dimension mismatch."""


class NumericError(Exception):
    """Numerical failure: factorization did not recover, non-finite values."""
