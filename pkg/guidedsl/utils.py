"""
Shared helpers: the exception hierarchy raised across the package,
array coercion and a robust matrix square root.
"""
from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np
from scipy import linalg

__all__ = ['GuidedSLError', 'InvalidInputError', 'InvalidConfigError',
           'InvalidStateError', 'DegenerateCovarianceError',
           'DegenerateSummaryError', 'NumericFailureError',
           'ChainAbortedError', 'TraceFormatError',
           'as_vector', 'as_matrix', 'symmetrize', 'matrix_sqrt']


class GuidedSLError(Exception):
    """Root of every error raised by guidedsl."""


class InvalidInputError(GuidedSLError, ValueError):
    """An argument violates a documented precondition."""


class InvalidConfigError(GuidedSLError, ValueError):
    """
    An experiment configuration failed validation.

    Parameters
    ----------
    problems : sequence of (str, str)
        Pairs of dotted field path and message.
    """
    def __init__(self, problems: Sequence[Tuple[str, str]]):
        self.problems = list(problems)
        lines = [f'{path}: {msg}' for path, msg in self.problems]
        super().__init__('invalid configuration:\n  ' + '\n  '.join(lines))


class InvalidStateError(GuidedSLError, RuntimeError):
    """An object was used before it held enough information."""


class DegenerateCovarianceError(GuidedSLError, np.linalg.LinAlgError):
    """A covariance matrix could not be factorised or repaired."""


class DegenerateSummaryError(GuidedSLError, ValueError):
    """A summary statistic divides by a zero spread."""


class NumericFailureError(GuidedSLError, ArithmeticError):
    """A root finder or quadrature routine did not converge."""


class ChainAbortedError(GuidedSLError, RuntimeError):
    """A chain could not continue; the message carries the diagnostic."""


class TraceFormatError(GuidedSLError, ValueError):
    """
    A trace file could not be parsed.

    Parameters
    ----------
    message : str
        What went wrong.
    line : int or None
        1-based line number of the offending row, header included.
    """
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


def as_vector(x, name: str = 'vector') -> np.ndarray:
    """Return ``x`` as a 1-d float array, raising on anything else."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidInputError(f'{name} must be one-dimensional, '
                                f'got shape {arr.shape}')
    return arr


def as_matrix(x, name: str = 'matrix') -> np.ndarray:
    """Return ``x`` as a square 2-d float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f'{name} must be square, '
                                f'got shape {arr.shape}')
    return arr


def symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2


def matrix_sqrt(c: np.ndarray) -> np.ndarray:
    """
    Lower-triangular factor ``L`` with ``L @ L.T == c``.

    Falls back to a symmetric eigendecomposition with negative
    eigenvalues clipped to zero, so positive semi-definite input
    (the zero matrix included) is accepted.

    Parameters
    ----------
    c : np.ndarray
        A symmetric positive semi-definite matrix.

    Returns
    -------
    np.ndarray
        A square root of ``c``. Lower triangular when ``c`` is PD.
    """
    c = as_matrix(c, 'covariance')
    try:
        return linalg.cholesky(c, lower=True)
    except linalg.LinAlgError:
        w, v = linalg.eigh(symmetrize(c))
        return v * np.sqrt(np.clip(w, 0.0, None))
