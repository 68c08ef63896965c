"""Small argument checks shared by the estimators and functional API."""

import numbers

import numpy as np

from .exceptions import ArgumentError, NumericOverflowError


def check_positive_int(value, name, *, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ArgumentError(f"{name} must be an integer, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ArgumentError(f"{name} must be {bound}, got {value}")
    return int(value)


def check_positive_float(value, name, *, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ArgumentError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ArgumentError(f"{name} must be finite and {bound}, got {value}")
    return value


def check_finite(arr, what="array"):
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericOverflowError(f"non-finite values in {what}")
    return arr


def check_square(matrix, name="cost matrix"):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ArgumentError(f"{name} must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ArgumentError(f"{name} has non-finite entries")
    return matrix


def as_sentences(X):
    """Accept raw lines or pre-tokenized sentences; return list of token lists."""
    from .corpus import tokenize

    if isinstance(X, (str, bytes)):
        raise ArgumentError("expected an iterable of sentences, got a single string")
    out = []
    for sent in X:
        if isinstance(sent, (str, bytes)):
            out.append(tokenize(sent))
        else:
            out.append(list(sent))
    return out
