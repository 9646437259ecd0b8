"""Dense matrix primitives.

A "matrix" throughout this package is a 2-D, row-major numpy array of
float64 (float32 appears only as a storage dtype in the bench path; all
arithmetic is carried out in float64). These helpers wrap numpy with the
shape/finiteness checks the rest of the package relies on.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 C-order array, rejecting other ranks."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={out.ndim}")
    return np.ascontiguousarray(out)


def check_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    if not np.isfinite(a).all():
        raise ValidationError(f"{name} contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product a @ b with an explicit inner-dimension check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions differ: {a.shape} x {b.shape}"
        )
    return a @ b


def softmax_rows(a) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction.

    Rows of the result are nonnegative and sum to 1; inputs as large as
    the float64 exponent range pose no overflow risk because the row max
    is subtracted before exponentiation.
    """
    a = as_matrix(a, "a")
    m = a.max(axis=1, keepdims=True)
    e = np.exp(a - m)
    return e / e.sum(axis=1, keepdims=True)


def concat_cols(a, b) -> np.ndarray:
    """Concatenate two matrices along the channel (column) dimension."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(
            f"concat_cols row counts differ: {a.shape[0]} vs {b.shape[0]}"
        )
    return np.hstack([a, b])


def frobenius(a) -> float:
    """Frobenius norm (sqrt of the sum of squared entries)."""
    a = as_matrix(a, "a")
    return float(np.linalg.norm(a))
