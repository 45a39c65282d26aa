"""Dense numeric values and the primitive operations everything else builds on.

Values are numpy float64 arrays in row-major (C) order; `tensor` is the
checked constructor. No broadcasting, no views, no autodiff: gradients are
hand-derived in `nn` and `smoothing`.
"""

import numpy as np

from .errors import InputError, ShapeError


def tensor(values) -> np.ndarray:
    """Build a float64 row-major array; every dimension must be >= 1."""
    arr = np.array(values, dtype=np.float64, order="C")
    if arr.ndim == 0:
        raise ShapeError("a tensor needs at least one dimension")
    if any(d < 1 for d in arr.shape):
        raise ShapeError(f"every dimension must be >= 1, got {arr.shape}")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of a 2-D [R,K] by a 2-D [K,C]."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def elementwise(a: np.ndarray, b: np.ndarray, op: str) -> np.ndarray:
    """Pointwise add/sub/mul of two identically shaped arrays."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise InputError(f"unknown elementwise op {op!r}")


def reduce(a: np.ndarray, op: str):
    """sum/mean as floats; max_index is the smallest index attaining the max."""
    if a.size == 0:
        raise InputError("reduce of an empty tensor")
    if op == "sum":
        return float(np.sum(a))
    if op == "mean":
        return float(np.mean(a))
    if op == "max_index":
        return int(np.argmax(a))
    raise InputError(f"unknown reduce op {op!r}")
