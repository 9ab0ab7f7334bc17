"""Input validation helpers shared by the functional API and the estimators.

Images are ``(H, W, 3)`` float64 arrays, masks are ``(H, W)`` float64 arrays
and tensors are ``(N, C, H, W)`` float64 arrays.  The helpers coerce dtype and
check shape; they never copy more than ``np.asarray`` needs to.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when array dimensions do not match the expected layout."""


def check_image(image, name="image", *, finite=True):
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ShapeError(f"{name} has a zero dimension: {arr.shape}")
    if finite and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_mask(mask, name="mask", *, hard=False):
    arr = np.asarray(mask, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must have shape (H, W), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ShapeError(f"{name} has a zero dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if hard and not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError(f"{name} must be a hard mask with values in {{0, 1}}")
    return arr


def check_tensor(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ShapeError(f"{name} must have shape (N, C, H, W), got {arr.shape}")
    return arr


def check_same_hw(a, b, names=("a", "b")):
    if a.shape[:2] != b.shape[:2]:
        raise ShapeError(
            f"{names[0]} and {names[1]} differ in size: {a.shape[:2]} vs {b.shape[:2]}"
        )


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} and {names[1]} differ in shape: {a.shape} vs {b.shape}")


def check_positive_int(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
