"""Shared input checks used across the pipeline stages."""

import numpy as np


def check_gray_frame(frame, name="frame"):
    """Validate and return a 2D uint8 intensity grid."""
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise ValueError(f"{name} must be a 2D array, got shape {frame.shape}")
    if frame.dtype != np.uint8:
        raise ValueError(f"{name} must be uint8, got {frame.dtype}")
    if frame.size == 0:
        raise ValueError(f"{name} is empty")
    return frame


def check_same_shape(a, b, what="frames"):
    if a.shape != b.shape:
        raise ValueError(f"{what} have mismatched shapes: {a.shape} vs {b.shape}")


def check_point_in_frame(x, y, width, height, name="point"):
    if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
        raise ValueError(f"{name} ({x}, {y}) outside frame bounds {width}x{height}")


def check_matrix(X, name="X", ndim=2):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite values")
    return X
