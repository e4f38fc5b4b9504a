"""Input validation helpers shared across the package.

Small check_* functions in the spirit of sklearn's validation utilities:
they coerce to numpy, verify shape/range, and raise ValueError with a
readable message naming the offending argument.
"""

from __future__ import annotations

import numpy as np


def check_layout(layout: np.ndarray, channels: int | None = None, name: str = "layout") -> np.ndarray:
    arr = np.asarray(layout, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"{name} must be (H, W, C), got shape {arr.shape}")
    if channels is not None and arr.shape[2] != channels:
        raise ValueError(f"{name} has {arr.shape[2]} channels, expected {channels}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0 or arr.max() > 1:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_image_batch(images: np.ndarray, name: str = "images") -> np.ndarray:
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise ValueError(f"{name} must be (N, H, W, 3), got shape {np.asarray(images).shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0 or arr.max() > 1:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_semantic_map(sem: np.ndarray, num_classes: int, name: str = "semantic map") -> np.ndarray:
    arr = np.asarray(sem)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be (H, W), got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must hold integer class ids")
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        raise ValueError(f"{name} holds class ids outside 0..{num_classes - 1}")
    return arr.astype(np.int64)


def check_ratio(ratio: np.ndarray, length: int | None = None, name: str = "ratio") -> np.ndarray:
    arr = np.asarray(ratio, dtype=np.float64).ravel()
    if length is not None and arr.size != length:
        raise ValueError(f"{name} must have {length} entries, got {arr.size}")
    if (arr < 0).any():
        raise ValueError(f"{name} entries must be >= 0")
    if abs(arr.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 (got {arr.sum():.12f})")
    return arr


def check_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
