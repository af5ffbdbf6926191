"""Tensor shape manipulations used by the separable-convolution formula.

Tensors are plain numpy arrays in row-major (last dim fastest) layout.
Video batches are 5D arrays with axes (N, C, T, H, W). All operations
here are pure and return copies or fresh arrays; callers treat arrays as
immutable values.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when an array does not match the required rank or extents."""


def check_video(v: np.ndarray) -> np.ndarray:
    if v.ndim != 5:
        raise ShapeError(f"video batch must be 5D (N,C,T,H,W), got {v.ndim}D")
    if min(v.shape) < 1:
        raise ShapeError(f"video batch axes must all be >= 1, got {v.shape}")
    return v


def slice_time(v: np.ndarray, t: int) -> np.ndarray:
    """Extract frame `t` of a (N,C,T,H,W) batch as a (N,C,H,W) array."""
    check_video(v)
    n_frames = v.shape[2]
    if not 0 <= t < n_frames:
        raise IndexError(f"frame index {t} out of range for T={n_frames}")
    return v[:, :, t].copy()


def flatten_rows(x: np.ndarray) -> np.ndarray:
    """(N,C,H,W) -> (N,C,H*W) in row-raster order: out[..., h*W+w] = x[..., h, w]."""
    if x.ndim != 4:
        raise ShapeError(f"expected 4D (N,C,H,W), got {x.ndim}D")
    n, c, h, w = x.shape
    return x.reshape(n, c, h * w)


def unflatten_rows(x: np.ndarray, h: int, w: int) -> np.ndarray:
    """Inverse of `flatten_rows`."""
    if x.ndim != 3:
        raise ShapeError(f"expected 3D (N,C,L), got {x.ndim}D")
    n, c, length = x.shape
    if length != h * w:
        raise ShapeError(f"length {length} != {h}*{w}")
    return x.reshape(n, c, h, w)


def flatten_cols(x: np.ndarray) -> np.ndarray:
    """(N,C,H,W) -> (N,C,W*H) in column-raster order: out[..., w*H+h] = x[..., h, w]."""
    if x.ndim != 4:
        raise ShapeError(f"expected 4D (N,C,H,W), got {x.ndim}D")
    n, c, h, w = x.shape
    return np.ascontiguousarray(x.transpose(0, 1, 3, 2)).reshape(n, c, w * h)


def unflatten_cols(x: np.ndarray, h: int, w: int) -> np.ndarray:
    """Inverse of `flatten_cols`."""
    if x.ndim != 3:
        raise ShapeError(f"expected 3D (N,C,L), got {x.ndim}D")
    n, c, length = x.shape
    if length != h * w:
        raise ShapeError(f"length {length} != {h}*{w}")
    return x.reshape(n, c, w, h).transpose(0, 1, 3, 2).copy()


def transpose_hw(x: np.ndarray) -> np.ndarray:
    if x.ndim != 4:
        raise ShapeError(f"expected 4D (N,C,H,W), got {x.ndim}D")
    return np.ascontiguousarray(x.transpose(0, 1, 3, 2))


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Concatenate along the channel axis (axis 1); `a` leads, `b` trails."""
    if a.ndim != b.ndim:
        raise ShapeError(f"rank mismatch: {a.ndim} vs {b.ndim}")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"non-channel dims differ: {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=1)


def split_channels(y: np.ndarray, leading: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of `concat_channels` at a known split point."""
    if not 0 <= leading <= y.shape[1]:
        raise ShapeError(f"split point {leading} out of range for C={y.shape[1]}")
    return y[:, :leading].copy(), y[:, leading:].copy()
