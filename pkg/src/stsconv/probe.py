"""Temporal-slice probing: turn a 3D network into a valid 2D network.

Slicing every 3-tap temporal kernel at offset t (0, 1 or 2) gives a 2D
network whose appearance-modeling power can be measured, e.g. with a
linear probe on frozen features. Non-conv layers carry over unchanged,
including normalization statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import (
    Conv2dLayer,
    Conv3dLayer,
    NetworkSpec,
    ResidualLayer,
    STSLayer,
    STSSliceLayer,
)
from .sts import STSParams
from .tensors import ShapeError


def slice_kernel(w3d: np.ndarray, t: int) -> np.ndarray:
    """Extract the 2D kernel at temporal offset t of a 3-tap 3D kernel."""
    if w3d.ndim != 5:
        raise ShapeError(f"expected 5D 3D-conv weights, got {w3d.ndim}D")
    if w3d.shape[2] != 3:
        raise ShapeError(f"temporal extent must be 3, got {w3d.shape[2]}")
    if not 0 <= t <= 2:
        raise IndexError(f"temporal offset {t} out of range")
    return w3d[:, :, t].copy()


def stack_slices(slices: list[np.ndarray]) -> np.ndarray:
    """Inverse of slicing at t=0,1,2."""
    if len(slices) != 3:
        raise ShapeError("need exactly 3 temporal slices")
    return np.stack(slices, axis=2)


def probe_network(
    spec: NetworkSpec, params: dict[str, np.ndarray], t: int
) -> tuple[NetworkSpec, dict[str, np.ndarray]]:
    """Produce the 2D network at temporal offset t, with its parameter store."""
    if not 0 <= t <= 2:
        raise IndexError(f"temporal offset {t} out of range")
    new_params = dict(params)

    def convert(layer):
        if layer.kind == "conv3d":
            kt, kh, kw = layer.kernel
            if kt == 1:
                w = params[f"{layer.name}.weight"]
                new_params[f"{layer.name}.weight"] = w[:, :, 0].copy()
            elif kt == 3:
                new_params[f"{layer.name}.weight"] = slice_kernel(
                    params[f"{layer.name}.weight"], t
                )
            else:
                raise ShapeError(f"cannot probe temporal extent {kt} in layer {layer.name!r}")
            return Conv2dLayer(
                name=layer.name,
                c_in=layer.c_in,
                c_out=layer.c_out,
                kernel=(kh, kw),
                stride=(layer.stride[1], layer.stride[2]),
                groups=layer.groups,
            )
        if layer.kind == "sts":
            return STSSliceLayer(
                name=layer.name,
                c_in=layer.c_in,
                c_out=layer.c_out,
                kernel=tuple(layer.kernel),
                static_ratio=layer.static_ratio,
                groups=layer.groups,
                row_pad_mode=layer.row_pad_mode,
                t=t,
            )
        if layer.kind == "residual":
            return ResidualLayer(
                body=[convert(l) for l in layer.body],
                shortcut=[convert(l) for l in layer.shortcut],
                name=layer.name,
            )
        if layer.kind in ("conv2d", "norm", "relu", "pool", "gap", "linear"):
            return layer
        raise ShapeError(f"unsupported layer kind {layer.kind!r} in probe")

    new_layers = [convert(l) for l in spec.layers]
    return (
        NetworkSpec(layers=new_layers, in_channels=spec.in_channels, num_classes=spec.num_classes),
        new_params,
    )


@dataclass(frozen=True)
class LinearProbeConfig:
    epochs: int = 100
    learning_rate: float = 0.1
    batch_size: int = 32
    seed: int = 0
    val_fraction: float = 0.2


def linear_probe(features: np.ndarray, labels: np.ndarray, cfg: LinearProbeConfig) -> float:
    """Train a linear softmax classifier on frozen features; return val accuracy."""
    if features.ndim != 2:
        raise ShapeError(f"features must be (N, D), got {features.shape}")
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("need at least two classes for a linear probe")
    n = features.shape[0]
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    n_val = max(1, int(round(n * cfg.val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    num_classes = int(labels.max()) + 1
    w = np.zeros((num_classes, features.shape[1]))
    b = np.zeros(num_classes)
    xt, yt = features[train_idx], labels[train_idx]
    for _ in range(cfg.epochs):
        perm = rng.permutation(len(train_idx))
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb, yb = xt[idx], yt[idx]
            logits = xb @ w.T + b
            logits -= logits.max(axis=1, keepdims=True)
            p = np.exp(logits)
            p /= p.sum(axis=1, keepdims=True)
            p[np.arange(len(idx)), yb] -= 1.0
            p /= len(idx)
            w -= cfg.learning_rate * (p.T @ xb)
            b -= cfg.learning_rate * p.sum(axis=0)
    preds = np.argmax(features[val_idx] @ w.T + b, axis=1)
    return float(np.mean(preds == labels[val_idx]))
