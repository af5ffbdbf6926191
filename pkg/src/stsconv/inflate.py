"""2D-to-3D weight transfer: temporal inflation, zero-init, STS-aware init.

Inflation copies a pre-trained 2D kernel into every temporal slice of a
3-tap 3D kernel, scaled per slice. Zero-init is the (0, 1, 0) special
case: the 2D weights land in the center slice and the off-center slices
start at zero, so the fresh 3D layer initially has no temporal response.
"""

from __future__ import annotations

from dataclasses import dataclass
from numbers import Real

import numpy as np

from .sts import STSConfig, STSParams
from .tensors import ShapeError


@dataclass(frozen=True)
class InflationRates:
    rates: tuple[Real, Real, Real]

    def __post_init__(self):
        if len(self.rates) != 3:
            raise ValueError(f"need exactly 3 rates, got {self.rates}")
        if any(r < 0 for r in self.rates):
            raise ValueError(f"rates must be non-negative: {self.rates}")
        if not any(r > 0 for r in self.rates):
            raise ValueError("at least one rate must be positive")


ZERO_INIT = InflationRates((0, 1, 0))


def inflate_2d_to_3d(w2d: np.ndarray, rates: InflationRates) -> np.ndarray:
    """(C_out, C_in/g, Kh, Kw) -> (C_out, C_in/g, 3, Kh, Kw), slice i scaled by rates[i]."""
    if w2d.ndim != 4:
        raise ShapeError(f"expected 4D 2D weights, got {w2d.ndim}D")
    return np.stack([float(r) * w2d for r in rates.rates], axis=2).astype(w2d.dtype)


def zero_init_3d(w2d: np.ndarray) -> np.ndarray:
    """Place the 2D kernel in the center temporal slice, zeros elsewhere."""
    return inflate_2d_to_3d(w2d, ZERO_INIT)


def init_sts_from_2d(w2d: np.ndarray, cfg: STSConfig) -> STSParams:
    """Load pre-trained 2D weights into an STS layer.

    alpha1 takes the leading static-group channels, alpha0/alpha2 start at
    zero, and beta is the zero-init 3D lift of the trailing dynamic-group
    channels.
    """
    if w2d.ndim != 4:
        raise ShapeError(f"expected 4D 2D weights, got {w2d.ndim}D")
    expected = (cfg.c_out, cfg.cin_per_group, cfg.kernel[1], cfg.kernel[2])
    if w2d.shape != expected:
        raise ShapeError(f"2D weights shape {w2d.shape} != {expected}")
    so = cfg.static_out
    return STSParams(
        alpha0=np.zeros_like(w2d[:so]),
        alpha1=w2d[:so].copy(),
        alpha2=np.zeros_like(w2d[:so]),
        beta=zero_init_3d(w2d[so:]),
    )
