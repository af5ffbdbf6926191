"""Spatial-temporal separable (STS) convolution.

Output channels split into a static group and a dynamic group. The static
group is computed per frame as the sum of one 2D convolution and two 1D
convolutions over the row-raster and column-raster flattenings of the
frame; the dynamic group is a plain 3D convolution. Results are
concatenated along channels, static group leading.

With groups > 1 the split must land on a group boundary of the baseline
kernel; each branch then convolves only the input-channel block its
output channels see in the baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor

import numpy as np

from . import convops, tensors
from .convops import ConvSpec, same_padding
from .tensors import ShapeError

STATIC_FRACTIONS = {
    "1:1": Fraction(1, 2),
    "1:2": Fraction(1, 3),
    "2:1": Fraction(2, 3),
}


@dataclass(frozen=True)
class STSConfig:
    c_in: int
    c_out: int
    kernel: tuple[int, int, int] = (3, 3, 3)
    static_ratio: str = "1:1"
    groups: int = 1
    row_pad_mode: str = "whole-sequence"  # or "per-row"

    def __post_init__(self):
        kt, kh, kw = self.kernel
        if kt != 3:
            raise ShapeError(f"temporal kernel extent must be 3, got {kt}")
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"spatial kernel extents must be odd, got ({kh}, {kw})")
        if self.static_ratio not in STATIC_FRACTIONS:
            raise ShapeError(f"static_ratio must be one of {sorted(STATIC_FRACTIONS)}")
        if self.row_pad_mode not in ("whole-sequence", "per-row"):
            raise ShapeError(f"unknown row_pad_mode {self.row_pad_mode!r}")
        if self.c_in % self.groups or self.c_out % self.groups:
            raise ShapeError(
                f"channels ({self.c_in}, {self.c_out}) not divisible by groups={self.groups}"
            )
        if self.static_out < 1 or self.dynamic_out < 1:
            raise ShapeError(
                f"split {self.static_ratio} of c_out={self.c_out} leaves an empty group"
            )
        if self.groups > 1 and self.static_out % (self.c_out // self.groups):
            raise ShapeError(
                f"static_out={self.static_out} does not split c_out={self.c_out} "
                f"on a boundary of groups={self.groups}"
            )

    @property
    def static_out(self) -> int:
        frac = STATIC_FRACTIONS[self.static_ratio]
        # round half up
        return floor(self.c_out * frac + Fraction(1, 2))

    @property
    def dynamic_out(self) -> int:
        return self.c_out - self.static_out

    @property
    def cin_per_group(self) -> int:
        return self.c_in // self.groups


@dataclass
class STSParams:
    """Decomposed kernel: three 2D slices for the static group, 3D for dynamic."""

    alpha0: np.ndarray  # (static_out, c_in/groups, Kh, Kw)
    alpha1: np.ndarray
    alpha2: np.ndarray
    beta: np.ndarray  # (dynamic_out, c_in/groups, 3, Kh, Kw)

    def astype(self, dtype) -> "STSParams":
        return STSParams(*(a.astype(dtype) for a in self.arrays()))

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.alpha0, self.alpha1, self.alpha2, self.beta)

    @staticmethod
    def names() -> tuple[str, ...]:
        return ("alpha0", "alpha1", "alpha2", "beta")


def _check_params(p: STSParams, cfg: STSConfig) -> None:
    kt, kh, kw = cfg.kernel
    a_shape = (cfg.static_out, cfg.cin_per_group, kh, kw)
    for name, a in zip(("alpha0", "alpha1", "alpha2"), (p.alpha0, p.alpha1, p.alpha2)):
        if a.shape != a_shape:
            raise ShapeError(f"{name} shape {a.shape} != {a_shape}")
    b_shape = (cfg.dynamic_out, cfg.cin_per_group, kt, kh, kw)
    if p.beta.shape != b_shape:
        raise ShapeError(f"beta shape {p.beta.shape} != {b_shape}")


def _branches(cfg: STSConfig) -> tuple[slice, int, slice, int]:
    """(static in-channel slice, static groups, dynamic slice, dynamic groups)."""
    if cfg.groups == 1:
        full = slice(0, cfg.c_in)
        return full, 1, full, 1
    opg = cfg.c_out // cfg.groups
    gs = cfg.static_out // opg
    cut = gs * cfg.cin_per_group
    return slice(0, cut), gs, slice(cut, cfg.c_in), cfg.groups - gs


def _flat_spec(cfg: STSConfig, groups: int) -> ConvSpec:
    k = cfg.kernel[1] * cfg.kernel[2]
    return ConvSpec(kernel=(k,), padding=(k - 1) // 2, groups=groups)


def _spatial_spec(cfg: STSConfig, groups: int) -> ConvSpec:
    kh, kw = cfg.kernel[1], cfg.kernel[2]
    return ConvSpec(kernel=(kh, kw), padding=same_padding((kh, kw)), groups=groups)


def _dynamic_spec(cfg: STSConfig, groups: int) -> ConvSpec:
    return ConvSpec(kernel=cfg.kernel, padding=same_padding(cfg.kernel), groups=groups)


def _conv1d_flat(frame, w2d, cfg, groups, orientation):
    """1D conv over a raster flattening of the frame, back to (N, C_out, H, W)."""
    n, _, h, w = frame.shape
    kern = np.ascontiguousarray(w2d.reshape(w2d.shape[0], w2d.shape[1], -1))
    spec = _flat_spec(cfg, groups)
    if cfg.row_pad_mode == "whole-sequence":
        flat = tensors.flatten_rows(frame) if orientation == "row" else tensors.flatten_cols(frame)
        y = convops.conv1d(flat, kern, spec)
        return tensors.unflatten_rows(y, h, w) if orientation == "row" else tensors.unflatten_cols(y, h, w)
    # per-row: each row (or column) is its own zero-padded sequence
    x = frame if orientation == "row" else tensors.transpose_hw(frame)
    n, c, rows, cols = x.shape
    seg = np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(n * rows, c, cols)
    y = convops.conv1d(seg, kern, spec)
    y = np.ascontiguousarray(y.reshape(n, rows, kern.shape[0], cols).transpose(0, 2, 1, 3))
    return y if orientation == "row" else tensors.transpose_hw(y)


def _conv1d_flat_backward(frame, w2d, cfg, groups, orientation, grad_y):
    n, _, h, w = frame.shape
    kern = np.ascontiguousarray(w2d.reshape(w2d.shape[0], w2d.shape[1], -1))
    spec = _flat_spec(cfg, groups)
    if cfg.row_pad_mode == "whole-sequence":
        flat = tensors.flatten_rows(frame) if orientation == "row" else tensors.flatten_cols(frame)
        g_flat = tensors.flatten_rows(grad_y) if orientation == "row" else tensors.flatten_cols(grad_y)
        gx_flat, gk = convops.conv_backward(flat, kern, spec, np.ascontiguousarray(g_flat))
        gx = (
            tensors.unflatten_rows(gx_flat, h, w)
            if orientation == "row"
            else tensors.unflatten_cols(gx_flat, h, w)
        )
        return gx, gk.reshape(w2d.shape)
    x = frame if orientation == "row" else tensors.transpose_hw(frame)
    gy = grad_y if orientation == "row" else tensors.transpose_hw(grad_y)
    n, c, rows, cols = x.shape
    seg = np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(n * rows, c, cols)
    gseg = np.ascontiguousarray(gy.transpose(0, 2, 1, 3)).reshape(n * rows, gy.shape[1], cols)
    gx_seg, gk = convops.conv_backward(seg, kern, spec, gseg)
    gx = np.ascontiguousarray(gx_seg.reshape(n, rows, c, cols).transpose(0, 2, 1, 3))
    if orientation != "row":
        gx = tensors.transpose_hw(gx)
    return gx, gk.reshape(w2d.shape)


def sts_forward(x: np.ndarray, p: STSParams, cfg: STSConfig) -> np.ndarray:
    """Apply the separable convolution to a (N, c_in, T, H, W) batch."""
    tensors.check_video(x)
    if x.shape[1] != cfg.c_in:
        raise ShapeError(f"input has {x.shape[1]} channels, config expects {cfg.c_in}")
    _check_params(p, cfg)
    n, _, t_len, h, w = x.shape
    s_slice, s_groups, d_slice, d_groups = _branches(cfg)
    spec2d = _spatial_spec(cfg, s_groups)
    static = np.empty((n, cfg.static_out, t_len, h, w), dtype=x.dtype)
    for t in range(t_len):
        frame = np.ascontiguousarray(x[:, s_slice, t])
        s = _conv1d_flat(frame, p.alpha0, cfg, s_groups, "row")
        s = s + convops.conv2d(frame, p.alpha1, spec2d)
        s = s + _conv1d_flat(frame, p.alpha2, cfg, s_groups, "col")
        static[:, :, t] = s
    dynamic = convops.conv3d(
        np.ascontiguousarray(x[:, d_slice]), p.beta, _dynamic_spec(cfg, d_groups)
    )
    return tensors.concat_channels(static, dynamic)


def sts_backward(
    x: np.ndarray, p: STSParams, cfg: STSConfig, grad_out: np.ndarray
) -> tuple[np.ndarray, STSParams]:
    """Gradients of `sts_forward` w.r.t. input and all parameter groups."""
    tensors.check_video(x)
    _check_params(p, cfg)
    n, _, t_len, h, w = x.shape
    if grad_out.shape != (n, cfg.c_out, t_len, h, w):
        raise ShapeError(f"grad_out shape {grad_out.shape} mismatch")
    g_static, g_dynamic = tensors.split_channels(grad_out, cfg.static_out)
    s_slice, s_groups, d_slice, d_groups = _branches(cfg)
    spec2d = _spatial_spec(cfg, s_groups)
    grad_x = np.zeros_like(x)
    g_a0 = np.zeros_like(p.alpha0)
    g_a1 = np.zeros_like(p.alpha1)
    g_a2 = np.zeros_like(p.alpha2)
    for t in range(t_len):
        frame = np.ascontiguousarray(x[:, s_slice, t])
        gt = np.ascontiguousarray(g_static[:, :, t])
        gx_r, gk_r = _conv1d_flat_backward(frame, p.alpha0, cfg, s_groups, "row", gt)
        gx_s, gk_s = convops.conv_backward(frame, p.alpha1, spec2d, gt)
        gx_c, gk_c = _conv1d_flat_backward(frame, p.alpha2, cfg, s_groups, "col", gt)
        grad_x[:, s_slice, t] += gx_r + gx_s + gx_c
        g_a0 += gk_r
        g_a1 += gk_s
        g_a2 += gk_c
    gx_dyn, g_beta = convops.conv_backward(
        np.ascontiguousarray(x[:, d_slice]), p.beta, _dynamic_spec(cfg, d_groups), g_dynamic
    )
    grad_x[:, d_slice] += gx_dyn
    return grad_x, STSParams(g_a0, g_a1, g_a2, g_beta)


def sts_param_count(cfg: STSConfig) -> int:
    kt, kh, kw = cfg.kernel
    static = 3 * cfg.static_out * cfg.cin_per_group * kh * kw
    dynamic = cfg.dynamic_out * cfg.cin_per_group * kt * kh * kw
    return static + dynamic


def sts_mac_count(cfg: STSConfig, input_shape: tuple[int, int, int]) -> int:
    """Exact MACs per batch item for a (T, H, W) input, same padding throughout."""
    t_len, h, w = input_shape
    s_slice, s_groups, d_slice, d_groups = _branches(cfg)
    c_static = s_slice.stop - s_slice.start
    c_dynamic = d_slice.stop - d_slice.start
    flat = convops.mac_count(_flat_spec(cfg, s_groups), (h * w,), c_static, cfg.static_out)
    spatial = convops.mac_count(_spatial_spec(cfg, s_groups), (h, w), c_static, cfg.static_out)
    static = t_len * (2 * flat + spatial)
    dynamic = convops.mac_count(
        _dynamic_spec(cfg, d_groups), (t_len, h, w), c_dynamic, cfg.dynamic_out
    )
    return static + dynamic


def split_baseline_weights(theta: np.ndarray, cfg: STSConfig) -> STSParams:
    """Reindex a full (c_out, c_in/g, 3, Kh, Kw) kernel into STS parameter groups."""
    expected = (cfg.c_out, cfg.cin_per_group) + tuple(cfg.kernel)
    if theta.shape != expected:
        raise ShapeError(f"baseline kernel shape {theta.shape} != {expected}")
    so = cfg.static_out
    return STSParams(
        alpha0=theta[:so, :, 0].copy(),
        alpha1=theta[:so, :, 1].copy(),
        alpha2=theta[:so, :, 2].copy(),
        beta=theta[so:].copy(),
    )


def assemble_baseline_weights(p: STSParams, cfg: STSConfig) -> np.ndarray:
    """Inverse of `split_baseline_weights`."""
    _check_params(p, cfg)
    static = np.stack([p.alpha0, p.alpha1, p.alpha2], axis=2)
    return np.concatenate([static, p.beta], axis=0)


def init_sts_random(cfg: STSConfig, rng: np.random.Generator, dtype=np.float64) -> STSParams:
    """Fresh init: fan-in-scaled uniform for alpha1/beta, zeros for alpha0/alpha2."""
    kt, kh, kw = cfg.kernel
    cpg = cfg.cin_per_group
    a_shape = (cfg.static_out, cpg, kh, kw)
    bound_a = 1.0 / np.sqrt(cpg * kh * kw)
    bound_b = 1.0 / np.sqrt(cpg * kt * kh * kw)
    return STSParams(
        alpha0=np.zeros(a_shape, dtype=dtype),
        alpha1=rng.uniform(-bound_a, bound_a, a_shape).astype(dtype),
        alpha2=np.zeros(a_shape, dtype=dtype),
        beta=rng.uniform(-bound_b, bound_b, (cfg.dynamic_out, cpg, kt, kh, kw)).astype(dtype),
    )
