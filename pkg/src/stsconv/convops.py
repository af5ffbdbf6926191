"""Reference 1D/2D/3D cross-correlation kernels with analytic gradients.

Convention is the deep-learning one: cross-correlation (no kernel flip),
zero padding. Grouped (channel-wise) operation is supported in every
dimensionality. The optimized path lowers everything to a single lifted
3D kernel; `naive_conv*` are independent nested-loop oracles that never
touch that path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend as _backend
from .tensors import ShapeError


def _as_tuple(v, ndim: int, name: str) -> tuple[int, ...]:
    if isinstance(v, int):
        v = (v,) * ndim
    v = tuple(int(x) for x in v)
    if len(v) != ndim:
        raise ShapeError(f"{name} must have {ndim} entries, got {v}")
    return v


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of one convolution: kernel extents, stride, padding, groups, dilation."""

    kernel: tuple[int, ...]
    stride: tuple[int, ...] | int = 1
    padding: tuple[int, ...] | int = 0
    groups: int = 1
    dilation: tuple[int, ...] | int = 1

    def __post_init__(self):
        kernel = tuple(int(k) for k in self.kernel)
        ndim = len(kernel)
        if ndim not in (1, 2, 3):
            raise ShapeError(f"kernel must be 1D/2D/3D, got {kernel}")
        if any(k < 1 for k in kernel):
            raise ShapeError(f"kernel extents must be positive: {kernel}")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "stride", _as_tuple(self.stride, ndim, "stride"))
        object.__setattr__(self, "padding", _as_tuple(self.padding, ndim, "padding"))
        object.__setattr__(self, "dilation", _as_tuple(self.dilation, ndim, "dilation"))
        if any(s < 1 for s in self.stride) or any(d < 1 for d in self.dilation):
            raise ShapeError("stride and dilation must be positive")
        if any(p < 0 for p in self.padding):
            raise ShapeError("padding must be non-negative")
        if self.groups < 1:
            raise ShapeError("groups must be positive")

    @property
    def ndim(self) -> int:
        return len(self.kernel)

    def effective_kernel(self) -> tuple[int, ...]:
        """Kernel extent including dilation holes: k + (k-1)(d-1)."""
        return tuple(k + (k - 1) * (d - 1) for k, d in zip(self.kernel, self.dilation))

    def out_extents(self, in_extents: tuple[int, ...]) -> tuple[int, ...]:
        if len(in_extents) != self.ndim:
            raise ShapeError(f"expected {self.ndim} input extents, got {in_extents}")
        out = []
        for n, k_eff, s, p in zip(in_extents, self.effective_kernel(), self.stride, self.padding):
            if n + 2 * p < k_eff:
                raise ShapeError(
                    f"effective kernel {k_eff} exceeds padded input extent {n + 2 * p}"
                )
            out.append((n + 2 * p - k_eff) // s + 1)
        return tuple(out)


def same_padding(kernel, dilation=1) -> tuple[int, ...]:
    """Padding preserving extents at stride 1. Odd effective kernels only."""
    kernel = tuple(kernel)
    dilation = _as_tuple(dilation, len(kernel), "dilation")
    pads = []
    for k, d in zip(kernel, dilation):
        k_eff = k + (k - 1) * (d - 1)
        if k_eff % 2 == 0:
            raise ShapeError(f"no symmetric same-padding for even effective kernel {k_eff}")
        pads.append((k_eff - 1) // 2)
    return tuple(pads)


def _check_shapes(x: np.ndarray, w: np.ndarray, spec: ConvSpec) -> None:
    ndim = spec.ndim
    if x.ndim != ndim + 2:
        raise ShapeError(f"input must be {ndim + 2}D for a {ndim}D conv, got {x.ndim}D")
    if w.ndim != ndim + 2:
        raise ShapeError(f"weights must be {ndim + 2}D for a {ndim}D conv, got {w.ndim}D")
    if tuple(w.shape[2:]) != spec.kernel:
        raise ShapeError(f"weight kernel {w.shape[2:]} != spec kernel {spec.kernel}")
    c_in, c_out = x.shape[1], w.shape[0]
    if c_in % spec.groups or c_out % spec.groups:
        raise ShapeError(f"channels ({c_in}, {c_out}) not divisible by groups={spec.groups}")
    if w.shape[1] != c_in // spec.groups:
        raise ShapeError(f"weights expect {w.shape[1]} in-channels/group, got {c_in // spec.groups}")


def _lift(a: np.ndarray, ndim: int) -> np.ndarray:
    # insert singleton leading spatial axes: (..., L) -> (..., 1, 1, L) etc.
    for _ in range(3 - ndim):
        a = np.expand_dims(a, 2)
    return a


def _lift3(v: tuple[int, ...], fill: int) -> tuple[int, int, int]:
    return (fill,) * (3 - len(v)) + tuple(v)


def _kernels():
    if _backend.get_backend() == "numba":
        from . import _kernels_numba as k
    else:
        from . import _kernels_numpy as k
    return k


def _pad3(x5: np.ndarray, pads: tuple[int, int, int]) -> np.ndarray:
    if not any(pads):
        return x5
    width = [(0, 0), (0, 0)] + [(p, p) for p in pads]
    return np.pad(x5, width)


def conv_forward(x: np.ndarray, w: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Grouped, strided, dilated cross-correlation; dimensionality from spec."""
    _check_shapes(x, w, spec)
    out_sp = spec.out_extents(tuple(x.shape[2:]))
    x5 = _lift(x, spec.ndim)
    w5 = _lift(w, spec.ndim)
    st, sh, sw = _lift3(spec.stride, 1)
    dt, dh, dw = _lift3(spec.dilation, 1)
    xp = _pad3(x5, _lift3(spec.padding, 0))
    out5 = np.zeros((x.shape[0], w.shape[0]) + _lift3(out_sp, 1), dtype=x.dtype)
    _kernels().conv3d_forward(xp, np.ascontiguousarray(w5), st, sh, sw, dt, dh, dw, spec.groups, out5)
    return out5.reshape((x.shape[0], w.shape[0]) + out_sp)


def conv_backward(
    x: np.ndarray, w: np.ndarray, spec: ConvSpec, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients (grad_x, grad_w) of `conv_forward`."""
    _check_shapes(x, w, spec)
    out_sp = spec.out_extents(tuple(x.shape[2:]))
    if grad_out.shape != (x.shape[0], w.shape[0]) + out_sp:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} != forward output "
            f"{(x.shape[0], w.shape[0]) + out_sp}"
        )
    x5 = _lift(x, spec.ndim)
    w5 = np.ascontiguousarray(_lift(w, spec.ndim))
    go5 = np.ascontiguousarray(_lift(grad_out, spec.ndim))
    st, sh, sw = _lift3(spec.stride, 1)
    dt, dh, dw = _lift3(spec.dilation, 1)
    pads = _lift3(spec.padding, 0)
    xp = _pad3(x5, pads)
    k = _kernels()
    gxp = np.zeros_like(xp)
    k.conv3d_grad_x(gxp, w5, go5, st, sh, sw, dt, dh, dw, spec.groups)
    pt, ph, pw = pads
    gx5 = gxp[:, :, pt : gxp.shape[2] - pt or None, ph : gxp.shape[3] - ph or None,
              pw : gxp.shape[4] - pw or None]
    gw5 = np.zeros_like(w5)
    k.conv3d_grad_w(gw5, xp, go5, st, sh, sw, dt, dh, dw, spec.groups)
    return gx5.reshape(x.shape).copy(), gw5.reshape(w.shape)


def conv1d(x: np.ndarray, w: np.ndarray, spec: ConvSpec) -> np.ndarray:
    if spec.ndim != 1:
        raise ShapeError("conv1d requires a 1D spec")
    return conv_forward(x, w, spec)


def conv2d(x: np.ndarray, w: np.ndarray, spec: ConvSpec) -> np.ndarray:
    if spec.ndim != 2:
        raise ShapeError("conv2d requires a 2D spec")
    return conv_forward(x, w, spec)


def conv3d(x: np.ndarray, w: np.ndarray, spec: ConvSpec) -> np.ndarray:
    if spec.ndim != 3:
        raise ShapeError("conv3d requires a 3D spec")
    return conv_forward(x, w, spec)


# ---------------------------------------------------------------------------
# Naive oracles: direct nested-loop evaluation, independent of the fast path.
# ---------------------------------------------------------------------------


def naive_conv(x: np.ndarray, w: np.ndarray, spec: ConvSpec) -> np.ndarray:
    if spec.ndim == 1:
        return _naive_conv1d(x, w, spec)
    if spec.ndim == 2:
        return _naive_conv2d(x, w, spec)
    return _naive_conv3d(x, w, spec)


def _naive_conv1d(x, w, spec):
    _check_shapes(x, w, spec)
    n_batch, c_in, length = x.shape
    c_out, cpg, k = w.shape
    (s,), (p,), (d,) = spec.stride, spec.padding, spec.dilation
    (l_out,) = spec.out_extents((length,))
    opg = c_out // spec.groups
    y = np.zeros((n_batch, c_out, l_out), dtype=x.dtype)
    for n in range(n_batch):
        for co in range(c_out):
            ci0 = (co // opg) * cpg
            for i in range(l_out):
                acc = 0.0
                for c in range(cpg):
                    for u in range(k):
                        src = i * s + u * d - p
                        if 0 <= src < length:
                            acc += w[co, c, u] * x[n, ci0 + c, src]
                y[n, co, i] = acc
    return y


def _naive_conv2d(x, w, spec):
    _check_shapes(x, w, spec)
    n_batch, c_in, height, width = x.shape
    c_out, cpg, kh, kw = w.shape
    (sh, sw), (ph, pw), (dh, dw) = spec.stride, spec.padding, spec.dilation
    h_out, w_out = spec.out_extents((height, width))
    opg = c_out // spec.groups
    y = np.zeros((n_batch, c_out, h_out, w_out), dtype=x.dtype)
    for n in range(n_batch):
        for co in range(c_out):
            ci0 = (co // opg) * cpg
            for i in range(h_out):
                for j in range(w_out):
                    acc = 0.0
                    for c in range(cpg):
                        for u in range(kh):
                            hi = i * sh + u * dh - ph
                            if not 0 <= hi < height:
                                continue
                            for v in range(kw):
                                wi = j * sw + v * dw - pw
                                if 0 <= wi < width:
                                    acc += w[co, c, u, v] * x[n, ci0 + c, hi, wi]
                    y[n, co, i, j] = acc
    return y


def _naive_conv3d(x, w, spec):
    _check_shapes(x, w, spec)
    n_batch, c_in, t_in, height, width = x.shape
    c_out, cpg, kt, kh, kw = w.shape
    (st, sh, sw), (pt, ph, pw) = spec.stride, spec.padding
    dt, dh, dw = spec.dilation
    t_out, h_out, w_out = spec.out_extents((t_in, height, width))
    opg = c_out // spec.groups
    y = np.zeros((n_batch, c_out, t_out, h_out, w_out), dtype=x.dtype)
    for n in range(n_batch):
        for co in range(c_out):
            ci0 = (co // opg) * cpg
            for tt in range(t_out):
                for i in range(h_out):
                    for j in range(w_out):
                        acc = 0.0
                        for c in range(cpg):
                            for a in range(kt):
                                ti = tt * st + a * dt - pt
                                if not 0 <= ti < t_in:
                                    continue
                                for u in range(kh):
                                    hi = i * sh + u * dh - ph
                                    if not 0 <= hi < height:
                                        continue
                                    for v in range(kw):
                                        wi = j * sw + v * dw - pw
                                        if 0 <= wi < width:
                                            acc += w[co, c, a, u, v] * x[n, ci0 + c, ti, hi, wi]
                        y[n, co, tt, i, j] = acc
    return y


def mac_count(spec: ConvSpec, input_extents: tuple[int, ...], c_in: int, c_out: int) -> int:
    """Exact multiply-accumulate count of one forward pass (per batch item)."""
    if c_in % spec.groups or c_out % spec.groups:
        raise ShapeError(f"channels ({c_in}, {c_out}) not divisible by groups={spec.groups}")
    out_sp = spec.out_extents(tuple(input_extents))
    positions = 1
    for n in out_sp:
        positions *= n
    taps = 1
    for k in spec.kernel:
        taps *= k
    return positions * c_out * (c_in // spec.groups) * taps
