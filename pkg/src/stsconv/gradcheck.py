"""Finite-difference gradient checking for the conv and STS kernels."""

from __future__ import annotations

import numpy as np

from . import convops, sts
from .convops import ConvSpec


def numerical_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar-valued f at x."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1.0) -> float:
    """Max elementwise |a - n| / max(|a|, |n|, floor)."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _random_conv_instance(ndim: int, rng: np.random.Generator):
    n = int(rng.integers(1, 3))
    groups = int(rng.choice([1, 2]))
    cpg_in = int(rng.integers(1, 3))
    cpg_out = int(rng.integers(1, 3))
    c_in, c_out = groups * cpg_in, groups * cpg_out
    kernel = tuple(int(rng.integers(1, 4)) for _ in range(ndim))
    stride = tuple(int(rng.integers(1, 3)) for _ in range(ndim))
    padding = tuple(int(rng.integers(0, 2)) for _ in range(ndim))
    extents = tuple(int(rng.integers(k + 1, k + 5)) for k in kernel)
    spec = ConvSpec(kernel=kernel, stride=stride, padding=padding, groups=groups)
    x = rng.standard_normal((n, c_in) + extents)
    w = rng.standard_normal((c_out, cpg_in) + kernel)
    return x, w, spec


def check_conv_gradients(ndim: int, rng: np.random.Generator, h: float = 1e-5) -> float:
    """One random instance; returns max relative error over grad_x and grad_w."""
    x, w, spec = _random_conv_instance(ndim, rng)
    go = rng.standard_normal(
        (x.shape[0], w.shape[0]) + spec.out_extents(tuple(x.shape[2:]))
    )
    gx, gw = convops.conv_backward(x, w, spec, go)
    num_x = numerical_gradient(lambda v: float(np.sum(convops.conv_forward(v, w, spec) * go)), x.copy(), h)
    num_w = numerical_gradient(lambda v: float(np.sum(convops.conv_forward(x, v, spec) * go)), w.copy(), h)
    return max(max_rel_error(gx, num_x), max_rel_error(gw, num_w))


def check_sts_gradients(rng: np.random.Generator, h: float = 1e-5) -> float:
    """One random STS instance; max relative error over input and all param groups."""
    c_in = int(rng.integers(2, 5))
    c_out = int(rng.choice([2, 4, 6]))
    kh = int(rng.choice([1, 3]))
    cfg = sts.STSConfig(
        c_in=c_in,
        c_out=c_out,
        kernel=(3, kh, kh),
        static_ratio="1:1",
        row_pad_mode=str(rng.choice(["whole-sequence", "per-row"])),
    )
    shape = (1, c_in, int(rng.integers(2, 4)), int(rng.integers(3, 6)), int(rng.integers(3, 6)))
    x = rng.standard_normal(shape)
    p = sts.STSParams(
        *(rng.standard_normal(s.shape) for s in sts.init_sts_random(cfg, rng).arrays())
    )
    go = rng.standard_normal((shape[0], c_out) + shape[2:])
    gx, gp = sts.sts_backward(x, p, cfg, go)
    worst = max_rel_error(
        gx, numerical_gradient(lambda v: float(np.sum(sts.sts_forward(v, p, cfg) * go)), x.copy(), h)
    )
    arrays = list(p.arrays())
    for i, (name, analytic) in enumerate(zip(p.names(), gp.arrays())):
        def loss(v, i=i):
            trial = list(arrays)
            trial[i] = v
            return float(np.sum(sts.sts_forward(x, sts.STSParams(*trial), cfg) * go))

        worst = max(worst, max_rel_error(analytic, numerical_gradient(loss, arrays[i].copy(), h)))
    return worst


def run_gradcheck(op: str, seed: int = 0, trials: int = 5, h: float = 1e-5) -> float:
    """Max relative error over `trials` random instances of the given op."""
    rng = np.random.default_rng(seed)
    checks = {
        "conv1d": lambda: check_conv_gradients(1, rng, h),
        "conv2d": lambda: check_conv_gradients(2, rng, h),
        "conv3d": lambda: check_conv_gradients(3, rng, h),
        "sts": lambda: check_sts_gradients(rng, h),
    }
    if op not in checks:
        raise ValueError(f"unknown gradcheck op {op!r}; choose from {sorted(checks)}")
    return max(checks[op]() for _ in range(trials))
