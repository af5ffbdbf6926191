"""Pure-numpy fallback for the convolution loops.

Same contracts and argument conventions as `_kernels_numba`: pre-padded
input, lifted 3D shapes. Vectorized over batch and output positions by
iterating only over kernel taps and groups.
"""

from __future__ import annotations

import numpy as np


def _tap_slice(k, dil, stride, n_out):
    start = k * dil
    return slice(start, start + stride * (n_out - 1) + 1, stride)


def conv3d_forward(xp, w, st, sh, sw, dt, dh, dw, groups, out):
    c_out, cpg, kt, kh, kw = w.shape
    t_out, h_out, w_out = out.shape[2], out.shape[3], out.shape[4]
    opg = c_out // groups
    for g in range(groups):
        ci = slice(g * cpg, (g + 1) * cpg)
        co = slice(g * opg, (g + 1) * opg)
        for a in range(kt):
            ts = _tap_slice(a, dt, st, t_out)
            for b in range(kh):
                hs = _tap_slice(b, dh, sh, h_out)
                for d in range(kw):
                    ws = _tap_slice(d, dw, sw, w_out)
                    xs = xp[:, ci, ts, hs, ws]
                    out[:, co] += np.einsum("ncthw,oc->nothw", xs, w[co, :, a, b, d])
    return out


def conv3d_grad_x(gxp, w, go, st, sh, sw, dt, dh, dw, groups):
    c_out, cpg, kt, kh, kw = w.shape
    t_out, h_out, w_out = go.shape[2], go.shape[3], go.shape[4]
    opg = c_out // groups
    for g in range(groups):
        ci = slice(g * cpg, (g + 1) * cpg)
        co = slice(g * opg, (g + 1) * opg)
        for a in range(kt):
            ts = _tap_slice(a, dt, st, t_out)
            for b in range(kh):
                hs = _tap_slice(b, dh, sh, h_out)
                for d in range(kw):
                    ws = _tap_slice(d, dw, sw, w_out)
                    gxp[:, ci, ts, hs, ws] += np.einsum(
                        "nothw,oc->ncthw", go[:, co], w[co, :, a, b, d]
                    )
    return gxp


def conv3d_grad_w(gw, xp, go, st, sh, sw, dt, dh, dw, groups):
    c_out, cpg, kt, kh, kw = gw.shape
    t_out, h_out, w_out = go.shape[2], go.shape[3], go.shape[4]
    opg = c_out // groups
    for g in range(groups):
        ci = slice(g * cpg, (g + 1) * cpg)
        co = slice(g * opg, (g + 1) * opg)
        for a in range(kt):
            ts = _tap_slice(a, dt, st, t_out)
            for b in range(kh):
                hs = _tap_slice(b, dh, sh, h_out)
                for d in range(kw):
                    ws = _tap_slice(d, dw, sw, w_out)
                    xs = xp[:, ci, ts, hs, ws]
                    gw[co, :, a, b, d] = np.einsum("nothw,ncthw->oc", go[:, co], xs)
    return gw
