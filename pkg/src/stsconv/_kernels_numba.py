"""Numba-jitted convolution loops.

All kernels operate on a pre-padded input `xp` and lifted 3D shapes:
x (N, C_in, Tp, Hp, Wp), w (C_out, C_in/groups, Kt, Kh, Kw). 1D/2D convs
are lowered to this form by the caller with singleton axes.

Parallel loops are over disjoint output (or grad) slices, so results are
bitwise identical for any thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def conv3d_forward(xp, w, st, sh, sw, dt, dh, dw, groups, out):
    n_batch, c_in = xp.shape[0], xp.shape[1]
    c_out, cpg, kt, kh, kw = w.shape
    t_out, h_out, w_out = out.shape[2], out.shape[3], out.shape[4]
    opg = c_out // groups
    for co in prange(c_out):
        g = co // opg
        ci0 = g * cpg
        for n in range(n_batch):
            for to in range(t_out):
                for ho in range(h_out):
                    for wo in range(w_out):
                        acc = 0.0
                        for c in range(cpg):
                            for a in range(kt):
                                ti = to * st + a * dt
                                for b in range(kh):
                                    hi = ho * sh + b * dh
                                    for d in range(kw):
                                        wi = wo * sw + d * dw
                                        acc += w[co, c, a, b, d] * xp[n, ci0 + c, ti, hi, wi]
                        out[n, co, to, ho, wo] = acc
    return out


@njit(cache=True, parallel=True)
def conv3d_grad_x(gxp, w, go, st, sh, sw, dt, dh, dw, groups):
    n_batch, c_in = gxp.shape[0], gxp.shape[1]
    c_out, cpg, kt, kh, kw = w.shape
    t_out, h_out, w_out = go.shape[2], go.shape[3], go.shape[4]
    opg = c_out // groups
    for ci in prange(c_in):
        g = ci // cpg
        c = ci - g * cpg
        co0 = g * opg
        for n in range(n_batch):
            for co in range(co0, co0 + opg):
                for to in range(t_out):
                    for ho in range(h_out):
                        for wo in range(w_out):
                            gv = go[n, co, to, ho, wo]
                            for a in range(kt):
                                ti = to * st + a * dt
                                for b in range(kh):
                                    hi = ho * sh + b * dh
                                    for d in range(kw):
                                        wi = wo * sw + d * dw
                                        gxp[n, ci, ti, hi, wi] += gv * w[co, c, a, b, d]
    return gxp


@njit(cache=True, parallel=True)
def conv3d_grad_w(gw, xp, go, st, sh, sw, dt, dh, dw, groups):
    c_out, cpg, kt, kh, kw = gw.shape
    n_batch = xp.shape[0]
    t_out, h_out, w_out = go.shape[2], go.shape[3], go.shape[4]
    opg = c_out // groups
    for co in prange(c_out):
        g = co // opg
        ci0 = g * cpg
        for c in range(cpg):
            for a in range(kt):
                for b in range(kh):
                    for d in range(kw):
                        acc = 0.0
                        for n in range(n_batch):
                            for to in range(t_out):
                                ti = to * st + a * dt
                                for ho in range(h_out):
                                    hi = ho * sh + b * dh
                                    for wo in range(w_out):
                                        wi = wo * sw + d * dw
                                        acc += go[n, co, to, ho, wo] * xp[n, ci0 + c, ti, hi, wi]
                        gw[co, c, a, b, d] = acc
    return gw
