"""Declarative network specs and a small forward/backward runtime.

A NetworkSpec is an ordered layer description; parameters live in a flat
name -> array store (checkpoint-compatible). Conv layers use symmetric
"same" padding; strides may downsample. 2D conv layers applied to a 5D
video batch act per frame (temporal extent 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import convops, sts as sts_mod
from .convops import ConvSpec, same_padding
from .sts import STSConfig, STSParams
from .tensors import ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


# ---------------------------------------------------------------------------
# Layer descriptors
# ---------------------------------------------------------------------------


@dataclass
class Conv3dLayer:
    kind = "conv3d"
    name: str
    c_in: int
    c_out: int
    kernel: tuple[int, int, int]
    stride: tuple[int, int, int] = (1, 1, 1)
    groups: int = 1


@dataclass
class Conv2dLayer:
    kind = "conv2d"
    name: str
    c_in: int
    c_out: int
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    groups: int = 1


@dataclass
class STSLayer:
    kind = "sts"
    name: str
    c_in: int
    c_out: int
    kernel: tuple[int, int, int] = (3, 3, 3)
    static_ratio: str = "1:1"
    groups: int = 1
    row_pad_mode: str = "whole-sequence"

    def config(self) -> STSConfig:
        return STSConfig(
            c_in=self.c_in,
            c_out=self.c_out,
            kernel=tuple(self.kernel),
            static_ratio=self.static_ratio,
            groups=self.groups,
            row_pad_mode=self.row_pad_mode,
        )


@dataclass
class STSSliceLayer:
    """2D slice of an STS layer at temporal offset t (probe output only)."""

    kind = "sts_slice"
    name: str
    c_in: int
    c_out: int
    kernel: tuple[int, int, int] = (3, 3, 3)
    static_ratio: str = "1:1"
    groups: int = 1
    row_pad_mode: str = "whole-sequence"
    t: int = 1

    def config(self) -> STSConfig:
        return STSConfig(
            c_in=self.c_in,
            c_out=self.c_out,
            kernel=tuple(self.kernel),
            static_ratio=self.static_ratio,
            groups=self.groups,
            row_pad_mode=self.row_pad_mode,
        )


@dataclass
class NormLayer:
    kind = "norm"
    name: str
    channels: int


@dataclass
class ReluLayer:
    kind = "relu"
    name: str = ""


@dataclass
class PoolLayer:
    kind = "pool"
    op: str  # "max" or "avg"
    kernel: tuple[int, int]
    stride: tuple[int, int]
    name: str = ""


@dataclass
class GlobalAvgPoolLayer:
    kind = "gap"
    name: str = ""


@dataclass
class LinearLayer:
    kind = "linear"
    name: str
    in_features: int
    out_features: int


@dataclass
class ResidualLayer:
    kind = "residual"
    body: list
    shortcut: list = field(default_factory=list)  # empty = identity
    name: str = ""


LAYER_KINDS = {
    cls.kind: cls
    for cls in (
        Conv3dLayer,
        Conv2dLayer,
        STSLayer,
        STSSliceLayer,
        NormLayer,
        ReluLayer,
        PoolLayer,
        GlobalAvgPoolLayer,
        LinearLayer,
        ResidualLayer,
    )
}


@dataclass
class NetworkSpec:
    layers: list
    in_channels: int
    num_classes: int

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "num_classes": self.num_classes,
            "layers": [_layer_to_dict(l) for l in self.layers],
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkSpec":
        return NetworkSpec(
            layers=[_layer_from_dict(l) for l in d["layers"]],
            in_channels=d["in_channels"],
            num_classes=d["num_classes"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @staticmethod
    def load(path: str | Path) -> "NetworkSpec":
        return NetworkSpec.from_dict(json.loads(Path(path).read_text()))


def _layer_to_dict(layer) -> dict:
    d = {"kind": layer.kind}
    if layer.kind == "residual":
        d["body"] = [_layer_to_dict(l) for l in layer.body]
        d["shortcut"] = [_layer_to_dict(l) for l in layer.shortcut]
        d["name"] = layer.name
        return d
    for k, v in vars(layer).items():
        d[k] = list(v) if isinstance(v, tuple) else v
    return d


def _layer_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if kind not in LAYER_KINDS:
        raise ShapeError(f"unsupported layer kind {kind!r}")
    if kind == "residual":
        return ResidualLayer(
            body=[_layer_from_dict(l) for l in d["body"]],
            shortcut=[_layer_from_dict(l) for l in d.get("shortcut", [])],
            name=d.get("name", ""),
        )
    for key in ("kernel", "stride"):
        if key in d:
            d[key] = tuple(d[key])
    return LAYER_KINDS[kind](**d)


# ---------------------------------------------------------------------------
# Parameter initialization
# ---------------------------------------------------------------------------


def init_params(
    spec: NetworkSpec, rng: np.random.Generator, dtype=np.float64
) -> dict[str, np.ndarray]:
    """Fan-in uniform init for convs/linear, unit norm stats, STS split init."""
    params: dict[str, np.ndarray] = {}

    def visit(layers):
        for layer in layers:
            if layer.kind in ("conv3d", "conv2d"):
                cpg = layer.c_in // layer.groups
                fan_in = cpg * int(np.prod(layer.kernel))
                bound = 1.0 / np.sqrt(fan_in)
                shape = (layer.c_out, cpg) + tuple(layer.kernel)
                params[f"{layer.name}.weight"] = rng.uniform(-bound, bound, shape).astype(dtype)
            elif layer.kind == "sts":
                p = sts_mod.init_sts_random(layer.config(), rng, dtype)
                for pname, arr in zip(STSParams.names(), p.arrays()):
                    params[f"{layer.name}.{pname}"] = arr
            elif layer.kind == "norm":
                c = layer.channels
                params[f"{layer.name}.gamma"] = np.ones(c, dtype=dtype)
                params[f"{layer.name}.beta"] = np.zeros(c, dtype=dtype)
                params[f"{layer.name}.running_mean"] = np.zeros(c, dtype=dtype)
                params[f"{layer.name}.running_var"] = np.ones(c, dtype=dtype)
            elif layer.kind == "linear":
                bound = 1.0 / np.sqrt(layer.in_features)
                params[f"{layer.name}.weight"] = rng.uniform(
                    -bound, bound, (layer.out_features, layer.in_features)
                ).astype(dtype)
                params[f"{layer.name}.bias"] = np.zeros(layer.out_features, dtype=dtype)
            elif layer.kind == "residual":
                visit(layer.body)
                visit(layer.shortcut)

    visit(spec.layers)
    return params


def trainable_names(params: dict[str, np.ndarray]) -> list[str]:
    return [k for k in params if not k.endswith((".running_mean", ".running_var"))]


def decay_names(params: dict[str, np.ndarray]) -> set[str]:
    """Weight decay applies to conv/linear weights, not norm affine or biases."""
    return {
        k
        for k in trainable_names(params)
        if not k.endswith((".gamma", ".beta", ".bias"))
    }


# ---------------------------------------------------------------------------
# Runtime
# ---------------------------------------------------------------------------


def _fold_time(x: np.ndarray) -> tuple[np.ndarray, int]:
    # (N,C,T,H,W) -> (N*T, C, H, W)
    n, c, t, h, w = x.shape
    return np.ascontiguousarray(x.transpose(0, 2, 1, 3, 4)).reshape(n * t, c, h, w), t


def _unfold_time(x: np.ndarray, t: int) -> np.ndarray:
    nt, c, h, w = x.shape
    n = nt // t
    return np.ascontiguousarray(x.reshape(n, t, c, h, w).transpose(0, 2, 1, 3, 4))


class _RtBase:
    def __init__(self, net: "Net", layer):
        self.net = net
        self.layer = layer


class _RtConv2d(_RtBase):
    def spec(self):
        l = self.layer
        return ConvSpec(
            kernel=l.kernel, stride=l.stride, padding=same_padding(l.kernel), groups=l.groups
        )

    def forward(self, x, train):
        w = self.net.params[f"{self.layer.name}.weight"]
        self._t = None
        if x.ndim == 5:
            x, self._t = _fold_time(x)
        self._x = x
        y = convops.conv2d(x, w, self.spec())
        return _unfold_time(y, self._t) if self._t else y

    def backward(self, g):
        w = self.net.params[f"{self.layer.name}.weight"]
        if self._t:
            g, _ = _fold_time(g)
        gx, gw = convops.conv_backward(self._x, w, self.spec(), np.ascontiguousarray(g))
        self.net.grads[f"{self.layer.name}.weight"] += gw
        return _unfold_time(gx, self._t) if self._t else gx


class _RtConv3d(_RtBase):
    def spec(self):
        l = self.layer
        return ConvSpec(
            kernel=l.kernel, stride=l.stride, padding=same_padding(l.kernel), groups=l.groups
        )

    def forward(self, x, train):
        if x.ndim != 5:
            raise ShapeError("conv3d layer needs a 5D video batch")
        self._x = x
        return convops.conv3d(x, self.net.params[f"{self.layer.name}.weight"], self.spec())

    def backward(self, g):
        w = self.net.params[f"{self.layer.name}.weight"]
        gx, gw = convops.conv_backward(self._x, w, self.spec(), np.ascontiguousarray(g))
        self.net.grads[f"{self.layer.name}.weight"] += gw
        return gx


class _RtSTS(_RtBase):
    def _params(self):
        n = self.layer.name
        return STSParams(*(self.net.params[f"{n}.{p}"] for p in STSParams.names()))

    def forward(self, x, train):
        self._x = x
        return sts_mod.sts_forward(x, self._params(), self.layer.config())

    def backward(self, g):
        gx, gp = sts_mod.sts_backward(self._x, self._params(), self.layer.config(), g)
        for pname, arr in zip(STSParams.names(), gp.arrays()):
            self.net.grads[f"{self.layer.name}.{pname}"] += arr
        return gx


class _RtSTSSlice(_RtBase):
    """Forward-only 2D probe of an STS layer at a fixed temporal offset."""

    def forward(self, x, train):
        if x.ndim != 4:
            raise ShapeError("sts_slice layer needs a 4D image batch")
        l = self.layer
        cfg = l.config()
        n = l.name
        p = self.net.params
        s_slice, s_groups, d_slice, d_groups = sts_mod._branches(cfg)
        xs = np.ascontiguousarray(x[:, s_slice])
        if l.t == 0:
            static = sts_mod._conv1d_flat(xs, p[f"{n}.alpha0"], cfg, s_groups, "row")
        elif l.t == 1:
            spec2d = sts_mod._spatial_spec(cfg, s_groups)
            static = convops.conv2d(xs, p[f"{n}.alpha1"], spec2d)
        else:
            static = sts_mod._conv1d_flat(xs, p[f"{n}.alpha2"], cfg, s_groups, "col")
        kh, kw = cfg.kernel[1], cfg.kernel[2]
        beta_t = np.ascontiguousarray(p[f"{n}.beta"][:, :, l.t])
        spec_d = ConvSpec(kernel=(kh, kw), padding=same_padding((kh, kw)), groups=d_groups)
        dynamic = convops.conv2d(np.ascontiguousarray(x[:, d_slice]), beta_t, spec_d)
        return np.concatenate([static, dynamic], axis=1)

    def backward(self, g):
        raise NotImplementedError("probed networks are evaluate-only")


class _RtNorm(_RtBase):
    def forward(self, x, train):
        n = self.layer.name
        p = self.net.params
        gamma, beta = p[f"{n}.gamma"], p[f"{n}.beta"]
        axes = (0,) + tuple(range(2, x.ndim))
        shape = (1, -1) + (1,) * (x.ndim - 2)
        self._axes, self._shape = axes, shape
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            rm, rv = p[f"{n}.running_mean"], p[f"{n}.running_var"]
            rm *= 1 - BN_MOMENTUM
            rm += BN_MOMENTUM * mean
            rv *= 1 - BN_MOMENTUM
            rv += BN_MOMENTUM * var
        else:
            mean = p[f"{n}.running_mean"]
            var = p[f"{n}.running_var"]
        self._inv_std = 1.0 / np.sqrt(var + BN_EPS)
        self._xhat = (x - mean.reshape(shape)) * self._inv_std.reshape(shape)
        self._train = train
        return gamma.reshape(shape) * self._xhat + beta.reshape(shape)

    def backward(self, g):
        n = self.layer.name
        gamma = self.net.params[f"{n}.gamma"]
        axes, shape = self._axes, self._shape
        self.net.grads[f"{n}.gamma"] += np.sum(g * self._xhat, axis=axes)
        self.net.grads[f"{n}.beta"] += np.sum(g, axis=axes)
        gs = g * gamma.reshape(shape)
        if not self._train:
            return gs * self._inv_std.reshape(shape)
        m = g.size // g.shape[1]
        mean_gs = gs.mean(axis=axes).reshape(shape)
        mean_gs_xhat = (gs * self._xhat).mean(axis=axes).reshape(shape)
        return self._inv_std.reshape(shape) * (gs - mean_gs - self._xhat * mean_gs_xhat)


class _RtRelu(_RtBase):
    def forward(self, x, train):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, g):
        return np.where(self._mask, g, 0.0)


class _RtPool(_RtBase):
    def forward(self, x, train):
        l = self.layer
        self._t = None
        if x.ndim == 5:
            x, self._t = _fold_time(x)
        self._x_shape = x.shape
        kh, kw = l.kernel
        sh, sw = l.stride
        windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
        windows = windows[:, :, ::sh, ::sw]
        flat = windows.reshape(windows.shape[:4] + (kh * kw,))
        if l.op == "max":
            self._argmax = flat.argmax(axis=-1)
            y = flat.max(axis=-1)
        elif l.op == "avg":
            y = flat.mean(axis=-1)
        else:
            raise ShapeError(f"unknown pool op {l.op!r}")
        self._out_shape = y.shape
        return _unfold_time(y, self._t) if self._t else y

    def backward(self, g):
        l = self.layer
        if self._t:
            g, _ = _fold_time(g)
        kh, kw = l.kernel
        sh, sw = l.stride
        gx = np.zeros(self._x_shape, dtype=g.dtype)
        n, c, ho, wo = self._out_shape
        hi = np.arange(ho)[:, None] * sh
        wi = np.arange(wo)[None, :] * sw
        if l.op == "max":
            dh, dw = self._argmax // kw, self._argmax % kw
            for nn in range(n):
                for cc in range(c):
                    np.add.at(
                        gx[nn, cc],
                        (hi + dh[nn, cc], wi + dw[nn, cc]),
                        g[nn, cc],
                    )
        else:
            scale = 1.0 / (kh * kw)
            for u in range(kh):
                for v in range(kw):
                    gx[:, :, u : u + sh * (ho - 1) + 1 : sh, v : v + sw * (wo - 1) + 1 : sw] += (
                        g * scale
                    )
        return _unfold_time(gx, self._t) if self._t else gx


class _RtGap(_RtBase):
    def forward(self, x, train):
        self._in_shape = x.shape
        axes = tuple(range(2, x.ndim))
        return x.mean(axis=axes)

    def backward(self, g):
        shape = self._in_shape
        count = int(np.prod(shape[2:]))
        g_full = (g / count).reshape(g.shape + (1,) * (len(shape) - 2))
        return np.broadcast_to(g_full, shape).copy()


class _RtLinear(_RtBase):
    def forward(self, x, train):
        if x.ndim != 2:
            raise ShapeError("linear layer needs a 2D (N, D) input")
        self._x = x
        n = self.layer.name
        return x @ self.net.params[f"{n}.weight"].T + self.net.params[f"{n}.bias"]

    def backward(self, g):
        n = self.layer.name
        self.net.grads[f"{n}.weight"] += g.T @ self._x
        self.net.grads[f"{n}.bias"] += g.sum(axis=0)
        return g @ self.net.params[f"{n}.weight"]


class _RtResidual(_RtBase):
    def __init__(self, net, layer):
        super().__init__(net, layer)
        self.body = [_RUNTIME[l.kind](net, l) for l in layer.body]
        self.shortcut = [_RUNTIME[l.kind](net, l) for l in layer.shortcut]

    def forward(self, x, train):
        y = x
        for rt in self.body:
            y = rt.forward(y, train)
        s = x
        for rt in self.shortcut:
            s = rt.forward(s, train)
        return y + s

    def backward(self, g):
        gb = g
        for rt in reversed(self.body):
            gb = rt.backward(gb)
        gs = g
        for rt in reversed(self.shortcut):
            gs = rt.backward(gs)
        return gb + gs


_RUNTIME = {
    "conv2d": _RtConv2d,
    "conv3d": _RtConv3d,
    "sts": _RtSTS,
    "sts_slice": _RtSTSSlice,
    "norm": _RtNorm,
    "relu": _RtRelu,
    "pool": _RtPool,
    "gap": _RtGap,
    "linear": _RtLinear,
    "residual": _RtResidual,
}


class Net:
    """Executable network: spec + parameter store, with manual backprop."""

    def __init__(self, spec: NetworkSpec, params: dict[str, np.ndarray]):
        self.spec = spec
        self.params = params
        self.grads: dict[str, np.ndarray] = {}
        self._layers = [_RUNTIME[l.kind](self, l) for l in spec.layers]

    def zero_grads(self) -> None:
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for rt in self._layers:
            x = rt.forward(x, train)
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if not self.grads:
            self.zero_grads()
        g = grad_out
        for rt in reversed(self._layers):
            g = rt.backward(g)
        return g

    def features(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode activations just before the linear head."""
        for rt in self._layers:
            if rt.layer.kind == "linear":
                break
            x = rt.forward(x, False)
        return x
