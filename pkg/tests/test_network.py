import numpy as np
import pytest

from stsconv.gradcheck import max_rel_error
from stsconv.network import (
    Conv2dLayer,
    Conv3dLayer,
    GlobalAvgPoolLayer,
    LinearLayer,
    Net,
    NetworkSpec,
    NormLayer,
    PoolLayer,
    ReluLayer,
    ResidualLayer,
    STSLayer,
    decay_names,
    init_params,
    trainable_names,
)
from stsconv.tensors import ShapeError


def small_spec():
    return NetworkSpec(
        layers=[
            Conv2dLayer("c1", 1, 4, kernel=(3, 3), stride=(2, 2)),
            NormLayer("n1", 4),
            ReluLayer(),
            ResidualLayer(
                body=[
                    Conv2dLayer("r1.c1", 4, 4, kernel=(3, 3)),
                    NormLayer("r1.n1", 4),
                    ReluLayer(),
                ],
                name="r1",
            ),
            PoolLayer(op="max", kernel=(2, 2), stride=(2, 2), name="p1"),
            GlobalAvgPoolLayer(),
            LinearLayer("head", 4, 3),
        ],
        in_channels=1,
        num_classes=3,
    )


def video_spec():
    return NetworkSpec(
        layers=[
            Conv3dLayer("c1", 2, 4, kernel=(3, 3, 3)),
            NormLayer("n1", 4),
            ReluLayer(),
            STSLayer("s1", 4, 4),
            GlobalAvgPoolLayer(),
            LinearLayer("head", 4, 2),
        ],
        in_channels=2,
        num_classes=2,
    )


class TestShapes:
    def test_image_net_output(self, rng):
        spec = small_spec()
        net = Net(spec, init_params(spec, rng))
        y = net.forward(rng.standard_normal((5, 1, 16, 16)))
        assert y.shape == (5, 3)

    def test_video_net_output(self, rng):
        spec = video_spec()
        net = Net(spec, init_params(spec, rng))
        y = net.forward(rng.standard_normal((2, 2, 4, 8, 8)))
        assert y.shape == (2, 2)

    def test_stride_downsamples(self, rng):
        spec = NetworkSpec([Conv2dLayer("c", 1, 2, kernel=(3, 3), stride=(2, 2))], 1, 0)
        net = Net(spec, init_params(spec, rng))
        assert net.forward(rng.standard_normal((1, 1, 8, 8))).shape == (1, 2, 4, 4)


class TestNorm:
    def test_train_mode_normalizes_batch(self, rng):
        spec = NetworkSpec([NormLayer("n", 3)], 3, 0)
        net = Net(spec, init_params(spec, rng))
        x = 5.0 + 2.0 * rng.standard_normal((8, 3, 6, 6))
        y = net.forward(x, train=True)
        assert np.max(np.abs(y.mean(axis=(0, 2, 3)))) < 1e-10
        assert np.max(np.abs(y.std(axis=(0, 2, 3)) - 1.0)) < 1e-3

    def test_eval_uses_running_stats(self, rng):
        spec = NetworkSpec([NormLayer("n", 2)], 2, 0)
        params = init_params(spec, rng)
        net = Net(spec, params)
        x = rng.standard_normal((4, 2, 5, 5))
        # fresh stats are (0, 1): eval mode is then a near-identity
        y = net.forward(x, train=False)
        assert np.max(np.abs(y - x)) < 1e-4

    def test_running_stats_update_in_train_only(self, rng):
        spec = NetworkSpec([NormLayer("n", 2)], 2, 0)
        params = init_params(spec, rng)
        net = Net(spec, params)
        x = 3.0 + rng.standard_normal((4, 2, 5, 5))
        net.forward(x, train=False)
        assert np.all(params["n.running_mean"] == 0)
        net.forward(x, train=True)
        assert np.all(params["n.running_mean"] != 0)

    def test_affine_applied(self, rng):
        spec = NetworkSpec([NormLayer("n", 2)], 2, 0)
        params = init_params(spec, rng)
        params["n.gamma"][:] = 2.0
        params["n.beta"][:] = 1.0
        net = Net(spec, params)
        x = rng.standard_normal((4, 2, 5, 5))
        y = net.forward(x, train=True)
        assert abs(float(y.mean()) - 1.0) < 1e-10


class TestSpecRoundtrip:
    def test_json_roundtrip(self, tmp_path, rng):
        from stsconv.harness import build_tiny_net

        for variant in ("2d", "3x1x1", "3x3x3", "sts-3x3x3"):
            spec = build_tiny_net(variant, num_classes=5)
            path = tmp_path / f"{variant}.json"
            spec.save(path)
            loaded = NetworkSpec.load(path)
            assert loaded == spec

    def test_roundtrip_runs_identically(self, tmp_path, rng):
        spec = video_spec()
        params = init_params(spec, rng)
        x = rng.standard_normal((1, 2, 3, 8, 8))
        y1 = Net(spec, params).forward(x)
        path = tmp_path / "net.json"
        spec.save(path)
        y2 = Net(NetworkSpec.load(path), params).forward(x)
        assert np.array_equal(y1, y2)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ShapeError):
            NetworkSpec.from_dict(
                {"in_channels": 1, "num_classes": 2, "layers": [{"kind": "warp"}]}
            )


class TestFoldTime:
    def test_2d_on_video_equals_per_frame(self, rng):
        """A 2D conv applied to a 5D batch matches frame-by-frame application."""
        spec = NetworkSpec([Conv2dLayer("c", 2, 3, kernel=(3, 3))], 2, 0)
        params = init_params(spec, rng)
        net = Net(spec, params)
        x = rng.standard_normal((2, 2, 4, 6, 6))
        y = net.forward(x)
        for t in range(4):
            yt = net.forward(x[:, :, t])
            assert np.array_equal(y[:, :, t], yt)


class TestGradients:
    def _check(self, spec, x, seed=0):
        params = init_params(spec, np.random.default_rng(seed))
        net = Net(spec, params)
        g_out = np.random.default_rng(seed + 1).standard_normal(
            net.forward(x, train=True).shape
        )

        def loss(p):
            return float(np.sum(Net(spec, p).forward(x, train=True) * g_out))

        net.zero_grads()
        net.forward(x, train=True)
        net.backward(g_out)
        h = 1e-5
        worst = 0.0
        rng = np.random.default_rng(seed + 2)
        for name in trainable_names(params):
            flat_idx = rng.integers(params[name].size, size=min(4, params[name].size))
            for i in np.unique(flat_idx):
                idx = np.unravel_index(i, params[name].shape)
                p_hi = {k: v.copy() for k, v in params.items()}
                p_lo = {k: v.copy() for k, v in params.items()}
                p_hi[name][idx] += h
                p_lo[name][idx] -= h
                num = (loss(p_hi) - loss(p_lo)) / (2 * h)
                worst = max(worst, max_rel_error(np.array(num), np.array(net.grads[name][idx])))
        return worst

    def test_image_net_param_grads(self, rng):
        x = rng.standard_normal((3, 1, 16, 16))
        assert self._check(small_spec(), x) < 1e-6

    def test_video_net_param_grads(self, rng):
        x = rng.standard_normal((2, 2, 3, 6, 6))
        assert self._check(video_spec(), x) < 1e-6

    def test_input_gradient(self, rng):
        spec = NetworkSpec(
            [Conv2dLayer("c", 1, 2, kernel=(3, 3)), ReluLayer(), GlobalAvgPoolLayer()], 1, 0
        )
        params = init_params(spec, rng)
        net = Net(spec, params)
        x = rng.standard_normal((1, 1, 5, 5))
        g_out = rng.standard_normal((1, 2))
        net.zero_grads()
        net.forward(x, train=True)
        gx = net.backward(g_out)
        h = 1e-5
        worst = 0.0
        for idx in [(0, 0, 0, 0), (0, 0, 2, 3), (0, 0, 4, 4)]:
            x_hi, x_lo = x.copy(), x.copy()
            x_hi[idx] += h
            x_lo[idx] -= h
            num = (
                float(np.sum(net.forward(x_hi, train=True) * g_out))
                - float(np.sum(net.forward(x_lo, train=True) * g_out))
            ) / (2 * h)
            worst = max(worst, max_rel_error(np.array(num), np.array(gx[idx])))
        assert worst < 1e-6


class TestParamNames:
    def test_running_stats_not_trainable(self, rng):
        spec = small_spec()
        params = init_params(spec, rng)
        names = trainable_names(params)
        assert "n1.running_mean" not in names and "n1.gamma" in names

    def test_decay_excludes_norm_and_bias(self, rng):
        spec = small_spec()
        d = decay_names(init_params(spec, rng))
        assert "c1.weight" in d and "head.weight" in d
        assert "n1.gamma" not in d and "n1.beta" not in d and "head.bias" not in d

    def test_residual_params_initialized(self, rng):
        params = init_params(small_spec(), rng)
        assert "r1.c1.weight" in params and "r1.n1.gamma" in params

    def test_features_stops_before_head(self, rng):
        spec = small_spec()
        net = Net(spec, init_params(spec, rng))
        f = net.features(np.zeros((2, 1, 16, 16)))
        assert f.shape == (2, 4)
