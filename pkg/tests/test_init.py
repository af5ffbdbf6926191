import numpy as np
import pytest

from stsconv.convops import ConvSpec, conv2d, conv3d, same_padding
from stsconv.inflate import (
    ZERO_INIT,
    InflationRates,
    inflate_2d_to_3d,
    init_sts_from_2d,
    zero_init_3d,
)
from stsconv.sts import STSConfig, sts_forward
from stsconv.tensors import ShapeError


class TestInflationRates:
    def test_zero_init_constant(self):
        assert ZERO_INIT.rates == (0, 1, 0)

    def test_rejects_wrong_arity(self):
        with pytest.raises(ValueError):
            InflationRates((1, 0))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            InflationRates((-0.1, 1, 0))

    def test_rejects_all_zero(self):
        with pytest.raises(ValueError):
            InflationRates((0, 0, 0))


class TestInflate:
    def test_slice_scaling(self, rng):
        w2d = rng.standard_normal((4, 2, 3, 3))
        w3d = inflate_2d_to_3d(w2d, InflationRates((0.25, 0.5, 0.25)))
        assert w3d.shape == (4, 2, 3, 3, 3)
        assert np.array_equal(w3d[:, :, 0], 0.25 * w2d)
        assert np.array_equal(w3d[:, :, 1], 0.5 * w2d)
        assert np.array_equal(w3d[:, :, 2], 0.25 * w2d)

    def test_zero_init_slices(self, rng):
        w2d = rng.standard_normal((3, 3, 5, 5))
        w3d = zero_init_3d(w2d)
        assert np.all(w3d[:, :, 0] == 0)
        assert np.array_equal(w3d[:, :, 1], w2d)
        assert np.all(w3d[:, :, 2] == 0)

    def test_dtype_preserved(self, rng):
        w2d = rng.standard_normal((2, 2, 3, 3)).astype(np.float32)
        assert inflate_2d_to_3d(w2d, ZERO_INIT).dtype == np.float32

    def test_rejects_wrong_rank(self, rng):
        with pytest.raises(ShapeError):
            inflate_2d_to_3d(rng.standard_normal((2, 2, 3)), ZERO_INIT)

    def test_uniform_rates_sum(self, rng):
        """Sum of the temporal taps of a uniformly inflated kernel equals the 2D kernel."""
        w2d = rng.standard_normal((3, 2, 3, 3))
        w3d = inflate_2d_to_3d(w2d, InflationRates((1 / 3, 1 / 3, 1 / 3)))
        assert np.max(np.abs(w3d.sum(axis=2) - w2d)) < 1e-12


class TestZeroInitEquivalence:
    def test_per_frame_exact(self, backend):
        """Zero-init 3D conv on video equals the 2D conv applied per frame, bitwise."""
        rng = np.random.default_rng(3)
        spec2d = ConvSpec(kernel=(3, 3), padding=1)
        spec3d = ConvSpec(kernel=(3, 3, 3), padding=same_padding((3, 3, 3)))
        for _ in range(20):
            c_in, c_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            w2d = rng.standard_normal((c_out, c_in, 3, 3))
            x = rng.standard_normal((2, c_in, int(rng.integers(2, 5)), 5, 6))
            y3d = conv3d(x, zero_init_3d(w2d), spec3d)
            for t in range(x.shape[2]):
                assert np.array_equal(y3d[:, :, t], conv2d(x[:, :, t], w2d, spec2d))

    def test_constant_video_uniform_inflation(self, backend, rng):
        """On a temporally constant interior, rates summing to 1 reproduce the 2D response."""
        frame = rng.standard_normal((1, 2, 6, 6))
        x = np.repeat(frame[:, :, None], 5, axis=2)
        w2d = rng.standard_normal((3, 2, 3, 3))
        w3d = inflate_2d_to_3d(w2d, InflationRates((0.25, 0.5, 0.25)))
        y3d = conv3d(x, w3d, ConvSpec(kernel=(3, 3, 3), padding=1))
        y2d = conv2d(frame, w2d, ConvSpec(kernel=(3, 3), padding=1))
        # interior frames only: the ends see zero temporal padding
        assert np.max(np.abs(y3d[:, :, 1:-1] - y2d[:, :, None])) < 1e-12


class TestInitStsFrom2d:
    def test_placement(self, rng):
        cfg = STSConfig(c_in=3, c_out=5)
        w2d = rng.standard_normal((5, 3, 3, 3))
        p = init_sts_from_2d(w2d, cfg)
        so = cfg.static_out
        assert np.all(p.alpha0 == 0) and np.all(p.alpha2 == 0)
        assert np.array_equal(p.alpha1, w2d[:so])
        assert np.array_equal(p.beta, zero_init_3d(w2d[so:]))

    def test_per_frame_oracle(self, backend):
        """A 2D-initialized STS layer equals the source 2D conv on every frame, bitwise."""
        rng = np.random.default_rng(9)
        for ratio in ("1:1", "1:2", "2:1"):
            cfg = STSConfig(c_in=2, c_out=6, static_ratio=ratio)
            w2d = rng.standard_normal((6, 2, 3, 3))
            p = init_sts_from_2d(w2d, cfg)
            x = rng.standard_normal((2, 2, 3, 5, 5))
            y = sts_forward(x, p, cfg)
            spec2d = ConvSpec(kernel=(3, 3), padding=1)
            for t in range(3):
                assert np.array_equal(y[:, :, t], conv2d(x[:, :, t], w2d, spec2d))

    def test_frame_permutation_equivariance(self, backend, rng):
        """The initialized layer is per-frame, so permuting frames permutes outputs."""
        cfg = STSConfig(c_in=2, c_out=4)
        p = init_sts_from_2d(rng.standard_normal((4, 2, 3, 3)), cfg)
        x = rng.standard_normal((1, 2, 4, 5, 5))
        perm = np.array([2, 0, 3, 1])
        y = sts_forward(x, p, cfg)
        y_perm = sts_forward(x[:, :, perm], p, cfg)
        assert np.array_equal(y_perm, y[:, :, perm])

    def test_shape_check(self, rng):
        cfg = STSConfig(c_in=2, c_out=4)
        with pytest.raises(ShapeError):
            init_sts_from_2d(rng.standard_normal((4, 2, 3, 5)), cfg)
        with pytest.raises(ShapeError):
            init_sts_from_2d(rng.standard_normal((4, 2, 3)), cfg)
