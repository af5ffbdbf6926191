import numpy as np
import pytest

from stsconv.tensors import (
    ShapeError,
    check_video,
    concat_channels,
    flatten_cols,
    flatten_rows,
    slice_time,
    split_channels,
    transpose_hw,
    unflatten_cols,
    unflatten_rows,
)


class TestSliceTime:
    def test_t1_identity(self, rng):
        v = rng.standard_normal((2, 3, 1, 4, 5))
        assert np.array_equal(slice_time(v, 0), v[:, :, 0])

    def test_constant_frames(self):
        v = np.broadcast_to(np.arange(3.0)[None, None, :, None, None], (1, 2, 3, 4, 4)).copy()
        assert np.all(slice_time(v, 2) == 2.0)

    def test_matches_direct_indexing(self, rng):
        v = rng.standard_normal((1, 2, 3, 4, 4))
        got = slice_time(v, 1)
        for n in range(1):
            for c in range(2):
                for h in range(4):
                    for w in range(4):
                        assert got[n, c, h, w] == v[n, c, 1, h, w]

    def test_out_of_range(self, rng):
        v = rng.standard_normal((1, 1, 2, 3, 3))
        with pytest.raises(IndexError):
            slice_time(v, 2)
        with pytest.raises(IndexError):
            slice_time(v, -1)

    def test_rejects_wrong_rank(self, rng):
        with pytest.raises(ShapeError):
            check_video(rng.standard_normal((2, 3, 4, 4)))


class TestFlatten:
    def test_row_raster_order(self):
        # [[a,b],[c,d]] -> [a,b,c,d]
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        assert flatten_rows(x).tolist() == [[[1.0, 2.0, 3.0, 4.0]]]

    def test_col_raster_order(self):
        # [[a,b],[c,d]] -> [a,c,b,d]
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        assert flatten_cols(x).tolist() == [[[1.0, 3.0, 2.0, 4.0]]]

    def test_row_indexing_formula(self, rng):
        x = rng.standard_normal((2, 3, 3, 5))
        flat = flatten_rows(x)
        for h in range(3):
            for w in range(5):
                assert np.array_equal(flat[:, :, h * 5 + w], x[:, :, h, w])

    def test_col_indexing_formula(self, rng):
        x = rng.standard_normal((2, 3, 4, 3))
        flat = flatten_cols(x)
        for h in range(4):
            for w in range(3):
                assert np.array_equal(flat[:, :, w * 4 + h], x[:, :, h, w])

    def test_h1_values_unchanged(self, rng):
        x = rng.standard_normal((1, 2, 1, 6))
        assert np.array_equal(flatten_rows(x)[0, 0], x[0, 0, 0])

    @pytest.mark.parametrize("h,w", [(1, 1), (3, 5), (4, 3), (7, 2)])
    def test_roundtrips(self, rng, h, w):
        x = rng.standard_normal((2, 2, h, w))
        assert np.array_equal(unflatten_rows(flatten_rows(x), h, w), x)
        assert np.array_equal(unflatten_cols(flatten_cols(x), h, w), x)

    def test_cols_equals_rows_of_transpose(self, rng):
        x = rng.standard_normal((1, 2, 4, 3))
        assert np.array_equal(flatten_cols(x), flatten_rows(transpose_hw(x)))

    def test_rejects_wrong_rank(self, rng):
        with pytest.raises(ShapeError):
            flatten_rows(rng.standard_normal((2, 3, 4)))
        with pytest.raises(ShapeError):
            unflatten_rows(rng.standard_normal((2, 3, 11)), 3, 4)


class TestChannels:
    def test_concat_blocks(self, rng):
        a = rng.standard_normal((1, 2, 4, 4))
        b = rng.standard_normal((1, 3, 4, 4))
        y = concat_channels(a, b)
        assert y.shape == (1, 5, 4, 4)
        assert np.array_equal(y[:, :2], a)
        assert np.array_equal(y[:, 2:], b)

    def test_concat_empty(self, rng):
        a = rng.standard_normal((1, 2, 4, 4))
        empty = np.empty((1, 0, 4, 4))
        assert np.array_equal(concat_channels(a, empty), a)

    def test_roundtrip(self, rng):
        a = rng.standard_normal((2, 2, 3, 3, 3))
        b = rng.standard_normal((2, 4, 3, 3, 3))
        got_a, got_b = split_channels(concat_channels(a, b), 2)
        assert np.array_equal(got_a, a)
        assert np.array_equal(got_b, b)

    def test_mismatched_dims_rejected(self, rng):
        with pytest.raises(ShapeError):
            concat_channels(rng.standard_normal((1, 2, 4, 4)), rng.standard_normal((1, 2, 5, 4)))
