import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgetree.grid import (
    DensityField,
    GridGeometry,
    _gaussian_kernel,
    downsample_sum,
    gaussian_filter,
)


class TestGeometry:
    def test_index_round_trip(self):
        geom = GridGeometry((4, 3, 5), (1.0, 2.0, 0.5), (10.0, 0.0, -3.0))
        lin = np.arange(geom.num_voxels)
        i, j, k = geom.voxel_of(lin)
        assert np.array_equal(geom.linear_index(i, j, k), lin)
        pos = geom.position(i, j, k)
        assert np.allclose(pos[:, 0], 10.0 + i * 1.0)
        assert np.allclose(pos[:, 2], -3.0 + k * 0.5)

    @given(
        st.tuples(*[st.integers(1, 9)] * 3),
        st.integers(0, 10**6),
    )
    @settings(max_examples=50, deadline=None)
    def test_bijection_random(self, dims, salt):
        geom = GridGeometry(dims)
        lin = salt % geom.num_voxels
        i, j, k = geom.voxel_of(lin)
        assert geom.linear_index(i, j, k) == lin

    def test_rejects_bad_dims_and_spacing(self):
        with pytest.raises(ValueError):
            GridGeometry((0, 2, 2))
        with pytest.raises(ValueError):
            GridGeometry((2, 2, 2), (1.0, 0.0, 1.0))


class TestDensityField:
    def test_invariants(self):
        with pytest.raises(ValueError):
            DensityField(GridGeometry((2, 2, 2)), np.zeros(7))
        with pytest.raises(ValueError):
            DensityField(GridGeometry((2, 1, 1)), np.array([1.0, -0.5]))
        f = DensityField(GridGeometry((2, 2, 1)), np.arange(4, dtype=np.float64))
        assert f.values.dtype == np.float32

    def test_volume_view_is_ijk(self):
        f = DensityField(GridGeometry((2, 3, 4)), np.arange(24))
        vol = f.volume()
        assert vol.shape == (2, 3, 4)
        assert vol[1, 2, 3] == f.at(1, 2, 3) == 1 + 2 * 2 + 3 * 6

    def test_from_volume_round_trip(self, rng):
        vol = rng.random((3, 4, 5)).astype(np.float32)
        f = DensityField.from_volume(vol, (1, 1, 2))
        assert np.array_equal(f.volume(), vol)


class TestGaussianFilter:
    def test_constant_preserved(self, rng):
        f = DensityField(GridGeometry((6, 5, 4)), np.full(120, 3.25, dtype=np.float32))
        for radius in (1, 2, 4):
            out = gaussian_filter(f, radius)
            assert np.max(np.abs(out.values - 3.25)) <= 1e-12 * 3.25

    def test_radius_zero_identity(self, rng):
        vals = (rng.random(60) * 9).astype(np.float32)
        f = DensityField(GridGeometry((5, 4, 3)), vals)
        assert np.array_equal(gaussian_filter(f, 0).values, vals)

    def test_impulse_matches_direct_kernel(self):
        # unit impulse at the centre: response equals the normalized
        # truncated separable kernel, evaluated directly here
        n = 9
        vol = np.zeros((n, n, n), dtype=np.float32)
        vol[4, 4, 4] = 1.0
        out = gaussian_filter(DensityField.from_volume(vol), 2).volume()

        radius, sigma = 2, 1.0
        t = np.arange(-radius, radius + 1, dtype=np.float64)
        k1 = np.exp(-(t * t) / (2 * sigma * sigma))
        k1 /= k1.sum()
        expected = np.zeros((n, n, n))
        for a, wa in zip(range(-2, 3), k1):
            for b, wb in zip(range(-2, 3), k1):
                for c, wc in zip(range(-2, 3), k1):
                    expected[4 + a, 4 + b, 4 + c] = wa * wb * wc
        assert np.allclose(out, expected, atol=1e-7)

    def test_kernel_normalized(self):
        for r in range(6):
            assert abs(_gaussian_kernel(r).sum() - 1.0) < 1e-12

    def test_negative_radius_rejected(self):
        f = DensityField(GridGeometry((2, 2, 2)), np.ones(8))
        with pytest.raises(ValueError):
            gaussian_filter(f, -1)


class TestDownsampleSum:
    def test_block_of_ones(self):
        f = DensityField(GridGeometry((10, 10, 1)), np.ones(100))
        out = downsample_sum(f, (10, 10, 1))
        assert out.dims == (1, 1, 1)
        assert out.values[0] == 100.0
        assert out.spacing == (10.0, 10.0, 1.0)

    def test_identity_factors(self, rng):
        vals = rng.integers(0, 9, size=24).astype(np.float32)
        f = DensityField(GridGeometry((2, 3, 4)), vals)
        assert np.array_equal(downsample_sum(f, (1, 1, 1)).values, vals)

    def test_matches_bruteforce_blocks(self, rng):
        vals = rng.integers(0, 255, size=512).astype(np.float32)
        f = DensityField(GridGeometry((8, 8, 8)), vals)
        out = downsample_sum(f, (2, 2, 2))
        vol, ovol = f.volume(), out.volume()
        for i in range(4):
            for j in range(4):
                for k in range(4):
                    block = vol[2 * i : 2 * i + 2, 2 * j : 2 * j + 2, 2 * k : 2 * k + 2]
                    assert ovol[i, j, k] == block.sum()

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_mass_conserved_exactly(self, seed):
        rng = np.random.default_rng(seed)
        dims = tuple(int(d) for d in rng.integers(1, 9, size=3))
        factors = tuple(int(fc) for fc in rng.integers(1, 4, size=3))
        vals = rng.integers(0, 100, size=dims[0] * dims[1] * dims[2]).astype(np.float32)
        f = DensityField(GridGeometry(dims), vals)
        out = downsample_sum(f, factors)
        assert out.values.sum(dtype=np.float64) == vals.sum(dtype=np.float64)

    def test_partial_trailing_blocks(self):
        f = DensityField(GridGeometry((5, 1, 1)), np.array([1, 2, 3, 4, 5]))
        out = downsample_sum(f, (2, 1, 1))
        assert np.array_equal(out.values, [3, 7, 5])

    def test_zero_factor_rejected(self):
        f = DensityField(GridGeometry((2, 2, 2)), np.ones(8))
        with pytest.raises(ValueError):
            downsample_sum(f, (0, 1, 1))
