import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pool_scalar
from vortex_pooling.footprint import pyramid_cost
from vortex_pooling.pooling import (
    OpCounter,
    PoolSpec,
    avg_pool,
    count_map,
    global_avg_pool,
    pyramid_cascaded,
    pyramid_naive,
    sum_pool,
)
from vortex_pooling.tensor import fmap_read, rng_fill


def delta(h, w, i, j, c=1):
    x = np.zeros((h, w, c))
    x[i, j] = 1.0
    return x


class TestSumPool:
    def test_constant_interior(self):
        out = sum_pool(np.full((5, 5, 2), 0.5), PoolSpec(3, 1, "sum"))
        assert np.all(out[1:-1, 1:-1] == 4.5)

    def test_impulse_response(self):
        out = sum_pool(delta(7, 7, 3, 4), PoolSpec(3, 1, "sum"))
        expect = np.zeros((7, 7, 1))
        expect[2:5, 3:6] = 1.0
        np.testing.assert_array_equal(out, expect)

    def test_single_pixel(self):
        assert sum_pool(np.full((1, 1, 1), 5.0), PoolSpec(3, 1, "sum"))[0, 0, 0] == 5.0

    @pytest.mark.parametrize("k, d", [(3, 1), (3, 2), (5, 3)])
    def test_matches_scalar_loop(self, k, d):
        x = rng_fill(17, 6, 9, 2)
        np.testing.assert_allclose(sum_pool(x, PoolSpec(k, d, "sum")),
                                   pool_scalar(x, k, d, "sum"), rtol=0, atol=1e-13)


class TestCountMap:
    def test_five_by_five(self):
        m = count_map(5, 5, PoolSpec(3))[:, :, 0]
        assert m[2, 2] == 9 and m[0, 2] == 6 and m[2, 4] == 6 and m[0, 0] == 4
        assert np.all(m[1:-1, 1:-1] == 9)

    def test_single(self):
        assert count_map(1, 1, PoolSpec(3))[0, 0, 0] == 1

    def test_dilated_centre(self):
        # taps {1, 4, 7} on both axes
        assert count_map(9, 9, PoolSpec(3, 3))[4, 4, 0] == 9

    @pytest.mark.parametrize("k, d", [(3, 1), (5, 2), (9, 1), (3, 4)])
    def test_matches_enumeration(self, k, d):
        ones = np.ones((7, 10, 1))
        np.testing.assert_array_equal(count_map(7, 10, PoolSpec(k, d)),
                                      pool_scalar(ones, k, d, "sum"))


class TestAvgPool:
    def test_constant_preserved(self):
        out = avg_pool(np.full((6, 5, 1), 0.3), PoolSpec(5, 2))
        np.testing.assert_allclose(out, 0.3, rtol=0, atol=1e-15)

    def test_include_pad_corner(self):
        out = avg_pool(np.full((4, 4, 1), 0.9), PoolSpec(3, 1, "avg_include_pad"))
        assert out[0, 0, 0] == pytest.approx(4 * 0.9 / 9, abs=1e-15)

    @pytest.mark.parametrize("norm", ["avg_valid_count", "avg_include_pad"])
    def test_k1_identity(self, norm):
        x = rng_fill(2, 4, 3, 2)
        np.testing.assert_array_equal(avg_pool(x, PoolSpec(1, 3, norm)), x)

    def test_f32_result_dtype(self):
        x = rng_fill(2, 4, 3, 2, np.float32)
        assert avg_pool(x, PoolSpec(3)).dtype == np.float32

    def test_sum_norm_rejected(self):
        with pytest.raises(ValueError):
            avg_pool(np.zeros((2, 2, 1)), PoolSpec(3, 1, "sum"))

    @pytest.mark.parametrize("bad", [dict(kernel=2), dict(kernel=3, dilation=0),
                                     dict(kernel=3, norm="max")])
    def test_invalid_spec(self, bad):
        with pytest.raises(ValueError):
            PoolSpec(**bad)


class TestPyramid:
    def test_constant(self):
        x = np.full((10, 7, 2), -0.25)
        for pyr in (pyramid_naive(x, 3, 3), pyramid_cascaded(x, 3, 3)):
            for m in pyr.maps:
                np.testing.assert_allclose(m, -0.25, rtol=0, atol=1e-15)

    def test_delta_level2_centre(self):
        pyr = pyramid_naive(delta(27, 27, 13, 13), 3, 2)
        assert pyr.maps[1][13, 13, 0] == pytest.approx(1 / 81, rel=1e-15)
        assert pyr.kernel(2) == 9

    def test_naive_golden(self, data_dir):
        golden = fmap_read(data_dir / "pyramid_seed7_k3_L2.fmap")
        got = np.concatenate(pyramid_naive(rng_fill(7, 16, 16, 2), 3, 2).maps, axis=2)
        np.testing.assert_allclose(got, golden, rtol=0, atol=1e-12)

    def test_cascaded_golden(self, data_dir):
        golden = fmap_read(data_dir / "pyramid_seed7_k3_L2.fmap")
        got = np.concatenate(pyramid_cascaded(rng_fill(7, 16, 16, 2), 3, 2).maps, axis=2)
        np.testing.assert_allclose(got, golden, rtol=0, atol=1e-9)

    def test_cascaded_interior_matches_naive(self):
        x = rng_fill(9, 30, 30, 2)
        a = pyramid_naive(x, 3, 2).maps[1]
        b = pyramid_cascaded(x, 3, 2).maps[1]
        np.testing.assert_allclose(b[4:-4, 4:-4], a[4:-4, 4:-4], rtol=0, atol=1e-14)

    def test_single_pixel(self):
        x = np.full((1, 1, 1), 0.7)
        for m in pyramid_cascaded(x, 3, 3).maps:
            assert m[0, 0, 0] == pytest.approx(0.7, abs=1e-15)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            pyramid_naive(np.zeros((2, 2, 1)), 4, 2)
        with pytest.raises(ValueError):
            pyramid_cascaded(np.zeros((2, 2, 1)), 3, 0)
        with pytest.raises(OverflowError):
            pyramid_cascaded(np.zeros((2, 2, 1)), 3, 40)

    def test_f32_levels_keep_dtype(self):
        pyr = pyramid_cascaded(rng_fill(1, 5, 5, 1, np.float32), 3, 2)
        assert all(m.dtype == np.float32 for m in pyr.maps)


@pytest.mark.parametrize("impl", ["naive", "cascaded"])
@pytest.mark.parametrize("k, levels", [(3, 1), (3, 3), (5, 2)])
def test_counters_match_cost_model(impl, k, levels):
    h, w, c = 11, 6, 3
    counter = OpCounter()
    fn = pyramid_naive if impl == "naive" else pyramid_cascaded
    fn(rng_fill(1, h, w, c), k, levels, counter)
    cost = pyramid_cost(k, levels, h, w, c, impl)
    assert (counter.adds, counter.count_adds, counter.divides) == \
        (cost.pool_adds, cost.count_adds, cost.divides)


def test_global_avg_pool():
    np.testing.assert_array_equal(global_avg_pool(np.full((3, 2, 2), 0.5)), [0.5, 0.5])
    np.testing.assert_array_equal(global_avg_pool(np.array([0.0, 1.0]).reshape(2, 1, 1)), [0.5])


def test_global_avg_pool_golden(data_dir):
    golden = fmap_read(data_dir / "gap_seed3.fmap").ravel()
    np.testing.assert_allclose(global_avg_pool(rng_fill(3, 8, 8, 4)), golden, rtol=0, atol=1e-15)


# ---------------------------------------------------------------- properties

shapes = st.tuples(st.integers(1, 24), st.integers(1, 24), st.integers(1, 3))


@settings(max_examples=60, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2**32), k=st.sampled_from([3, 5]),
       levels=st.integers(1, 3))
def test_cascade_equals_naive(shape, seed, k, levels):
    if k**levels > 125:
        levels = 2
    x = rng_fill(seed, *shape)
    for a, b in zip(pyramid_naive(x, k, levels).maps, pyramid_cascaded(x, k, levels).maps):
        np.testing.assert_allclose(b, a, rtol=0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(shape=shapes, k=st.sampled_from([1, 3, 5, 9]), d=st.integers(1, 9),
       v=st.floats(-10, 10, allow_nan=False))
def test_conservation(shape, k, d, v):
    out = avg_pool(np.full(shape, v), PoolSpec(k, d))
    np.testing.assert_allclose(out, v, rtol=0, atol=1e-12 * max(1.0, abs(v)))


@settings(max_examples=60, deadline=None)
@given(h=st.integers(1, 16), w=st.integers(1, 16), data=st.data(),
       k=st.sampled_from([1, 3, 5]), d=st.integers(1, 4))
def test_impulse_mass(h, w, data, k, d):
    i = data.draw(st.integers(0, h - 1))
    j = data.draw(st.integers(0, w - 1))
    spec = PoolSpec(k, d, "sum")
    assert sum_pool(delta(h, w, i, j), spec).sum() == count_map(h, w, spec)[i, j, 0]


@settings(max_examples=40, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2**32))
def test_monotone_smoothing(shape, seed):
    x = np.abs(rng_fill(seed, *shape))
    top = x.max()
    for m in pyramid_cascaded(x, 3, 3).maps + pyramid_naive(x, 3, 2).maps:
        assert m.min() >= 0
        assert m.max() <= top * (1 + 1e-12)
