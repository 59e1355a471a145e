import math

import numpy as np
import pytest

from ebt_radial.kernels import RadialKernel, UnsupportedDimensionError, band_indices


def test_3d_examples():
    k = RadialKernel(3, 0.04, 1.0)
    assert k.L(1.0, 2.0) == 0.0
    assert k.L(0.5, 0.51) == pytest.approx(5.4855793804651425, rel=1e-13)


def test_2d_examples():
    assert RadialKernel(2, 0.5).L(0.1, 0.1) == pytest.approx(1.2732395447351627, rel=1e-14)
    assert RadialKernel(2, 0.04).L(0.04, 0.04) == pytest.approx(66.31455962162306, rel=1e-13)


def test_alpha_scales():
    for dim in (2, 3):
        a, b = RadialKernel(dim, 0.3, 1.0), RadialKernel(dim, 0.3, 2.5)
        assert b.L(0.4, 0.5) == pytest.approx(2.5 * a.L(0.4, 0.5), rel=1e-15)


def test_l_tilde_examples():
    k = RadialKernel(3, 0.04)
    assert k.L_tilde(0.01, 0.01) == pytest.approx(4e-4, rel=1e-14)
    assert k.L_tilde(1.0, 2.0) == 0.0
    assert k.L_tilde(0.5, 0.51) == pytest.approx(0.0015, rel=1e-12)
    with pytest.raises(UnsupportedDimensionError):
        RadialKernel(2, 0.04).L_tilde(0.1, 0.1)


def test_l_relation():
    k = RadialKernel(3, 0.5, 1.7)
    rng = np.random.default_rng(0)
    R, r = rng.uniform(0.01, 3, 1000), rng.uniform(0.01, 3, 1000)
    want = 1.7 * 3 / (16 * math.pi * 0.5**3) * k.L_tilde(R, r) / (R * r)
    np.testing.assert_allclose(k.L(R, r), want, rtol=1e-14)


def test_domain_errors():
    for dim in (2, 3):
        with pytest.raises(ValueError):
            RadialKernel(dim, 0.04).L(0.0, 1.0)
    with pytest.raises(UnsupportedDimensionError):
        RadialKernel(4, 0.04)
    with pytest.raises(ValueError):
        RadialKernel(3, -1.0)
    with pytest.raises(ValueError):
        RadialKernel(3, 1.0, 0.0)


def test_2d_clamp_no_nan():
    k = RadialKernel(2, 0.1)
    # |R - r| = sigma up to rounding: argument of arcsin can exceed 1
    R = np.array([0.3, 0.7, 1e-8])
    r = R + 0.1
    v = k.L(R, r)
    assert np.all(np.isfinite(v)) and np.all(v >= 0)


def test_support_exact():
    rng = np.random.default_rng(3)
    for dim in (2, 3):
        k = RadialKernel(dim, 0.2)
        R, r = rng.uniform(0.01, 2, 20000), rng.uniform(0.01, 2, 20000)
        v = k.L(R, r)
        assert np.all(v[np.abs(R - r) > 0.2] == 0.0)
        np.testing.assert_array_equal(v, k.L(r, R))


def _enumerate(r, sigma, step, n):
    return [i for i in range(1, n + 1) if abs(i * step - r) <= sigma + 1e-12]


@pytest.mark.parametrize("r, lo, hi", [(1.0, 96, 104), (0.005, 1, 4)])
def test_band_examples(r, lo, hi):
    got = RadialKernel(3, 0.04).band_indices(r, 0.01, 200)
    assert (got.start, got.stop - 1) == (lo, hi)
    assert list(got) == _enumerate(r, 0.04, 0.01, 200)


def test_band_full_and_random():
    assert list(band_indices(0.5, 5.0, 0.01, 100)) == list(range(1, 101))
    rng = np.random.default_rng(5)
    for _ in range(500):
        sigma, step = rng.uniform(0.001, 0.3), rng.uniform(0.001, 0.05)
        n = int(rng.integers(1, 300))
        r = rng.uniform(0, n * step * 1.2)
        got = list(band_indices(r, sigma, step, n))
        want = _enumerate(r, sigma, step, n)
        # ties within rounding may differ by the endpoint; the kernel is 0 there
        assert set(want) <= set(got) and len(got) - len(want) <= 2
        assert len(got) <= 2 * sigma / step + 1 + 1e-9 or not got
