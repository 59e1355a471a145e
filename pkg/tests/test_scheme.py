import math
import warnings

import numpy as np
import pytest

from ebt_radial.harness import reference_config
from ebt_radial.scheme import (
    SchemeConfig,
    SchemeState,
    StabilityError,
    UndefinedRatioError,
    build_band,
    capacity,
    euler_step,
    growth_bound,
    growth_diagnostic,
    init_masses,
    initial_total_mass,
    make_grid,
    rhs,
    run,
    tail_mass,
)


def small(dimension=3, **kw):
    base = dict(dimension=dimension, sigma=0.04, alpha=0.5, r0=2.0, t_end=1.0)
    base.update(kw)
    return SchemeConfig.coupled(kw.pop("dt", 0.01), **base)


def test_grid_has_no_origin():
    g = make_grid(small())
    assert g[0] == pytest.approx(0.01) and g[-1] == pytest.approx(2.0) and g.size == 200


def test_initial_total_mass_closed_form():
    cfg = SchemeConfig.coupled(1e-3, sigma=0.04, alpha=0.5)
    assert init_masses(cfg).masses.sum() == pytest.approx(1.678005008694363, rel=1e-12)
    assert initial_total_mass(cfg) == pytest.approx(1.678005008694363, rel=1e-14)
    cfg2 = SchemeConfig.coupled(1e-3, dimension=2, sigma=0.04)
    assert init_masses(cfg2).masses.sum() == pytest.approx(1.6992455784246713, rel=1e-12)


def test_initial_masses_vanish_past_support():
    cfg = small()
    st = init_masses(cfg)
    assert np.all(st.masses[st.grid - cfg.h >= cfg.init_sigma_i] == 0.0)
    assert np.all(st.masses >= 0)


def test_indicator_limit():
    cfg = SchemeConfig.coupled(0.01, init_q=1e6)
    st = init_masses(cfg)
    a, b = st.grid[:-1] - cfg.h, st.grid[:-1]
    inside = b < 0.78
    want = 4 * math.pi * (b**3 - a**3) / 3
    np.testing.assert_allclose(st.masses[:-1][inside], want[inside], rtol=1e-6)


def test_point_rule_close_to_cells():
    a = init_masses(SchemeConfig.coupled(1e-3, init_rule="point")).masses.sum()
    b = init_masses(SchemeConfig.coupled(1e-3)).masses.sum()
    assert a == pytest.approx(b, rel=1e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(dimension=4)
    with pytest.raises(ValueError):
        SchemeConfig(sigma=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(r0=0.5)
    with pytest.raises(ValueError):
        SchemeConfig.coupled(0.003)
    with pytest.raises(ValueError):
        SchemeConfig(init_rule="midpoint")
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        SchemeConfig(r0=0.9, init_sigma_i=0.5, n=90, dt=0.01)
    assert any("r0 < 1" in str(x.message) for x in w)


@pytest.mark.parametrize("dim", [2, 3])
def test_fixed_point_and_zero(dim):
    cfg = small(dim)
    g = make_grid(cfg)
    band = build_band(cfg, g)
    fixed = SchemeState(g, capacity(g, cfg))
    assert np.all(rhs(fixed, band, cfg) == 0.0)
    after = euler_step(fixed, band, cfg)
    np.testing.assert_array_equal(after.masses, fixed.masses)
    assert after.time == pytest.approx(cfg.dt)
    zero = SchemeState(g, np.zeros(g.size))
    assert np.all(rhs(zero, band, cfg) == 0.0)
    np.testing.assert_array_equal(euler_step(zero, band, cfg).masses, 0.0)
    assert growth_diagnostic(fixed, band, cfg) == 0.0
    with pytest.raises(UndefinedRatioError):
        growth_diagnostic(zero, band, cfg)


def test_single_node_example():
    with pytest.warns(UserWarning, match="r0 < 1"):
        cfg = SchemeConfig(dimension=3, sigma=0.04, alpha=1.0, r0=0.02, n=1, dt=1e-3,
                           init_sigma_i=0.01, t_end=0.0)
    g = make_grid(cfg)
    band = build_band(cfg, g)
    st = SchemeState(g, np.array([5e-5]))
    assert rhs(st, band, cfg)[0] == pytest.approx(9.424515053209258e-06, rel=1e-12)
    assert euler_step(st, band, cfg).masses[0] == pytest.approx(5.000942451505321e-05, rel=1e-14)


def test_stability_error():
    cfg = small(alpha=1e4)
    with pytest.raises(StabilityError):
        run(cfg)
    g = make_grid(cfg)
    with pytest.raises(StabilityError):
        euler_step(init_masses(cfg), build_band(cfg, g), cfg)


def test_run_step_counts_and_snapshots():
    cfg = small(t_end=0.0)
    res = run(cfg)
    np.testing.assert_array_equal(res.final.masses, init_masses(cfg).masses)
    one = SchemeConfig.coupled(0.01, sigma=0.04, alpha=0.5, t_end=0.01)
    a = run(one).final
    b = euler_step(init_masses(one), build_band(one), one)
    np.testing.assert_array_equal(a.masses, b.masses)
    res = run(small(), snapshot_times=[0.0, 0.5, 0.504])
    assert [s.step for s in res.snapshots] == [0, 50]
    with pytest.raises(ValueError):
        run(SchemeConfig.coupled(0.01, t_end=0.015))


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("n", [37, 200, 512])
def test_band_equals_dense(dim, n):
    cfg = SchemeConfig.coupled(2.0 / n, dimension=dim, sigma=0.04 if n > 100 else 0.3, alpha=0.5)
    st = init_masses(cfg)
    band = build_band(cfg, st.grid)
    D = band.dense()
    rng = np.random.default_rng(n)
    m = st.masses + rng.uniform(0, 1e-3, n)
    # dense row sums in ascending column order, restricted to the band
    want = np.zeros(n)
    for i in range(n):
        for j in band.row_range(i):
            want[i] += D[i, j] * m[j]
    np.testing.assert_array_equal(band.matvec(m), want)
    np.testing.assert_allclose(band.matvec(m), D @ m, rtol=1e-13, atol=0)
    out_band = np.where(np.abs(np.subtract.outer(st.grid, st.grid)) > cfg.sigma * (1 + 1e-12), D, 0)
    assert np.all(out_band == 0.0)


def test_matrix_free_matches_band():
    cfg = SchemeConfig.coupled(0.005, sigma=0.04, alpha=0.5)
    st = init_masses(cfg)
    full = build_band(cfg, st.grid)
    free = build_band(SchemeConfig.coupled(0.005, sigma=0.04, alpha=0.5, memory_budget_bytes=1), st.grid)
    assert free.matrix_free and not full.matrix_free
    np.testing.assert_array_equal(full.matvec(st.masses), free.matvec(st.masses))


def test_growth_bound_at_start():
    cfg = reference_config(3, 1e-3)
    st = init_masses(cfg)
    band = build_band(cfg, st.grid)
    ratio = growth_diagnostic(st, band, cfg)
    assert 0 < ratio <= growth_bound(cfg)
    # same bound on the prefactor-free kernel: 8 pi sigma^2 (2 sigma + 1) alpha
    pref = band.kernel.prefactor / cfg.alpha
    assert ratio / pref <= 0.021714688421612651


def test_tail_mass():
    cfg = small()
    st = run(cfg).final
    assert tail_mass(st, cfg.r0) == 0.0
    assert tail_mass(st, 0.0) == pytest.approx(st.masses.sum())


def test_run_nonnegative_and_bounded():
    cfg = reference_config(3, 0.01)
    st0 = init_masses(cfg)
    res = run(cfg)
    cap = capacity(st0.grid, cfg)
    assert res.diagnostics.min_mass >= 0
    assert np.all(res.final.masses <= np.maximum(st0.masses, cap) * (1 + 1e-12))
    assert res.diagnostics.max_growth_ratio <= growth_bound(cfg)
