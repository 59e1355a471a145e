import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebt_radial.measures import (
    DiscreteMeasure,
    DivisionAtZeroError,
    WeightSpec,
    add,
    dirac,
    exp_weight,
    moment,
    poly_weight,
    read_csv,
    restrict,
    truncated_weight,
    weight_divide,
    write_csv,
)


def test_dirac_constructor():
    assert dirac(1.0, 2.0).as_dict() == {1.0: 2.0}
    mu = dirac(0.5, 0.0)
    assert mu.as_dict() == {0.5: 0.0}
    assert mu.total_mass() == 0.0


def test_coincident_points_merge():
    assert add(dirac(1, 1), dirac(1, 1)).as_dict() == {1.0: 2.0}
    mu = DiscreteMeasure([3.0, 1.0, 3.0], [1.0, 2.0, 4.0])
    assert mu.as_dict() == {1.0: 2.0, 3.0: 5.0}


@pytest.mark.parametrize("x, m", [(-1.0, 1.0), (math.inf, 1.0), (1.0, math.nan)])
def test_dirac_rejects(x, m):
    with pytest.raises(ValueError):
        dirac(x, m)


def test_constructor_rejects_bad_input():
    with pytest.raises(ValueError):
        DiscreteMeasure([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        DiscreteMeasure([-0.5], [1.0])


def test_zero_mass_points_kept():
    mu = DiscreteMeasure([1.0, 2.0], [0.0, 1.0])
    assert len(mu) == 2
    assert len(mu.prune()) == 1


def test_weight_divide_examples():
    assert weight_divide(DiscreteMeasure([2.0], [4.0]), WeightSpec(1.0)).as_dict() == {2.0: 2.0}
    mu = DiscreteMeasure([0.3, 1.7], [1.5, -2.0])
    assert weight_divide(mu, WeightSpec(0.0)) == mu
    assert weight_divide(DiscreteMeasure([0.25], [1.0]), WeightSpec(0.5)).as_dict() == {0.25: 2.0}


def test_weight_divide_at_zero():
    with pytest.raises(DivisionAtZeroError):
        weight_divide(DiscreteMeasure([0.0, 1.0], [1.0, 1.0]), WeightSpec(1.0))
    out = weight_divide(DiscreteMeasure([0.0, 1.0], [0.0, 1.0]), WeightSpec(1.0))
    assert out.as_dict() == {0.0: 0.0, 1.0: 1.0}


def test_weight_spec_exponents():
    for e in (0, 0.5, 1, 2):
        WeightSpec(e)
    with pytest.raises(ValueError):
        WeightSpec(3.0)


def test_weight_divide_composes():
    mu = DiscreteMeasure([0.3, 1.1, 4.0], [1.0, 2.0, 3.0])
    twice = weight_divide(weight_divide(mu, 1.0), 1.0)
    once = weight_divide(mu, 2.0)
    np.testing.assert_allclose(twice.masses, once.masses, rtol=1e-14)
    half = weight_divide(weight_divide(mu, 0.5), 0.5)
    np.testing.assert_allclose(half.masses, weight_divide(mu, 1.0).masses, rtol=1e-14)


def test_restrict_examples():
    mu = DiscreteMeasure([1.0, 3.0], [1.0, 1.0])
    assert restrict(mu, 0, 2).as_dict() == {1.0: 1.0}
    assert restrict(mu, 0, math.inf) == mu
    assert restrict(mu, 3, 3).as_dict() == {3.0: 1.0}
    with pytest.raises(ValueError):
        restrict(mu, 2, 1)


def test_moment_examples():
    assert moment(DiscreteMeasure([1.0], [2.0]), exp_weight()) == pytest.approx(5.43656365691809047, rel=1e-15)
    assert moment(DiscreteMeasure([2.0], [4.0]), poly_weight(0)) == 2.0
    assert moment(DiscreteMeasure(), exp_weight()) == 0.0


def test_moment_truncated_and_errors():
    mu = DiscreteMeasure([1.0, 3.0], [1.0, 1.0])
    w = truncated_weight(poly_weight(2), 2.0)
    # (1+r)^2 frozen at r = 2 beyond the cutoff, divided by r
    assert moment(mu, w) == pytest.approx((1 + 1.0) ** 2 / 1.0 + (1 + 2.0) ** 2 / 3.0)
    with pytest.raises(DivisionAtZeroError):
        moment(DiscreteMeasure([0.0], [1.0]), exp_weight())
    with pytest.raises(OverflowError):
        moment(DiscreteMeasure([1000.0], [1.0]), exp_weight())


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    mu = DiscreteMeasure(np.sort(rng.uniform(0, 2, 50)), rng.normal(size=50) / 3)
    p = tmp_path / "mu.csv"
    write_csv(mu, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "index,x,mass"
    assert read_csv(p) == mu


points = st.lists(st.floats(0, 100, allow_nan=False), min_size=0, max_size=12)


@settings(max_examples=200, deadline=None)
@given(points, st.floats(0, 50), st.floats(0, 50))
def test_restrict_idempotent_and_mass_additive(xs, a, b):
    a, b = min(a, b), max(a, b)
    mu = DiscreteMeasure(xs, np.ones(len(xs)))
    once = restrict(mu, a, b)
    assert restrict(once, a, b) == once
    assert restrict(mu, 0, math.inf).total_mass() == mu.total_mass()
    nu = DiscreteMeasure(xs[::-1], np.arange(len(xs), dtype=float))
    assert (mu + nu).total_mass() == pytest.approx(mu.total_mass() + nu.total_mass(), abs=1e-9)
