import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beameq.errors import ZeroMass
from beameq.fields import PlanarField
from beameq.pipeline import random_bumps, rearrangement_suite
from beameq.rearrangement import (asymmetry_floor, asymmetry_index, centroid,
                                  decreasing_rearrangement, level_measure, level_perimeter,
                                  level_summary, ring_area)


def pinch(n=129, radius=4.0, center=(0.0, 0.0), half_width=None):
    return PlanarField.disk(radius, n, lambda x, y: 1.0 / math.pi / (
        1.0 + (x - center[0]) ** 2 + (y - center[1]) ** 2) ** 2, half_width=half_width)


fields = st.integers(0, 2 ** 32 - 1).map(
    lambda seed: random_bumps(np.random.default_rng(seed), n=33, bumps=3))


@settings(max_examples=25, deadline=None)
@given(fields)
def test_mass_idempotence_and_sorted_values(field):
    star = decreasing_rearrangement(field)
    vals = field.values[field.mask]
    assert abs(star.values[star.mask].sum() - vals.sum()) <= 1e-12 * np.abs(vals).sum()
    assert np.array_equal(np.sort(star.values[star.mask]), np.sort(vals))
    assert np.array_equal(decreasing_rearrangement(star).values, star.values)


@settings(max_examples=25, deadline=None)
@given(fields, st.floats(0.01, 0.99))
def test_equimeasurable_within_one_ring(field, q):
    star = decreasing_rearrangement(field)
    vals = field.values[field.mask]
    xi = float(np.quantile(vals, q))
    a0, a1 = level_measure(field, xi), level_measure(star, xi)
    assert abs(a0 - a1) <= ring_area(field, math.sqrt(max(a0, a1) / math.pi))


@settings(max_examples=25, deadline=None)
@given(fields, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_level_measure_non_increasing(field, a, b):
    vals = field.values[field.mask]
    lo, hi = np.quantile(vals, sorted((a, b)))
    assert level_measure(field, hi) <= level_measure(field, lo)


def test_star_is_radially_non_increasing():
    field = random_bumps(np.random.default_rng(3))
    star = decreasing_rearrangement(field)
    # cells ordered by (distance, row, column) carry non-increasing values
    iy, ix = np.nonzero(star.mask)
    xx, yy = star.coords
    d2 = xx[iy, ix] ** 2 + yy[iy, ix] ** 2
    v = star.values[iy, ix][np.lexsort((ix, iy, d2))]
    assert np.all(np.diff(v) <= 0)


def test_disk_indicator_measure():
    f = PlanarField.disk(2.0, 129, lambda x, y: (x * x + y * y <= 1.0).astype(float))
    assert abs(level_measure(f, 0.5) - math.pi) <= ring_area(f, 1.0)
    assert level_summary(f, 0.5).radius == pytest.approx(1.0, abs=f.h)


def test_constant_field_measure():
    f = PlanarField.disk(1.0, 33, lambda x, y: np.full_like(x, 2.0))
    assert level_measure(f, 2.5) == 0.0
    assert level_measure(f, 1.5) == pytest.approx(f.area())


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_pinch_level_sets_are_disks(r):
    f = pinch()
    xi = 1.0 / math.pi / (1.0 + r * r) ** 2
    assert abs(level_measure(f, xi) - math.pi * r * r) <= ring_area(f, r)


def test_radial_field_is_fixed_point():
    f = pinch()
    star = decreasing_rearrangement(f)
    assert np.allclose(star.values, f.values, rtol=1e-14, atol=0)


def test_indicator_becomes_centered_disk():
    f = PlanarField.square(2.0, 65, lambda x, y: ((np.abs(x - 0.8) < 0.5)
                                                  & (np.abs(y + 0.3) < 0.3)).astype(float))
    star = decreasing_rearrangement(f)
    ones = star.values == 1.0
    assert ones.sum() == (f.values == 1.0).sum()
    d = star.radii()
    assert d[ones].max() <= d[~ones].min() + 1e-12


def test_rearrangement_about_other_center():
    f = pinch()
    star = decreasing_rearrangement(f, center=(1.0, 0.0))
    assert centroid(star)[0] == pytest.approx(1.0, abs=2 * f.h)


def test_asymmetry_of_pinch_below_floor():
    f = pinch()
    assert asymmetry_index(f) < asymmetry_floor(f)


def test_asymmetry_translation_invariant():
    base = pinch(n=161, radius=np.inf, half_width=8.0)
    moved = pinch(n=161, radius=np.inf, half_width=8.0, center=(0.7, -0.4))
    floor = asymmetry_floor(base)
    assert abs(asymmetry_index(moved) - asymmetry_index(base)) < floor


def test_two_bumps_are_asymmetric():
    f = PlanarField.square(4.0, 129, lambda x, y: np.exp(-((x - 2) ** 2 + y ** 2) / 0.3)
                           + np.exp(-((x + 2) ** 2 + y ** 2) / 0.3))
    idx = asymmetry_index(f)
    assert 0.3 < idx <= 1.0
    assert idx > 4 * asymmetry_floor(f)


def test_asymmetry_errors():
    f = PlanarField.disk(1.0, 17)
    with pytest.raises(ZeroMass):
        asymmetry_index(f)
    with pytest.raises(ZeroMass):
        centroid(f)
    with pytest.raises(ValueError):
        asymmetry_index(f.with_values(f.values - 1.0))


def test_disk_perimeter():
    f = PlanarField.disk(2.0, 129, lambda x, y: 1.0 - (x * x + y * y) / 4.0)
    # level 0.75 is the circle of radius 1
    assert level_perimeter(f, 0.75) == pytest.approx(2 * math.pi, rel=1e-3)


def test_rearrangement_does_not_increase_perimeter():
    for seed in range(4):
        field = random_bumps(np.random.default_rng(seed))
        result, _ = rearrangement_suite(field)
        assert result["perimeter_excess_rings"] <= 1.0
        assert result["equimeasurability_rings"] <= 1.0
        assert result["mass_error"] <= 1e-12
        assert result["idempotent"]
