"""Grid construction and integration rules per chart kind."""

import math

import numpy as np
import pytest

from ambientkit.geometry import Chart
from ambientkit.quadrature import (
    build_grid,
    default_sizes,
    integrate,
    parse_sizes,
)
from ambientkit.scenarios import make


def test_parse_sizes():
    assert parse_sizes("8x8x12", 3) == (8, 8, 12)
    assert parse_sizes("12", 3) == (12, 12, 12)
    with pytest.raises(ValueError):
        parse_sizes("8x8", 3)
    with pytest.raises(ValueError):
        parse_sizes("8xbig", 2)


def test_default_sizes_per_kind():
    assert default_sizes(make("perturbed-torus").chart) == (16, 16, 16)
    assert default_sizes(make("gaussian-soliton").chart) == (24, 24, 24)
    assert default_sizes(make("einstein-sphere", n=3).chart) == (12, 16, 16)
    assert default_sizes(make("einstein-sphere", n=3).chart, per_axis=6) == (6, 6, 6)


def test_torus_trapezoid_is_exact_on_band_limited_data():
    grid = build_grid(Chart(("x1", "x2", "x3"), "torus"), (8, 8, 8))
    x1 = grid.base[0]
    vals = np.sin(x1) ** 2
    assert integrate(grid, vals) == pytest.approx(4 * math.pi**3, rel=1e-13)


def test_sphere_block_rule_integrates_polynomials():
    chart = make("einstein-sphere", n=2).chart  # coords z1, t1
    grid = build_grid(chart, (6, 8))
    z = grid.base[0]
    # int_{-1}^{1} z^2 dz * int_0^{2pi} dt
    assert integrate(grid, z**2) == pytest.approx((2.0 / 3.0) * 2 * math.pi, rel=1e-13)


def test_gaussian_rule_covers_the_decaying_weight():
    sc = make("gaussian-soliton")  # lambda = 1/2
    grid = build_grid(sc.chart, (24, 24, 24), lam=sc.lam)
    r2 = sum(np.asarray(b) ** 2 for b in grid.base)
    got = integrate(grid, np.exp(-r2 / 4.0))
    assert got == pytest.approx((2 * math.sqrt(math.pi)) ** 3, rel=1e-9)


def test_gaussian_rule_requires_positive_lambda():
    sc = make("gaussian-soliton")
    with pytest.raises(ValueError, match="lambda"):
        build_grid(sc.chart, (8, 8, 8))


def test_integrate_checks_value_count():
    grid = build_grid(Chart(("x1",), "torus"), (8,))
    with pytest.raises(ValueError, match="8-point"):
        integrate(grid, np.ones(7))


def test_grid_shapes_are_flat_and_matched():
    grid = build_grid(Chart(("x1", "x2"), "torus"), (4, 6))
    assert grid.count == 24
    assert all(np.asarray(b).shape == (24,) for b in grid.base)
    assert grid.weights.shape == (24,)
