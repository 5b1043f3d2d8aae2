"""Tensor-product quadrature grids matched to the builtin chart families.

The rule for each axis is chosen by coordinate name prefix, so product charts
mix rules freely:

  z*     Gauss-Legendre on (-1, 1)          (sphere polar height)
  m*     Gauss-Legendre scaled to (0, 1)    (Hopf cell parameter)
  s*, t* trapezoid on [0, 2*pi)             (angles; exact for low trig modes)
  x*     torus: trapezoid on [0, 2*pi)
         gaussian: midpoint on [-L, L] with L = 8 / sqrt(lambda)

Interior node placement keeps evaluation away from coordinate degeneracies at
z = +-1 and m = 0, 1.  Integration against the weighted measure happens by
evaluating e^{-phi} sqrt(det g) at the nodes (the caller supplies it via jets);
the grid itself only carries the coordinate box measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

_MAX_POINTS = 2_000_000


@dataclass(frozen=True)
class QuadratureGrid:
    base: tuple
    weights: np.ndarray
    sizes: tuple

    @property
    def count(self):
        return int(self.weights.size)


def parse_sizes(text, dim):
    """Parse "12" (replicated) or "8x8x12" (one entry per axis)."""
    parts = text.lower().split("x")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise ValueError("grid %r is not an integer or NxN... list" % text)
    if any(v <= 0 for v in vals):
        raise ValueError("grid sizes must be positive, got %r" % text)
    if len(vals) == 1:
        return (vals[0],) * dim
    if len(vals) != dim:
        raise ValueError("grid %r has %d entries for a %d-axis chart" % (text, len(vals), dim))
    return tuple(vals)


def _axis_rule(name, kind, size, lam):
    c = name[0]
    if c == "z":
        x, w = np.polynomial.legendre.leggauss(size)
        return x, w
    if c == "m":
        x, w = np.polynomial.legendre.leggauss(size)
        return (x + 1.0) / 2.0, w / 2.0
    if c in ("s", "t"):
        h = 2.0 * math.pi / size
        return np.arange(size) * h, np.full(size, h)
    if c == "x":
        if kind == "gaussian":
            if lam is None:
                raise ValueError("gaussian chart quadrature needs lambda")
            lam = float(lam)
            if lam <= 0:
                raise ValueError("gaussian chart quadrature needs lambda > 0")
            L = 8.0 / math.sqrt(lam)
            h = 2.0 * L / size
            return -L + (np.arange(size) + 0.5) * h, np.full(size, h)
        h = 2.0 * math.pi / size
        return np.arange(size) * h, np.full(size, h)
    raise ValueError("no quadrature rule for coordinate %r" % name)


def build_grid(chart, sizes, lam=None):
    dim = len(chart.coords)
    if isinstance(sizes, str):
        sizes = parse_sizes(sizes, dim)
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != dim:
        raise ValueError("need %d axis sizes, got %d" % (dim, len(sizes)))
    total = 1
    for s in sizes:
        total *= s
    if total > _MAX_POINTS:
        raise ValueError("grid of %d points exceeds the %d-point cap" % (total, _MAX_POINTS))
    axes = []
    wts = []
    for name, size in zip(chart.coords, sizes):
        x, w = _axis_rule(name, chart.kind, size, lam)
        axes.append(x)
        wts.append(w)
    mesh = np.meshgrid(*axes, indexing="ij")
    base = tuple(m.reshape(-1) for m in mesh)
    wmesh = np.meshgrid(*wts, indexing="ij")
    weights = np.ones(total)
    for w in wmesh:
        weights = weights * w.reshape(-1)
    return QuadratureGrid(base=base, weights=weights, sizes=sizes)


def integrate(grid, values):
    """Compensated weighted sum of pointwise values over the grid."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size != grid.count:
        raise ValueError("got %d values for a %d-point grid" % (v.size, grid.count))
    return math.fsum((grid.weights * v).tolist())


def default_sizes(chart, per_axis=None):
    """A sensible per-chart default: enough for the builtin scenario spectra."""
    out = []
    for name in chart.coords:
        c = name[0]
        if per_axis is not None:
            out.append(per_axis)
        elif c in ("z", "m"):
            out.append(12)
        elif c == "x" and chart.kind == "gaussian":
            out.append(24)
        else:
            out.append(16)
    return tuple(out)


def grid_measure_values(mm):
    """e^{-phi} sqrt(det g) at the grid nodes, from a batched MetricMeasure."""
    from .geometry import measure_density

    return measure_density(mm)
