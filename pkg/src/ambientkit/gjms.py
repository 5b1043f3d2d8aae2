"""Weighted GJMS operators: drift-Laplacian powers with a scalar correction.

Two routes compute the same operator.  The jet route applies the composition
(drift Laplacian minus a quarter of the weighted scalar curvature) to a jet on
any scenario, so it works pointwise on curved metrics and in rational mode.
The spectral route specializes to a flat periodic box carrying only a density,
where every derivative is exact on band-limited data via the FFT; it scales to
the grids the self-adjointness suite wants.
"""

import math
from fractions import Fraction

import numpy as np

from .geometry import laplacian, measure_density, weighted_invariants, weighted_laplacian
from .jets import DomainError, jet_add, jet_mul, jet_scale
from .quadrature import integrate


def _require_unweighted_scale(mm):
    if mm.lam != 0:
        raise DomainError("the operator family is defined only for lambda = 0")


def _as_jet(mm, f):
    if isinstance(f, str):
        from .fields import field_to_jet, parse_field

        return field_to_jet(parse_field(f), mm.chart.coords, mm.base, mm.spec)
    return f


def gjms_apply(mm, k, f, unweighted=False):
    """Apply the order-2k operator to a jet (or expression string).

    unweighted=True applies the plain Laplacian power instead; that variant is
    the negative control for the self-adjointness suite, not an operator of
    the family.
    """
    _require_unweighted_scale(mm)
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = _as_jet(mm, f)
    if unweighted:
        for _ in range(k):
            out = laplacian(mm, out)
        return out
    w = weighted_invariants(mm)
    quarter = jet_scale(w.r_phi, Fraction(-1, 4))
    for _ in range(k):
        out = jet_add(weighted_laplacian(mm, out), jet_mul(quarter, out))
    return out


def gjms_selfadjoint_residual(mm, k, grid, f, h, unweighted=False):
    """|<L f, h> - <f, L h>| in the weighted inner product over the grid.

    mm must be a float build batched on the grid's nodes.  Returns the
    absolute residual together with the weighted norms of f and h, so callers
    can form the relative figure the acceptance gate uses.
    """
    if mm.spec.batch != grid.count:
        raise ValueError("metric batch %d does not match grid size %d" % (mm.spec.batch, grid.count))
    fj = _as_jet(mm, f)
    hj = _as_jet(mm, h)
    Lf = np.asarray(gjms_apply(mm, k, fj, unweighted=unweighted).value(0), dtype=float)
    Lh = np.asarray(gjms_apply(mm, k, hj, unweighted=unweighted).value(0), dtype=float)
    fv = np.asarray(fj.value(0), dtype=float)
    hv = np.asarray(hj.value(0), dtype=float)
    wgt = measure_density(mm)
    lhs = integrate(grid, Lf * hv * wgt)
    rhs = integrate(grid, fv * Lh * wgt)
    fn = math.sqrt(max(integrate(grid, fv * fv * wgt), 0.0))
    hn = math.sqrt(max(integrate(grid, hv * hv * wgt), 0.0))
    return abs(lhs - rhs), fn, hn


# -- spectral route on a flat periodic box ----------------------------------


def box_axes(shape):
    """Coordinate arrays of the [0, 2pi)^d grid, meshgrid order."""
    axes = [np.arange(n) * (2 * np.pi / n) for n in shape]
    return np.meshgrid(*axes, indexing="ij")


def _wavenumbers(shape):
    return [np.fft.fftfreq(n, d=1.0 / n) for n in shape]


def _partials_fft(F):
    shape = F.shape
    ks = _wavenumbers(shape)
    Fh = np.fft.fftn(F)
    outs = []
    for axis, kv in enumerate(ks):
        reshape = [1] * len(shape)
        reshape[axis] = shape[axis]
        outs.append(np.real(np.fft.ifftn(Fh * (1j * kv.reshape(reshape)))))
    return outs


def _laplace_fft(F):
    shape = F.shape
    ks = _wavenumbers(shape)
    k2 = np.zeros(shape)
    for axis, kv in enumerate(ks):
        reshape = [1] * len(shape)
        reshape[axis] = shape[axis]
        k2 = k2 + (kv.reshape(reshape)) ** 2
    return np.real(np.fft.ifftn(np.fft.fftn(F) * (-k2)))


def spectral_gjms_apply(phi, k, F, unweighted=False):
    """The order-2k operator on grid values over a flat periodic box.

    phi and F are real arrays on the uniform [0, 2pi)^d grid.  Derivatives are
    spectral, so the result is exact for band-limited inputs that stay clear
    of the Nyquist shell through all k applications.
    """
    phi = np.asarray(phi, dtype=float)
    F = np.asarray(F, dtype=float)
    if unweighted:
        for _ in range(k):
            F = _laplace_fft(F)
        return F
    dphi = _partials_fft(phi)
    # flat box: the weighted scalar invariant collapses to 2*lap(phi) - |grad phi|^2
    r_phi = 2.0 * _laplace_fft(phi) - sum(d * d for d in dphi)
    for _ in range(k):
        dF = _partials_fft(F)
        drift = sum(dp * df for dp, df in zip(dphi, dF))
        F = _laplace_fft(F) - drift - 0.25 * r_phi * F
    return F


def spectral_selfadjoint_residual(phi, k, F, H, unweighted=False):
    """Residual and weighted norms on the flat box, trapezoid quadrature.

    The uniform-weight sum against e^{-phi} is the exact weighted pairing for
    trigonometric data; the cell volume cancels in the relative figure but is
    kept so the absolute numbers mean what they say.
    """
    phi = np.asarray(phi, dtype=float)
    cell = (2 * np.pi) ** phi.ndim / phi.size
    wgt = np.exp(-phi) * cell
    LF = spectral_gjms_apply(phi, k, F, unweighted=unweighted)
    LH = spectral_gjms_apply(phi, k, H, unweighted=unweighted)
    lhs = float(np.sum(LF * H * wgt))
    rhs = float(np.sum(F * LH * wgt))
    fn = math.sqrt(max(float(np.sum(F * F * wgt)), 0.0))
    hn = math.sqrt(max(float(np.sum(H * H * wgt)), 0.0))
    return abs(lhs - rhs), fn, hn


def random_trig_field(shape, rng, n_terms=4, max_freq=2):
    """A small random trigonometric polynomial on the box grid."""
    X = box_axes(shape)
    out = np.zeros(shape)
    d = len(shape)
    for _ in range(n_terms):
        freqs = rng.integers(-max_freq, max_freq + 1, size=d)
        if not np.any(freqs):
            freqs[rng.integers(0, d)] = 1
        amp = rng.uniform(-1.0, 1.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        arg = sum(f * x for f, x in zip(freqs, X))
        out = out + amp * np.cos(arg + phase)
    return out


def leading_symbol_ratio(phi, k, axis, freq):
    """Sup-norm ratio of (L_2k - drift-Laplacian^k) against the pure power.

    Applied to a single high-frequency mode along one axis; the ratio decays
    like freq^-2 when the correction terms sit two orders below the leading
    symbol.
    """
    shape = phi.shape
    X = box_axes(shape)
    F = np.sin(freq * X[axis])
    full = spectral_gjms_apply(phi, k, F)
    power = F
    dphi = _partials_fft(np.asarray(phi, dtype=float))
    for _ in range(k):
        dF = _partials_fft(power)
        power = _laplace_fft(power) - sum(dp * df for dp, df in zip(dphi, dF))
    denom = float(np.max(np.abs(power)))
    if denom == 0:
        raise ValueError("degenerate test mode")
    return float(np.max(np.abs(full - power))) / denom
