"""Renormalized volume coefficients of the expansion and their variations.

The density ratio
    V(u) = e^{-(phi_u - phi)} * sqrt(det g_u / det g)
expands as 1 + v_1 u + v_2 u^2 + ...; the v_k are spatial fields on the slice
(constants on homogeneous examples).  Derivative-normalized coefficients
p_k = k! v_k re-expand V around interior points of the flow parameter.

First variation in the density direction:
    delta v_k [omega] = omega * lambda * v_{k-1}
                        + div_phi( L_k^{ij} d_j omega )
with the transport tensors
    L_k = [u^k] ( V(u) * int_0^u g^{-1}(s) ds )
and div_phi X = cov_i X^i - X^i d_i phi.  Criticality of a functional built
from v_k at a shrinker means constancy of the integrand, so the residual
reported subtracts the weighted mean rather than testing for zero.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .geometry import (
    TensorJet,
    divergence_phi,
    measure_density,
    metric_inverse,
    partials,
)
from .jets import (
    jet_add,
    jet_analytic,
    jet_div,
    jet_integrate_u,
    jet_mul,
    jet_neg,
    jet_scale,
    jet_sub,
    jet_sum,
    jet_u_coefficient,
    mat_det,
)
from .quadrature import integrate


def volume_density_jet(exp):
    """V(u) as a single jet on the slice chart."""
    mm = exp.mm
    n = mm.dim
    sl = exp.fresh_slice()
    G_u = [[sl.g.get(i, j) for j in range(n)] for i in range(n)]
    G_0 = [[mm.g.get(i, j) for j in range(n)] for i in range(n)]
    ratio = jet_div(mat_det(G_u), mat_det(G_0))
    root = jet_analytic(ratio, "sqrt")
    damp = jet_analytic(jet_neg(jet_sub(exp.phi_u, mm.phi)), "exp")
    return jet_mul(damp, root)


def volume_coefficients(exp, upto=None):
    """[v_0, v_1, ..., v_upto] as spatial jets; v_0 = 1."""
    K = exp.order if upto is None else upto
    V = volume_density_jet(exp)
    return [jet_u_coefficient(V, k) for k in range(K + 1)]


def volume_values(exp, upto=None):
    """The coefficients evaluated at the base point(s)."""
    out = []
    for v in volume_coefficients(exp, upto):
        val = v.value(0)
        out.append(val)
    return out


def p_coefficients(exp, upto=None):
    """Derivative-normalized p_k = k! v_k."""
    return [
        jet_scale(v, math.factorial(k))
        for k, v in enumerate(volume_coefficients(exp, upto))
    ]


def transport_tensor(exp, k):
    """L_k^{ij} = [u^k] ( V(u) int_0^u g^{-1}(s) ds ), contravariant."""
    mm = exp.mm
    n = mm.dim
    sl = exp.fresh_slice()
    ginv = metric_inverse(sl)
    V = volume_density_jet(exp)
    out = TensorJet(n, 2, mm.spec, sym="s2")
    for i in range(n):
        for j in range(i, n):
            integ = jet_integrate_u(ginv.get(i, j))
            out.set_((i, j), jet_u_coefficient(jet_mul(V, integ), k))
    return out


def conformal_variation(exp, omega, k):
    """delta v_k [omega] as a spatial jet on the base chart.

    omega may be an expression string or a ready jet.
    """
    mm = exp.mm
    n = mm.dim
    if isinstance(omega, str):
        from .fields import field_to_jet, parse_field

        omega = field_to_jet(parse_field(omega), mm.chart.coords, mm.base, mm.spec)
    vs = volume_coefficients(exp, k)
    dom = partials(mm, omega)
    Lk = transport_tensor(exp, k)
    X = [
        jet_sum([jet_mul(Lk.get(i, j), dom[j]) for j in range(n)], spec=mm.spec)
        for i in range(n)
    ]
    div = divergence_phi(mm, X)
    lam_term = jet_scale(jet_mul(omega, vs[k - 1]), mm.lam)
    return jet_add(lam_term, div)


def weighted_mean(values, mm, grid):
    """Mean against e^{-phi} dvol over the grid (normalizing constants cancel)."""
    w = measure_density(mm)
    tot = integrate(grid, w)
    return integrate(grid, np.asarray(values, dtype=float) * w) / tot


def critical_residual(exp, k, grid):
    """Max deviation of v_k from its weighted mean over the grid.

    The expansion must have been solved on the grid's points (float batch)."""
    vals = np.asarray(volume_coefficients(exp, k)[k].value(0), dtype=float)
    mean = weighted_mean(vals, exp.mm, grid)
    return float(np.max(np.abs(vals - mean))), mean


def einstein_volume_value(n, mu, k):
    """Closed form: v_k = mu^k / k! * prod_{j=0}^{k-1} (n - 4j)."""
    mu = Fraction(mu)
    prod = Fraction(1)
    for j in range(k):
        prod *= n - 4 * j
    return mu**k / math.factorial(k) * prod


def einstein_sign(n, k):
    """Sign of v_k on an Einstein example, from the closed-form product."""
    v = einstein_volume_value(n, 1, k)
    return (v > 0) - (v < 0)
