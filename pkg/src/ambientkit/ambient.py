"""Order-by-order construction of the normal-form ambient expansion (g_u, phi_u).

The ambient metric on the line bundle times an interval is taken in the normal
form  2 du dv + g_u  with density  phi_u - v + lambda*u*v.  Requiring the
weighted Ricci equations to vanish order by order in u determines the Taylor
coefficients of g_u and phi_u uniquely from (g, phi, lambda):

  order m metric step:  the u^{m-1} coefficient of
        E := P_phi[g_u, phi_u] - (1/2)(1 - lambda*u) d_u g_u
    contains -(m/2) * ghat_m plus known lower-order data, so ghat_m = (2/m) * E_{m-1}
    evaluated with ghat_m zeroed;

  order m density step:  the u^{m-1} coefficient of the weighted scalar equation
        F := F_phi[g_u, phi_u] + (n + 2 - kappa) lambda
             + 2 (1 - lambda*u) d_u phi_u - (1/2)(1 - lambda*u) tr(g^{-1} d_u g_u)
    contains +2m * phihat_m, so phihat_m = -(1/2m) * F_{m-1} with phihat_m zeroed.

The dimension constant kappa is calibrated at runtime (see calibration module);
n + 2 is the value every lambda != 0 family forces.  All v-dependence in the
scalar equation cancels identically; the residual evaluator assembles the two
v-slopes separately and checks their difference vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .geometry import (
    Chart,
    MetricMeasure,
    TensorJet,
    christoffel,
    metric_measure,
    partials,
    t2_inner,
    t2_mixed,
    t2_trace,
    weighted_bach,
    weighted_invariants,
    zero_jet,
)
from .jets import (
    BudgetError,
    jet_add,
    jet_const,
    jet_mul,
    jet_neg,
    jet_partial,
    jet_scale,
    jet_sub,
    jet_sum,
    jet_u_coefficient,
    jet_u_power,
    jet_zero,
)


@dataclass
class AmbientExpansion:
    mm: MetricMeasure
    order: int
    kappa: object  # Fraction or float
    g_u: TensorJet
    phi_u: object  # Jet

    def fresh_slice(self):
        """The u-dependent slice data as a MetricMeasure with empty caches."""
        m = self.mm
        return MetricMeasure(m.chart, self.g_u, self.phi_u, m.lam, m.spec, m.base, m.require_spd)

    def g_hat(self, k):
        """Taylor coefficient of g_u at u^k, as a spatial (u-constant) TensorJet."""
        out = TensorJet(self.mm.dim, 2, self.mm.spec, sym="s2")
        for key, jv in self.g_u.comps.items():
            out.set_(key, jet_u_coefficient(jv, k))
        return out

    def phi_hat(self, k):
        return jet_u_coefficient(self.phi_u, k)

    def g_deriv(self, k):
        """d_u^k g at u=0 (derivative convention: k! times the Taylor coefficient)."""
        return self.g_hat(k).scale(math.factorial(k))

    def phi_deriv(self, k):
        return jet_scale(self.phi_hat(k), math.factorial(k))


def one_minus_lambda_u(spec, lam):
    return jet_sub(jet_const(spec, 1), jet_scale(jet_u_power(spec, 1), lam))


def g_u_prime(g_u):
    return g_u.map(lambda j: jet_partial(j, "u"))


def expansion_equation_tensor(sl):
    """E = P_phi[g_u, phi_u] - (1/2)(1 - lambda*u) d_u g_u on a slice MetricMeasure."""
    w = weighted_invariants(sl)
    olu = one_minus_lambda_u(sl.spec, sl.lam)
    gp = g_u_prime(sl.g)
    half_term = gp.map(lambda j: jet_scale(jet_mul(olu, j), Fraction(-1, 2)))
    return w.p_phi.add(half_term)


def expansion_equation_scalar(sl, kappa):
    """The weighted scalar equation F on a slice MetricMeasure."""
    n = sl.dim
    spec = sl.spec
    lam = sl.lam
    w = weighted_invariants(sl)
    olu = one_minus_lambda_u(spec, lam)
    gp = g_u_prime(sl.g)
    tr_gp = t2_trace(sl, gp)
    phip = jet_partial(sl.phi, "u")
    F = jet_add(w.f_phi, jet_const(spec, (n + 2 - kappa) * lam))
    F = jet_add(F, jet_scale(jet_mul(olu, phip), 2))
    F = jet_add(F, jet_scale(jet_mul(olu, tr_gp), Fraction(-1, 2)))
    return F


def solve_ambient(mm, order, kappa=None):
    """Determine (g_u, phi_u) through u^order; kappa defaults to n + 2."""
    spec = mm.spec
    if order > spec.u_order:
        raise BudgetError("order %d exceeds the jet u-cap %d" % (order, spec.u_order))
    n = mm.dim
    if kappa is None:
        kappa = n + 2
    if spec.mode == "float":
        kappa = float(kappa)
    g_u = mm.g
    phi_u = mm.phi
    for m in range(1, order + 1):
        sl = MetricMeasure(mm.chart, g_u, phi_u, mm.lam, spec, mm.base, mm.require_spd)
        E = expansion_equation_tensor(sl)
        upow = jet_u_power(spec, m)
        g_next = TensorJet(n, 2, spec, sym="s2")
        for i in range(n):
            for j in range(i, n):
                e = E.get(i, j)
                if e.is_zero():
                    continue
                coeff = jet_u_coefficient(e, m - 1)
                g_next.set_((i, j), jet_mul(jet_scale(coeff, Fraction(2, m)), upow))
        g_u = g_u.add(g_next)
        sl2 = MetricMeasure(mm.chart, g_u, phi_u, mm.lam, spec, mm.base, mm.require_spd)
        F = expansion_equation_scalar(sl2, kappa)
        s = jet_u_coefficient(F, m - 1)
        phi_u = jet_add(phi_u, jet_mul(jet_scale(s, Fraction(-1, 2 * m)), upow))
    return AmbientExpansion(mm, order, kappa, g_u, phi_u)


# -- residual evaluation ----------------------------------------------------


def ambient_residual(exp):
    """Re-derive every component of the weighted ambient equations from the
    solved expansion and report per-u-order residual norms.

    Components, in the v/x/u index split of the normal form:
      tangential  (ij):    E as in the solver
      mixed       (i, u):  Ric_{i u} + Hess phi_{i u}
      normal      (u, u):  Ric_{u u} + Hess phi_{u u}
      scalar:              F as in the solver
      v-rows:              identically zero by the bookkeeping lambda - lambda
    plus the cancellation of the v-linear part of the scalar equation.
    """
    mm = exp.mm
    spec = mm.spec
    lam = mm.lam
    n = mm.dim
    K = exp.order
    sl = exp.fresh_slice()

    E = expansion_equation_tensor(sl)
    F = expansion_equation_scalar(sl, exp.kappa)

    gp = g_u_prime(sl.g)
    gpp = gp.map(lambda j: jet_partial(j, "u"))
    A = t2_mixed(sl, gp)  # (g^{-1} g')^k_i
    App = t2_mixed(sl, gpp)
    tr_A = jet_sum([A[k][k] for k in range(n)], spec=spec)
    tr_App = jet_sum([App[k][k] for k in range(n)], spec=spec)
    tr_A2 = jet_sum(
        [jet_mul(A[k][l], A[l][k]) for k in range(n) for l in range(n)], spec=spec
    )

    phip = jet_partial(sl.phi, "u")
    phipp = jet_partial(phip, "u")

    # mixed slot: (1/2)[ cov_k A^k_i - d_i tr A ] + d_i phi' - (1/2) A^k_i d_k phi
    gam = christoffel(sl)
    dphi = partials(sl, sl.phi)
    mixed = []
    for i in range(n):
        div_terms = []
        for k in range(n):
            t = jet_partial(A[k][i], k)
            div_terms.append(t)
            for l in range(n):
                gkl = gam.get(k, k, l)
                if not gkl.is_zero():
                    div_terms.append(jet_mul(gkl, A[l][i]))
                gki = gam.get(l, k, i)
                if not gki.is_zero():
                    div_terms.append(jet_neg(jet_mul(gki, A[k][l])))
        div = jet_sum(div_terms, spec=spec)
        r_iu = jet_scale(jet_sub(div, jet_partial(tr_A, i)), Fraction(1, 2))
        hess_iu = jet_sub(
            jet_partial(phip, i),
            jet_scale(
                jet_sum([jet_mul(A[k][i], dphi[k]) for k in range(n)], spec=spec),
                Fraction(1, 2),
            ),
        )
        mixed.append(jet_add(r_iu, hess_iu))

    # normal slot: -(1/2) tr(g^{-1} g'') + (1/4) tr((g^{-1} g')^2) + phi''
    normal = jet_add(
        jet_add(jet_scale(tr_App, Fraction(-1, 2)), jet_scale(tr_A2, Fraction(1, 4))),
        phipp,
    )

    # v-linear slope of the scalar equation, assembled from its two sources
    lm1 = jet_sub(jet_scale(jet_u_power(spec, 1), lam), jet_const(spec, 1))  # lambda*u - 1
    v_from_grad = jet_scale(lm1, 2 * lam)  # d/dv of |grad phi|^2
    v_from_density = jet_scale(lm1, 2 * lam)  # d/dv of 2*lambda*phi
    v_slope = jet_sub(v_from_density, v_from_grad)

    # the v-row entries of the weighted Ricci equation, from the bookkeeping
    # Hess phi_{v u} = lambda and -lambda * gtilde_{v u} = -lambda
    v_row = jet_sub(jet_const(spec, lam), jet_const(spec, lam))

    def norms(j, orders):
        full = j.norms_by_order()
        return [full[k] if k < len(full) else None for k in range(orders)]

    def tensor_norms(T, orders):
        acc = [0.0] * orders
        for jv in T.comps.values():
            for k, v in enumerate(norms(jv, orders)):
                if v is not None:
                    acc[k] = max(acc[k], v)
        return acc

    return {
        "tangential": tensor_norms(E, K),
        "mixed": [
            max((v for v in norms(mjet, K) if v is not None), default=0.0)
            for mjet in mixed
        ],
        "normal": norms(normal, max(K - 1, 1)),
        "scalar": norms(F, K),
        "v_slope": float(v_slope.max_abs()),
        "v_row": float(v_row.max_abs()),
    }


# -- third-order trace identity ---------------------------------------------


def third_order_trace(exp):
    """At u=0:  (1/2) tr_g d_u^3 g - d_u^3 phi  against  -4 <P_phi, B_phi>.

    The right side needs lambda = 0; the op also returns the full-u series
    residual of the same combination against the first-derivative data
        tr(g^{-1} g' g^{-1} g'') - (1/2) tr((g^{-1} g')^3)
    which the solved expansion satisfies at lambda = 0.
    """
    mm = exp.mm
    spec = mm.spec
    if exp.order < 3:
        raise BudgetError("third-order check needs order >= 3")
    g3 = exp.g_deriv(3)
    phi3 = exp.phi_deriv(3)
    lhs0 = jet_sub(jet_scale(t2_trace(mm, g3), Fraction(1, 2)), phi3)
    rhs0 = jet_scale(t2_inner(mm, weighted_invariants(mm).p_phi, weighted_bach(mm)), -4)
    out = {
        "lhs_at_0": lhs0,
        "rhs_bach_at_0": rhs0,
        "residual_at_0": float(jet_sub(lhs0, rhs0).max_abs()),
    }

    sl = exp.fresh_slice()
    n = mm.dim
    gp = g_u_prime(sl.g)
    gpp = gp.map(lambda j: jet_partial(j, "u"))
    gppp = gpp.map(lambda j: jet_partial(j, "u"))
    A = t2_mixed(sl, gp)
    B = t2_mixed(sl, gpp)
    C = t2_mixed(sl, gppp)
    trC = jet_sum([C[k][k] for k in range(n)], spec=spec)
    trAB = jet_sum([jet_mul(A[k][l], B[l][k]) for k in range(n) for l in range(n)], spec=spec)
    trA3 = jet_sum(
        [
            jet_mul(A[k][l], jet_mul(A[l][p], A[p][k]))
            for k in range(n)
            for l in range(n)
            for p in range(n)
        ],
        spec=spec,
    )
    phi_ppp = jet_partial(jet_partial(jet_partial(sl.phi, "u"), "u"), "u")
    series = jet_sub(
        jet_sub(jet_scale(trC, Fraction(1, 2)), phi_ppp),
        jet_sub(trAB, jet_scale(trA3, Fraction(1, 2))),
    )
    out["series_residual"] = [x for x in series.norms_by_order() if x is not None]
    return out


# -- the assembled ambient metric (entry table for downstream modules) -------


def ambient_entry_table(exp):
    """The (n+2)x(n+2) matrix of metric entries as (x,u)-jets.

    Index order: 0 = v (the fiber direction), 1..n = spatial, n+1 = u.  The
    entries carry no v-dependence in this normal form; the density's affine
    v-part is exposed separately by ambient_density_parts.
    """
    mm = exp.mm
    n = mm.dim
    spec = mm.spec
    N = n + 2
    one = jet_const(spec, 1)
    table = [[zero_jet(spec) for _ in range(N)] for _ in range(N)]
    table[0][N - 1] = one
    table[N - 1][0] = one
    for i in range(n):
        for j in range(n):
            table[i + 1][j + 1] = exp.g_u.get(i, j)
    return table


def ambient_density_parts(exp):
    """phi_tilde = a + b*v with a = phi_u and b = lambda*u - 1, as jets."""
    spec = exp.mm.spec
    b = jet_sub(jet_scale(jet_u_power(spec, 1), exp.mm.lam), jet_const(spec, 1))
    return exp.phi_u, b


def ambient_partial(jet, axis, n):
    """d/d(axis) in the v/x/u index order; v-derivatives of entry jets vanish."""
    if axis == 0:
        return jet_zero(jet.spec)
    if 1 <= axis <= n:
        return jet_partial(jet, axis - 1)
    if axis == n + 1:
        return jet_partial(jet, "u")
    raise ValueError("axis %d out of range" % axis)


# -- exact global half-space form (Einstein lambda = 0 families) ------------


def half_space_check(mu=Fraction(1, 2), negative=False):
    """Assemble the global half-space metric for the round-sphere Einstein flow
    (base S^2, Ric = 2*mu*g) as an ordinary 4-chart and evaluate the weighted
    ambient equations at a 16-point grid.

    g = 2 du dv + f(u) g_0 - (R_phi)_u du^2,  phi = (n/2) log f(u) - v,
    with f(u) = 1 + 4*mu*u and (R_phi)_u = 2*mu*n/f.  The negative control
    replaces f by 1 + 3*mu*u in the spatial block only, which is not a
    solution, and must push the residual above 1e-3.
    """
    import numpy as np

    mu = Fraction(mu)
    r2 = 1 / (2 * mu)  # round metric radius^2 for Ric = 2 mu g
    f_true = "(1 + %s*u)" % _frac_str(4 * mu)
    f_spatial = "(1 + %s*u)" % _frac_str(3 * mu if negative else 4 * mu)
    n_base = 2
    rphi = "(%s/%s)" % (_frac_str(4 * mu), f_true)  # 2*mu*n/f with n = 2
    entries = {
        (0, 3): "1",
        (1, 1): "%s*%s/(1 - z^2)" % (f_spatial, _frac_str(r2)),
        (2, 2): "%s*%s*(1 - z^2)" % (f_spatial, _frac_str(r2)),
        (3, 3): "-(%s)" % rphi,
    }
    phi = "log%s - v" % f_true
    chart = Chart(("v", "z", "t", "u"), "product")
    vs = [-0.25, 1 / 3]
    zs = [-0.5, 0.2]
    ts = [0.5, 1.4]
    us = [-0.125, 1 / 7]
    pts = [(a, b, c, d) for a in vs for b in zs for c in ts for d in us]
    base = tuple(np.asarray([p[i] for p in pts]) for i in range(4))
    from .jets import JetSpec

    spec = JetSpec(4, 4, 0, mode="float", batch=len(pts))
    mm = metric_measure(chart, entries, phi, 0, spec, base, require_spd=False)
    w = weighted_invariants(mm)
    return {
        "ric_phi_max": float(w.ric_phi.max_abs()),
        "scalar_eq_max": float(w.f_phi.max_abs()),
        "grid_points": len(pts),
        "negative_control": bool(negative),
    }


def _frac_str(q):
    q = Fraction(q)
    return "%d" % q.numerator if q.denominator == 1 else "(%d/%d)" % (q.numerator, q.denominator)
