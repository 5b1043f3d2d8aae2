"""Evolution structure carried by the solved normal-form family.

A solved family (g_u, phi_u) is more than a Taylor table: differentiating in
u reproduces, at lambda = 0, the weighted Ricci flow of the pair, and at
lambda = 1/(2*tau) > 0 the self-similarly rescaled version of it.  This
module measures those statements as series residuals, transports the
derivative-normalized volume coefficients along the flow, evaluates the
integral functionals built from them, and classifies node-wise sign data
against the positivity cones.

Trust cuts follow the solver: an order-K solve pins the combined equations
through u^{K-1}, each extra u-derivative costs one order, and the jets'
validity tracking enforces the rest.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .ambient import g_u_prime, one_minus_lambda_u, solve_ambient
from .geometry import (
    MetricMeasure,
    laplacian,
    measure_density,
    scalar_curvature,
    t2_inner,
    t2_trace,
    weighted_invariants,
)
from .jets import (
    BudgetError,
    DomainError,
    jet_add,
    jet_const,
    jet_int_pow,
    jet_invert,
    jet_mul,
    jet_partial,
    jet_scale,
    jet_sub,
)
from .quadrature import integrate
from .volume import einstein_volume_value, p_coefficients, volume_coefficients, volume_density_jet


def _norm_upto(jet, cut):
    norms = jet.norms_by_order()
    vals = [v for v in norms[: cut + 1] if v is not None]
    return max(vals, default=0.0)


def _tensor_norm_upto(T, cut):
    out = 0.0
    for jv in T.comps.values():
        out = max(out, _norm_upto(jv, cut))
    return out


def _node_values(jet, count):
    """Value slots of a spatial jet as a float array of grid length."""
    v = jet.value(0)
    if isinstance(v, Fraction):
        v = float(v)
    return np.broadcast_to(np.asarray(v, dtype=float), (count,)).copy()


def _check_tau(lam, tau):
    """Default tau from lambda = 1/(2 tau), or validate a supplied one."""
    if not lam > 0:
        raise DomainError("shrinker time needs lambda > 0")
    if tau is None:
        return 1 / (2 * lam) if isinstance(lam, float) else Fraction(1, 1) / (2 * lam)
    if isinstance(lam, Fraction):
        tau = Fraction(tau)
        if 2 * lam * tau != 1:
            raise DomainError("tau does not match lambda = 1/(2 tau)")
    else:
        tau = float(tau)
        if abs(2 * lam * tau - 1) > 1e-12:
            raise DomainError("tau does not match lambda = 1/(2 tau)")
    if not tau > 0:
        raise DomainError("tau must be positive")
    return tau


def f_flow_residual(exp):
    """Residuals of the lambda = 0 flow equations along the solved family.

    The flow field moves backward in u with a vertical rate given by half the
    weighted scalar curvature of the running slice.  Three identities follow
    and are measured through order K-1: the metric rate matches twice the
    weighted Ricci tensor, the density rate matches R + lap(phi) after the
    vertical correction, and the weighted volume form is carried unchanged.
    """
    if exp.mm.lam != 0:
        raise DomainError("f_flow_residual needs lambda = 0")
    if exp.order < 2:
        raise BudgetError("flow residuals need a solve of order >= 2")
    sl = exp.fresh_slice()
    w = weighted_invariants(sl)
    gp = g_u_prime(sl.g)
    phip = jet_partial(sl.phi, "u")
    v1 = jet_scale(w.r_phi, Fraction(1, 2))
    cut = exp.order - 1

    res_metric = w.ric_phi.scale(2).sub(gp)
    r_u = scalar_curvature(sl)
    lap_u = laplacian(sl, sl.phi)
    res_density = jet_sub(jet_add(r_u, lap_u), jet_add(v1, phip))
    half_tr = jet_scale(t2_trace(sl, gp), Fraction(1, 2))
    res_measure = jet_sub(jet_add(v1, phip), half_tr)
    return {
        "metric": _tensor_norm_upto(res_metric, cut),
        "density": _norm_upto(res_density, cut),
        "measure": _norm_upto(res_measure, cut),
    }


def w_flow_residual(exp, tau=None):
    """Residuals of the rescaled flow equations at lambda = 1/(2 tau) > 0.

    The family (1 - s/tau) g_u with frozen density and shrinking remaining
    time packages the normalized flow; its field picks up a 1/(1 - lambda u)
    clock factor.  Measured claims, through order K-1: the metric rate equals
    -2 (Ric + Hess phi), and the density rate equals -(R + lap(phi)) plus the
    dimensional constant n/(2 tau).  The time rate is -1 by construction, so
    its residual is stored as literal zero to make the claim list complete.
    """
    lam = exp.mm.lam
    tau = _check_tau(lam, tau)
    if exp.order < 1:
        raise BudgetError("flow residuals need a solve of order >= 1")
    sl = exp.fresh_slice()
    n = sl.dim
    w = weighted_invariants(sl)
    beta = one_minus_lambda_u(sl.spec, lam)
    gp = sl.g.map(lambda j: jet_mul(beta, jet_partial(j, "u")))
    phip = jet_partial(sl.phi, "u")
    v1 = jet_scale(w.r_phi, Fraction(1, 2))
    cut = exp.order - 1

    res_metric = w.p_phi.scale(2).sub(gp)
    r_u = scalar_curvature(sl)
    lap_u = laplacian(sl, sl.phi)
    res_density = jet_sub(
        jet_sub(jet_add(r_u, lap_u), jet_add(v1, jet_mul(beta, phip))),
        jet_const(sl.spec, n * lam),
    )
    return {
        "metric": _tensor_norm_upto(res_metric, cut),
        "density": _norm_upto(res_density, cut),
        "tau": 0.0,
    }


def pk_evolution_check(exp, k_max=None):
    """First-order transport of the derivative-normalized volume ratios.

    With V the relative volume density and P_k = (d/du)^k V / V, the quotient
    rule gives P_k' = P_{k+1} - P_1 P_k.  Measuring that alone would be a
    tautology, so P_1 is replaced by its curvature formula: half the weighted
    scalar curvature of the running slice, which equals (1 - lambda u) P_1
    by the solved density identity.  The clocked step residual

        (1 - lambda u)(P_k' - P_{k+1}) + (R_phi/2) P_k

    therefore vanishes for any lambda and reduces at lambda = 0 to the
    transport law of the flow.  Also returned: the k = 1 formula residual
    itself and the consequence p_1^2 - p_2 = |P_phi|^2, which holds as a
    u-series at lambda = 0 and at the u = 0 slice otherwise.
    """
    K = exp.order
    if k_max is None:
        k_max = K - 1
    if not 1 <= k_max <= K - 1:
        raise BudgetError("pk_evolution_check needs 1 <= k_max <= order - 1")
    V = volume_density_jet(exp)
    Vinv = jet_invert(V)
    derivs = [V]
    for _ in range(k_max + 1):
        derivs.append(jet_partial(derivs[-1], "u"))
    P = [jet_mul(d, Vinv) for d in derivs]

    sl = exp.fresh_slice()
    w = weighted_invariants(sl)
    p1_loc = jet_scale(w.r_phi, Fraction(1, 2))
    clock = one_minus_lambda_u(sl.spec, sl.lam)
    step = {}
    for k in range(1, k_max + 1):
        res = jet_add(
            jet_mul(clock, jet_sub(jet_partial(P[k], "u"), P[k + 1])),
            jet_mul(p1_loc, P[k]),
        )
        step[k] = _norm_upto(res, K - k - 1)
    out = {"series_step": step}
    out["first_formula"] = _norm_upto(jet_sub(p1_loc, jet_mul(clock, P[1])), K - 1)
    if K >= 2:
        pnorm = t2_inner(sl, w.p_phi, w.p_phi)
        second = jet_sub(jet_sub(jet_mul(P[1], P[1]), P[2]), pnorm)
        out["second_formula"] = _norm_upto(second, K - 2 if sl.lam == 0 else 0)
    return out


def functionals(exp, grid, tau=None, upto=None):
    """Integrals of the volume coefficients against the weighted measure.

    At lambda = 0 the raw integrals F_k are returned.  At lambda > 0 each is
    rescaled by tau^k and the squashed Gaussian normalization (4 pi tau)^(-n/2)
    so that the k-th value is invariant under (g, tau) -> (c g, c tau).  The
    k = 0 entry is the reference (weighted volume, or its normalized form).
    """
    mm = exp.mm
    if mm.spec.batch not in (None, 0) and mm.spec.batch != grid.count:
        raise ValueError("grid size does not match the jet batch")
    if upto is None:
        upto = exp.order
    vs = volume_coefficients(exp, upto=upto)
    wgt = measure_density(mm)
    raw = [integrate(grid, _node_values(v, grid.count) * wgt) for v in vs]
    if mm.lam == 0:
        if tau is not None:
            raise DomainError("tau only applies at lambda > 0")
        return {"F": {k: raw[k] for k in range(len(raw))}}
    tau = _check_tau(mm.lam, tau)
    t = float(tau)
    n = mm.dim
    damp = (4 * math.pi * t) ** (-n / 2)
    return {
        "W": {k: (t**k) * raw[k] * damp for k in range(len(raw))},
        "tau": t,
    }


def monotonicity_f1(exp, grid):
    """Derivative of the first functional along the flow, by two routes.

    Route one uses the transported coefficients: the rate is the integral of
    p_1^2 - p_2.  Route two integrates |P_phi|^2 directly.  Their agreement
    is the k = 1 monotonicity statement; the common value is nonnegative and
    vanishes only when P_phi does.
    """
    if exp.mm.lam != 0:
        raise DomainError("monotonicity_f1 needs lambda = 0")
    if exp.order < 2:
        raise BudgetError("monotonicity_f1 needs a solve of order >= 2")
    mm = exp.mm
    if mm.spec.batch not in (None, 0) and mm.spec.batch != grid.count:
        raise ValueError("grid size does not match the jet batch")
    p = p_coefficients(exp, upto=2)
    wgt = measure_density(mm)
    p1v = _node_values(p[1], grid.count)
    p2v = _node_values(p[2], grid.count)
    from_coeffs = integrate(grid, (p1v * p1v - p2v) * wgt)
    w = weighted_invariants(mm)
    pn = t2_inner(mm, w.p_phi, w.p_phi)
    from_curv = integrate(grid, _node_values(pn, grid.count) * wgt)
    return {
        "from_coefficients": from_coeffs,
        "from_curvature": from_curv,
        "gap": abs(from_coeffs - from_curv),
    }


def _spread(x):
    """(min, max) of a value slot over quadrature nodes; scalars pass through."""
    if isinstance(x, np.ndarray):
        return float(np.min(x)), float(np.max(x))
    return x, x


@dataclass
class ConeReport:
    """Node-wise extremes of the scaled coefficients p_k = k! v_k.

    Only numbers are stored; membership calls derive their verdicts from the
    extremes so every conclusion stays traceable to a stored quantity.
    Boundary cases (an extreme exactly zero) are reported as non-strict
    rather than rounded into membership or failure.
    """

    k_max: int
    p_low: dict = field(default_factory=dict)
    p_high: dict = field(default_factory=dict)
    newton_high: dict = field(default_factory=dict)
    shifted_low: dict = field(default_factory=dict)

    def first_cone(self, k):
        """Membership in {p_j > 0, j <= k}: inside, boundary, or outside."""
        if not 1 <= k <= self.k_max:
            raise ValueError("k out of range")
        lows = [self.p_low[j] for j in range(1, k + 1)]
        if any(v < 0 for v in lows):
            return "outside"
        if all(v > 0 for v in lows):
            return "inside"
        return "boundary"

    def alternating_cone(self):
        """Membership in {(-1)^(k+1) p_k >= 0 for all k}, non-strict by design."""
        strict = True
        for k in range(1, self.k_max + 1):
            lo, hi = self.p_low[k], self.p_high[k]
            if k % 2 == 1:
                if lo < 0:
                    return "outside"
                strict = strict and lo > 0
            else:
                if hi > 0:
                    return "outside"
                strict = strict and hi < 0
        return "inside" if strict else "inside-nonstrict"

    def newton(self, k):
        """Whether p_{k-1} p_{k+1} <= p_k^2 holds at every node."""
        hi = self.newton_high[k]
        if hi > 0:
            return "fails"
        return "holds" if hi < 0 else "holds-nonstrict"

    def shifted(self, k):
        """Whether the transported sign pattern (-1)^(k+1)(p_1 p_k - p_{k+1})
        stays nonnegative, the invariance statement for the alternating cone."""
        lo = self.shifted_low[k]
        if lo < 0:
            return "fails"
        return "holds" if lo > 0 else "holds-nonstrict"

    def to_dict(self):
        out = {
            "k_max": self.k_max,
            "p_low": {str(k): v for k, v in self.p_low.items()},
            "p_high": {str(k): v for k, v in self.p_high.items()},
            "newton_high": {str(k): v for k, v in self.newton_high.items()},
            "shifted_low": {str(k): v for k, v in self.shifted_low.items()},
            "first_cone": {str(k): self.first_cone(k) for k in range(1, self.k_max + 1)},
            "alternating_cone": self.alternating_cone(),
            "newton": {str(k): self.newton(k) for k in self.newton_high},
            "shifted": {str(k): self.shifted(k) for k in self.shifted_low},
        }
        return out


def cone_membership(exp, k_max=None):
    """Classify the solved family's p_k sign data against the cones.

    Uses the coefficients at u = 0 on every node of the base batch.  p_0 = 1
    by normalization.  Newton quotients and the shifted pattern stop one
    level early since they need p_{k+1}.
    """
    if k_max is None:
        k_max = exp.order
    if not 1 <= k_max <= exp.order:
        raise BudgetError("cone_membership needs 1 <= k_max <= order")
    p = p_coefficients(exp, upto=k_max)
    vals = [j.value(0) for j in p]
    rep = ConeReport(k_max=k_max)
    for k in range(1, k_max + 1):
        lo, hi = _spread(vals[k])
        rep.p_low[k] = lo
        rep.p_high[k] = hi
    for k in range(1, k_max):
        lo, hi = _spread(vals[k - 1] * vals[k + 1] - vals[k] * vals[k])
        rep.newton_high[k] = hi
        sgn = 1 if k % 2 == 1 else -1
        lo, hi = _spread(sgn * (vals[1] * vals[k] - vals[k + 1]))
        rep.shifted_low[k] = lo
    return rep


def einstein_sign_table(n, mu, k_max):
    """Monotonicity table for the positive Einstein family, pure arithmetic.

    With Ric = 2 mu g the coefficients close up: k! v_k = mu^k a_k where
    a_k = n (n-4) ... (n-4(k-1)), and the transported rate p_1 p_k - p_{k+1}
    equals 4 k mu^(k+1) a_k.  The sign of a_k therefore decides whether F_k
    increases, decreases, or sits at zero.  Each row carries both the sign
    read off the product and the behavior predicted by the threshold index
    j = ceil(n/4), so the two classifications can be cross-checked.
    """
    if n < 3:
        raise DomainError("einstein table needs dimension >= 3")
    mu = Fraction(mu)
    if mu <= 0:
        raise DomainError("einstein table needs mu > 0")
    j = -(-n // 4)
    terminates = n % 4 == 0
    rows = []
    prod = 1
    for k in range(1, k_max + 1):
        prod *= n - 4 * (k - 1)
        vk = einstein_volume_value(n, mu, k)
        rate = 4 * k * mu ** (k + 1) * prod
        sign = (prod > 0) - (prod < 0)
        behavior = {1: "increasing", -1: "decreasing", 0: "zero"}[sign]
        if terminates:
            predicted = "increasing" if k <= j else "zero"
        elif k <= j or (k - j) % 2 == 0:
            predicted = "increasing"
        else:
            predicted = "decreasing"
        rows.append(
            {
                "k": k,
                "product": prod,
                "v_k": vk,
                "rate": rate,
                "sign": sign,
                "behavior": behavior,
                "predicted": predicted,
            }
        )
    return {
        "n": n,
        "mu": mu,
        "threshold": j,
        "terminates": terminates,
        "rows": rows,
    }


def soliton_w_constancy(exp, tau=None, k_max=4, grid=None, soliton_tol=1e-12):
    """Shrinker constancy of tau^k v_k, or the derivative of W_1 otherwise.

    When P_phi vanishes on the slice the family (c g, phi, lambda / c) with
    c = 1 - t/tau realizes the flow exactly; each sampled time is re-solved
    and tau(t)^k v_k(t) compared against time zero.  The coefficients must
    then also follow the closed pattern v_k = Y_phi^k / k! with a spatially
    constant Y_phi.  Away from a soliton a quadrature grid is required and
    the k = 1 derivative is evaluated by the coefficient and curvature
    routes, both against the normalized measure.
    """
    mm = exp.mm
    tau = _check_tau(mm.lam, tau)
    w = weighted_invariants(mm)
    pn = t2_inner(mm, w.p_phi, w.p_phi)
    pn_norm = _norm_upto(pn, 0)
    if pn_norm <= soliton_tol:
        if not 1 <= k_max <= exp.order:
            raise BudgetError("soliton_w_constancy needs 1 <= k_max <= order")
        base_vs = volume_coefficients(exp, upto=k_max)
        fact = [math.factorial(k) for k in range(k_max + 1)]
        pattern = 0.0
        for k in range(1, k_max + 1):
            closed = jet_scale(jet_int_pow(w.y_phi, k), Fraction(1, fact[k]))
            pattern = max(pattern, _norm_upto(jet_sub(base_vs[k], closed), 0))
        per_scale = {}
        deviation = 0.0
        for c in (Fraction(3, 4), Fraction(1, 2), Fraction(1, 4)):
            lam_c = mm.lam / c if isinstance(mm.lam, Fraction) else float(mm.lam) / float(c)
            smm = MetricMeasure(
                mm.chart, mm.g.scale(c), mm.phi, lam_c, mm.spec, mm.base, mm.require_spd
            )
            sexp = solve_ambient(smm, exp.order)
            svs = volume_coefficients(sexp, upto=k_max)
            tau_c = tau * c if isinstance(tau, Fraction) else float(tau) * float(c)
            worst = 0.0
            for k in range(1, k_max + 1):
                d = jet_sub(jet_scale(svs[k], tau_c**k), jet_scale(base_vs[k], tau**k))
                worst = max(worst, _norm_upto(d, 0))
            per_scale[str(c)] = worst
            deviation = max(deviation, worst)
        return {
            "mode": "soliton",
            "soliton_residual": pn_norm,
            "deviation": deviation,
            "per_scale": per_scale,
            "pattern_deviation": pattern,
        }
    if grid is None:
        raise DomainError("non-soliton data needs a quadrature grid")
    if mm.spec.batch not in (None, 0) and mm.spec.batch != grid.count:
        raise ValueError("grid size does not match the jet batch")
    if exp.order < 2:
        raise BudgetError("the W_1 derivative needs a solve of order >= 2")
    n = mm.dim
    damp = (4 * math.pi * float(tau)) ** (-n / 2)
    wgt = measure_density(mm)
    p = p_coefficients(exp, upto=2)
    p1v = _node_values(p[1], grid.count)
    p2v = _node_values(p[2], grid.count)
    from_coeffs = damp * integrate(grid, (p1v * p1v - p2v) * wgt)
    from_curv = damp * integrate(grid, _node_values(pn, grid.count) * wgt)
    return {
        "mode": "flowing",
        "soliton_residual": pn_norm,
        "from_coefficients": from_coeffs,
        "from_curvature": from_curv,
        "gap": abs(from_coeffs - from_curv),
    }


@dataclass
class FlowReport:
    """Bundle of flow diagnostics for one solved family.

    Holds numbers only; pass/fail style judgements are derived by verdicts()
    against an explicit tolerance so reports never carry free-floating
    booleans detached from the evidence.
    """

    order: int
    lam: object
    flow: dict
    evolution: dict
    cones: ConeReport
    functional_values: dict | None = None
    derivative: dict | None = None
    constancy: dict | None = None

    def verdicts(self, tol=1e-8):
        step = self.evolution["series_step"]
        ev_max = max(step.values(), default=0.0)
        ev_max = max(
            ev_max,
            self.evolution.get("first_formula", 0.0),
            self.evolution.get("second_formula", 0.0),
        )
        flow_max = max(v for v in self.flow.values())
        out = {
            "flow_consistent": flow_max <= tol,
            "evolution_consistent": ev_max <= tol,
            "alternating_cone": self.cones.alternating_cone(),
            "first_cone": self.cones.first_cone(self.cones.k_max),
        }
        if self.derivative is not None:
            agree = self.derivative["gap"] <= tol * max(
                1.0, abs(self.derivative["from_curvature"])
            )
            out["derivative_routes_agree"] = agree
            out["derivative_nonnegative"] = self.derivative["from_curvature"] >= -tol
        if self.constancy is not None and self.constancy["mode"] == "soliton":
            out["shrinker_constant"] = self.constancy["deviation"] <= tol
        return out

    def to_dict(self, tol=1e-8):
        out = {
            "order": self.order,
            "lam": self.lam,
            "flow": self.flow,
            "evolution": {
                "series_step": {str(k): v for k, v in self.evolution["series_step"].items()},
                "first_formula": self.evolution.get("first_formula"),
                "second_formula": self.evolution.get("second_formula"),
            },
            "cones": self.cones.to_dict(),
            "verdicts": self.verdicts(tol),
        }
        if self.functional_values is not None:
            fv = {}
            for key, val in self.functional_values.items():
                fv[key] = {str(k): x for k, x in val.items()} if isinstance(val, dict) else val
            out["functionals"] = fv
        if self.derivative is not None:
            out["derivative"] = self.derivative
        if self.constancy is not None:
            out["constancy"] = self.constancy
        return out


def flow_report(exp, grid=None, tau=None, k_max=None):
    """Assemble the standard flow diagnostics for a solved family.

    Chooses the lambda = 0 or shrinker residual set by the family's lambda,
    always runs the coefficient evolution and cone classification, and adds
    functional values and derivative routes when a grid is supplied.  At
    lambda > 0 the shrinker constancy check runs whenever the slice is a
    soliton, and the derivative routes otherwise (grid permitting).
    """
    lam = exp.mm.lam
    if k_max is None:
        k_max = exp.order
    evolution = pk_evolution_check(exp) if exp.order >= 2 else {"series_step": {}}
    cones = cone_membership(exp, k_max=k_max)
    report = FlowReport(
        order=exp.order,
        lam=lam,
        flow=f_flow_residual(exp) if lam == 0 else w_flow_residual(exp, tau),
        evolution=evolution,
        cones=cones,
    )
    if grid is not None:
        report.functional_values = functionals(exp, grid, tau=None if lam == 0 else tau)
    if lam == 0:
        if grid is not None and exp.order >= 2:
            report.derivative = monotonicity_f1(exp, grid)
    else:
        res = soliton_w_constancy(
            exp,
            tau=tau,
            k_max=min(k_max, exp.order),
            grid=grid,
        ) if (grid is not None or _is_soliton(exp)) else None
        if res is not None:
            if res["mode"] == "soliton":
                report.constancy = res
            else:
                report.derivative = res
    return report


def _is_soliton(exp, tol=1e-12):
    w = weighted_invariants(exp.mm)
    pn = t2_inner(exp.mm, w.p_phi, w.p_phi)
    return _norm_upto(pn, 0) <= tol
