"""Curvature of the assembled total metric and its normal-derivative family.

The solved expansion assembles into an (n+2)x(n+2) entry table over the index
order (v, x^1..x^n, u).  Christoffel symbols and the full Riemann tensor are
computed from that table by the standard coordinate formulas; no per-component
shortcut is wired in, so the results stay honest under convention changes.

Repeated covariant differentiation of the mixed two-u-slot curvature block in
the u-direction, restricted to the base slice, yields the extended obstruction
tensors.  recursion_check verifies the first-order system these satisfy and
re-derives the second and third u-derivatives of the solved data from them.
"""

from dataclasses import dataclass
from fractions import Fraction

from .ambient import ambient_entry_table, ambient_partial, g_u_prime
from .geometry import (
    TensorJet,
    cov_deriv,
    metric_inverse,
    riemann_lowered,
    t2_mixed,
    t2_trace,
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
    mat_mul,
    mat_trace,
)


def ambient_inverse_table(exp, sl=None):
    """Inverse entry table; the bordered v/u structure inverts in closed form."""
    mm = exp.mm
    n = mm.dim
    spec = mm.spec
    N = n + 2
    if sl is None:
        sl = exp.fresh_slice()
    ginv = metric_inverse(sl)
    one = jet_const(spec, 1)
    inv = [[zero_jet(spec) for _ in range(N)] for _ in range(N)]
    inv[0][N - 1] = one
    inv[N - 1][0] = one
    for i in range(n):
        for j in range(n):
            inv[i + 1][j + 1] = ginv.get(i, j)
    return inv


def ambient_christoffel(exp, table=None, inv=None, sl=None):
    """Gamma^a_{bc} of the total metric from the entry table."""
    mm = exp.mm
    n = mm.dim
    spec = mm.spec
    N = n + 2
    if sl is None:
        sl = exp.fresh_slice()
    if table is None:
        table = ambient_entry_table(exp)
    if inv is None:
        inv = ambient_inverse_table(exp, sl)
    dT = {}
    for b in range(N):
        for c in range(b, N):
            e = table[b][c]
            if e._no_content():
                continue
            for d in range(N):
                pd = ambient_partial(e, d, n)
                if not pd._no_content():
                    dT[(d, b, c)] = pd

    def d(axis, b, c):
        if b > c:
            b, c = c, b
        return dT.get((axis, b, c))

    gamma = TensorJet(N, 3, spec, sym="c3s2")
    for a in range(N):
        for b in range(N):
            for c in range(b, N):
                terms = []
                for e in range(N):
                    gae = inv[a][e]
                    if gae._no_content():
                        continue
                    parts = []
                    for t in (d(b, e, c), d(c, e, b)):
                        if t is not None:
                            parts.append(t)
                    t = d(e, b, c)
                    if t is not None:
                        parts.append(jet_neg(t))
                    if parts:
                        terms.append(jet_mul(gae, jet_sum(parts)))
                if terms:
                    gamma.set_((a, b, c), jet_scale(jet_sum(terms), Fraction(1, 2)))
    return gamma


def ambient_riemann(exp, gamma=None, table=None, sl=None):
    """Fully covariant Riemann tensor of the total metric.

    Same convention as the slice builder: R^a_{bcd} = d_c Gamma^a_{db}
    - d_d Gamma^a_{cb} + Gamma Gamma terms, then lowered with the table.
    """
    mm = exp.mm
    n = mm.dim
    spec = mm.spec
    N = n + 2
    if sl is None:
        sl = exp.fresh_slice()
    if table is None:
        table = ambient_entry_table(exp)
    if gamma is None:
        gamma = ambient_christoffel(exp, table=table, sl=sl)
    dgam = {}
    for key, jv in gamma.comps.items():
        for axis in range(N):
            pd = ambient_partial(jv, axis, n)
            if not pd._no_content():
                dgam[(axis,) + key] = pd
    up_cache = {}

    def up(a, b, c, d):
        key = (a, b, c, d)
        if key in up_cache:
            return up_cache[key]
        terms = []
        for axis, hi, lo in ((c, d, b), (d, c, b)):
            pd = dgam.get((axis, a, min(hi, lo), max(hi, lo)))
            if pd is not None:
                terms.append(pd if axis == c else jet_neg(pd))
        for e in range(N):
            g1 = gamma.get(a, c, e)
            g2 = gamma.get(e, d, b)
            if not (g1._no_content() or g2._no_content()):
                terms.append(jet_mul(g1, g2))
            g3 = gamma.get(a, d, e)
            g4 = gamma.get(e, c, b)
            if not (g3._no_content() or g4._no_content()):
                terms.append(jet_neg(jet_mul(g3, g4)))
        out = jet_sum(terms, spec=spec)
        up_cache[key] = out
        return out

    riem = TensorJet(N, 4, spec, sym="riemann4")
    for a in range(N):
        for b in range(a + 1, N):
            for c in range(N):
                for d in range(c + 1, N):
                    if (a, b) > (c, d):
                        continue
                    terms = []
                    for e in range(N):
                        gae = table[a][e]
                        if gae._no_content():
                            continue
                        ue = up(e, b, c, d)
                        if not ue._no_content():
                            terms.append(jet_mul(gae, ue))
                    if terms:
                        riem.set_((a, b, c, d), jet_sum(terms, spec=spec))
    return riem


@dataclass
class ObstructionSet:
    """Ambient curvature data plus the u-series of its normal derivatives.

    series[k-1] holds the rank-2 slice tensor obtained from k-1 covariant
    u-derivatives of the two-u-slot curvature block, still as a u-series;
    its u=0 coefficient is the k-th extended obstruction tensor.
    """

    expansion: object
    slice_mm: object
    table: list
    inverse_table: list
    gamma: TensorJet
    riemann: TensorJet
    series: list

    @property
    def kmax(self):
        return len(self.series)


def _normal_covariant_step(gamma, S, n):
    """One covariant u-derivative of a rank-4 covariant tensor, slotwise."""
    N = n + 2
    U = N - 1
    spec = S.spec
    out = TensorJet(N, 4, spec, sym=S.sym)
    for a in range(N):
        for b in range(a + 1, N):
            for c in range(N):
                for d in range(c + 1, N):
                    if (a, b) > (c, d):
                        continue
                    idx = (a, b, c, d)
                    terms = []
                    base = S.get(*idx)
                    if not base._no_content():
                        terms.append(ambient_partial(base, U, n))
                    for s in range(4):
                        for e in range(N):
                            ge = gamma.get(e, U, idx[s])
                            if ge._no_content():
                                continue
                            sub = idx[:s] + (e,) + idx[s + 1 :]
                            tv = S.get(*sub)
                            if not tv._no_content():
                                terms.append(jet_neg(jet_mul(ge, tv)))
                    if terms:
                        out.set_(idx, jet_sum(terms, spec=spec))
    return out


def obstruction_set(exp, kmax=None):
    """Assemble curvature and the first kmax levels of its u-derivative family."""
    mm = exp.mm
    n = mm.dim
    if kmax is None:
        kmax = exp.order - 1
    if kmax < 1 or exp.order < kmax + 1:
        raise BudgetError("level %d needs a solve of order >= %d" % (kmax, kmax + 1))
    sl = exp.fresh_slice()
    table = ambient_entry_table(exp)
    inv = ambient_inverse_table(exp, sl)
    gamma = ambient_christoffel(exp, table=table, inv=inv, sl=sl)
    riem = ambient_riemann(exp, gamma=gamma, table=table, sl=sl)
    N = n + 2
    U = N - 1
    series = []
    S = riem
    for level in range(1, kmax + 1):
        if level > 1:
            S = _normal_covariant_step(gamma, S, n)
        lam = TensorJet(n, 2, mm.spec, sym="s2")
        for i in range(n):
            for j in range(i, n):
                lam.set_((i, j), S.get(U, i + 1, j + 1, U))
        series.append(lam)
    return ObstructionSet(exp, sl, table, inv, gamma, riem, series)


def curvature_normal_series(os, k):
    """The level-k member of the family, as a u-series on the slice."""
    if not 1 <= k <= os.kmax:
        raise BudgetError("level %d not computed (have 1..%d)" % (k, os.kmax))
    return os.series[k - 1]


def extended_obstruction(os, k):
    """The k-th extended obstruction tensor: level-k series at u = 0."""
    return curvature_normal_series(os, k).map(lambda j: jet_u_coefficient(j, 0))


# -- residual reporting -----------------------------------------------------


def _norm_upto(jet, cut):
    norms = jet.norms_by_order()
    vals = [v for v in norms[: cut + 1] if v is not None]
    return max(vals, default=0.0)


def _tensor_norm_upto(T, cut):
    out = 0.0
    for jv in T.comps.values():
        out = max(out, _norm_upto(jv, cut))
    return out


def _pairs_norm_upto(jets, cut):
    out = 0.0
    for jv in jets:
        out = max(out, _norm_upto(jv, cut))
    return out


def recursion_check(os):
    """Residuals of the first-order system for the normal-derivative family.

    Truncation limits trust per identity: a solve of order K pins the level-k
    series through u^{K-1-k}, so each residual is measured only on the slots
    the solved data actually determines.
    """
    exp = os.expansion
    mm = exp.mm
    K = exp.order
    if K < 3:
        raise BudgetError("recursion check needs a solve of order >= 3")
    n = mm.dim
    sl = os.slice_mm
    spec = mm.spec
    gp = g_u_prime(exp.g_u)
    gpp = g_u_prime(gp)
    ginv_u = metric_inverse(sl)
    Amix = t2_mixed(sl, gp)

    def correction(lamk, i, j):
        terms = []
        for l in range(n):
            for a, b in ((i, j), (j, i)):
                f1 = Amix[l][a]
                f2 = lamk.get(b, l)
                if not (f1._no_content() or f2._no_content()):
                    terms.append(jet_mul(f1, f2))
        return jet_scale(jet_sum(terms, spec=spec), Fraction(1, 2))

    out = {}
    step = 0.0
    for k in range(1, os.kmax):
        cut = K - 2 - k
        if cut < 0:
            break
        lamk = os.series[k - 1]
        nxt = os.series[k]
        for i in range(n):
            for j in range(i, n):
                r = jet_sub(
                    jet_partial(lamk.get(i, j), "u"),
                    jet_add(nxt.get(i, j), correction(lamk, i, j)),
                )
                step = max(step, _norm_upto(r, cut))
    out["series_step"] = step

    lam1 = os.series[0]
    second = []
    inv_rate = []
    for i in range(n):
        for j in range(i, n):
            quad = jet_sum(
                [jet_mul(gp.get(i, l), Amix[l][j]) for l in range(n)], spec=spec
            )
            rhs = jet_add(jet_scale(lam1.get(i, j), 2), jet_scale(quad, Fraction(1, 2)))
            second.append(jet_sub(gpp.get(i, j), rhs))
            rate = jet_sum(
                [jet_mul(Amix[i][l], ginv_u.get(l, j)) for l in range(n)], spec=spec
            )
            inv_rate.append(jet_add(jet_partial(ginv_u.get(i, j), "u"), rate))
    out["metric_second"] = _pairs_norm_upto(second, K - 2)
    out["inverse_rate"] = _pairs_norm_upto(inv_rate, K - 1)

    phi_pp = jet_partial(jet_partial(exp.phi_u, "u"), "u")
    out["density_second"] = _norm_upto(jet_sub(phi_pp, t2_trace(sl, lam1)), K - 2)

    # u = 0 reconstruction of the second and third derivatives of the solved
    # data from the base invariants and the obstruction tensors alone.
    w = weighted_invariants(mm)
    ginv0 = metric_inverse(mm)
    Pm = [[w.p_phi.get(i, j) for j in range(n)] for i in range(n)]
    Gim = [[ginv0.get(i, j) for j in range(n)] for i in range(n)]
    om1 = extended_obstruction(os, 1)
    om2 = extended_obstruction(os, 2)
    O1m = [[om1.get(i, j) for j in range(n)] for i in range(n)]
    O2m = [[om2.get(i, j) for j in range(n)] for i in range(n)]

    PiP = mat_mul(mat_mul(Pm, Gim), Pm)
    pred2 = [
        [jet_add(jet_scale(O1m[i][j], 2), jet_scale(PiP[i][j], 2)) for j in range(n)]
        for i in range(n)
    ]
    diffs = [
        jet_sub(exp.g_deriv(2).get(i, j), pred2[i][j])
        for i in range(n)
        for j in range(i, n)
    ]
    tr1 = jet_sum(
        [jet_mul(Gim[i][j], O1m[i][j]) for i in range(n) for j in range(n)], spec=spec
    )
    diffs.append(jet_sub(exp.phi_deriv(2), tr1))
    out["second_from_data"] = _pairs_norm_upto(diffs, 0)

    Phat = mat_mul(Gim, Pm)
    OmP = mat_mul(O1m, Phat)
    term = [[jet_add(OmP[j][i], OmP[i][j]) for j in range(n)] for i in range(n)]
    P2m = [[jet_scale(Pm[i][j], 2) for j in range(n)] for i in range(n)]
    M1 = mat_mul(mat_mul(pred2, Gim), P2m)
    PGP3 = mat_mul(mat_mul(PiP, Gim), Pm)
    pred3 = [
        [
            jet_sum(
                [
                    jet_scale(O2m[i][j], 2),
                    jet_scale(term[i][j], 2),
                    jet_scale(jet_add(M1[i][j], M1[j][i]), Fraction(1, 2)),
                    jet_scale(PGP3[i][j], -4),
                ],
                spec=spec,
            )
            for j in range(n)
        ]
        for i in range(n)
    ]
    diffs3 = [
        jet_sub(exp.g_deriv(3).get(i, j), pred3[i][j])
        for i in range(n)
        for j in range(i, n)
    ]
    rate0 = mat_mul(mat_mul(Gim, P2m), Gim)
    tr_a = mat_trace(mat_mul(rate0, O1m))
    lam1p0 = [
        [jet_add(O2m[i][j], term[i][j]) for j in range(n)] for i in range(n)
    ]
    tr_b = mat_trace(mat_mul(Gim, lam1p0))
    diffs3.append(jet_sub(exp.phi_deriv(3), jet_sub(tr_b, tr_a)))
    out["third_from_data"] = _pairs_norm_upto(diffs3, 0)
    return out


def ambient_component_report(os):
    """Norms comparing curvature blocks against the slice-level expressions.

    Only the v-contraction row and the two-u-slot comparison are identities of
    every normal-form solve; the tangential and single-u rows reproduce the
    flat-family shortcuts and are reported, not asserted, in general.
    """
    exp = os.expansion
    mm = exp.mm
    n = mm.dim
    N = n + 2
    U = N - 1
    K = exp.order
    spec = mm.spec
    sl = os.slice_mm
    riem = os.riemann

    v_norm = 0.0
    for a in range(N):
        for b in range(N):
            for c in range(N):
                v_norm = max(v_norm, _norm_upto(riem.get(a, b, c, 0), K))

    rl = riemann_lowered(sl)
    tang = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    d = jet_sub(
                        riem.get(i + 1, j + 1, k + 1, l + 1), rl.get(i, j, k, l)
                    )
                    tang = max(tang, _norm_upto(d, K))

    gp = g_u_prime(exp.g_u)
    dgp = cov_deriv(sl, gp)
    mixed = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                half = jet_scale(
                    jet_sub(dgp.get(i, j, k), dgp.get(j, i, k)), Fraction(1, 2)
                )
                d = jet_sub(riem.get(i + 1, j + 1, k + 1, U), half)
                mixed = max(mixed, _norm_upto(d, K - 1))

    gpp = g_u_prime(gp)
    Amix = t2_mixed(sl, gp)
    normal = 0.0
    for i in range(n):
        for j in range(i, n):
            quad = jet_sum(
                [jet_mul(gp.get(i, l), Amix[l][j]) for l in range(n)], spec=spec
            )
            rate = jet_scale(
                jet_sub(gpp.get(i, j), jet_scale(quad, Fraction(1, 2))),
                Fraction(1, 2),
            )
            d = jet_sub(riem.get(U, i + 1, j + 1, U), rate)
            normal = max(normal, _norm_upto(d, K - 2))

    return {
        "v_contractions": v_norm,
        "tangential_minus_slice": tang,
        "mixed_minus_gradient": mixed,
        "normal_minus_second_rate": normal,
    }
