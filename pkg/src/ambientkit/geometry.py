"""Tensor calculus on a coordinate chart, with the weighted invariants of (M, g, phi, lambda).

Everything is evaluated as jets at a base point.  Curvature convention:

    R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb}
                + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}
    Ric_{bd}  = R^a_{bad}

which makes round spheres positively curved (unit S^n: Ric = (n-1) g).
Index raising and lowering is always explicit; no contraction is implied.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fields import field_to_jet, parse_field
from .jets import (
    Jet,
    JetSpec,
    SingularInputError,
    jet_add,
    jet_const,
    jet_mul,
    jet_neg,
    jet_partial,
    jet_scale,
    jet_sub,
    jet_sum,
    jet_zero,
    mat_inv,
)

_ZEROS = {}


def zero_jet(spec):
    if spec not in _ZEROS:
        _ZEROS[spec] = jet_zero(spec)
    return _ZEROS[spec]


@dataclass(frozen=True)
class Chart:
    """Coordinate names plus a topology label used by quadrature and validation."""

    coords: tuple
    kind: str = "plane"  # "plane" | "torus" | "sphere" | "product"

    @property
    def dim(self):
        return len(self.coords)


class TensorJet:
    """Indexed collection of jets with optional index symmetry.

    sym is one of:
      "none"      no symmetry
      "s2"        rank 2, symmetric
      "c3s2"      rank 3, symmetric in the last two slots (Christoffel shape)
      "a34"       rank 4, antisymmetric in the last two slots
      "riemann4"  rank 4 fully covariant Riemann symmetries

    Zero components are simply absent; get() returns a shared zero jet.
    """

    __slots__ = ("dims", "rank", "sym", "spec", "comps")

    def __init__(self, dims, rank, spec, sym="none"):
        self.dims = dims
        self.rank = rank
        self.spec = spec
        self.sym = sym
        self.comps = {}

    def _canon(self, idx):
        sym = self.sym
        if sym == "none":
            return idx, 1
        if sym == "s2":
            return tuple(sorted(idx)), 1
        if sym == "c3s2":
            k, i, j = idx
            return (k, min(i, j), max(i, j)), 1
        if sym == "a34":
            a, b, c, d = idx
            if c == d:
                return None, 0
            return ((a, b, c, d), 1) if c < d else ((a, b, d, c), -1)
        if sym == "riemann4":
            a, b, c, d = idx
            if a == b or c == d:
                return None, 0
            s = 1
            if a > b:
                a, b, s = b, a, -s
            if c > d:
                c, d, s = d, c, -s
            if (a, b) > (c, d):
                a, b, c, d = c, d, a, b
            return (a, b, c, d), s
        raise ValueError("unknown symmetry tag %r" % sym)

    def get(self, *idx):
        key, sign = self._canon(idx)
        if key is None or key not in self.comps:
            return zero_jet(self.spec)
        j = self.comps[key]
        return j if sign == 1 else jet_neg(j)

    def set_(self, idx, jetval):
        key, sign = self._canon(tuple(idx))
        if key is None:
            if not jetval._no_content():
                raise ValueError("nonzero value assigned to a symmetry-forced zero slot")
            return
        if jetval.is_zero():
            # only a full-validity zero may fall back to the shared zero on get;
            # an eroded-validity zero must be stored to keep its staircase.
            self.comps.pop(key, None)
            return
        self.comps[key] = jetval if sign == 1 else jet_neg(jetval)

    def map(self, fn):
        out = TensorJet(self.dims, self.rank, self.spec, self.sym)
        for k, v in self.comps.items():
            out.set_(k, fn(v))
        return out

    def add(self, other):
        out = TensorJet(self.dims, self.rank, self.spec, self.sym)
        keys = set(self.comps) | set(other.comps)
        for k in keys:
            out.set_(k, jet_add(self.get(*k), other.get(*k)))
        return out

    def sub(self, other):
        return self.add(other.map(jet_neg))

    def scale(self, s):
        return self.map(lambda j: jet_scale(j, s))

    def max_abs(self):
        return max((j.max_abs() for j in self.comps.values()), default=0)

    def is_zero(self):
        return all(j.is_zero() for j in self.comps.values())


@dataclass
class MetricMeasure:
    """The tuple (M, g, phi, lambda) on one chart, expanded at a base point."""

    chart: Chart
    g: TensorJet
    phi: Jet
    lam: object  # Fraction or float
    spec: JetSpec
    base: tuple
    require_spd: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self):
        return self.chart.dim

    def cached(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]


def metric_measure(chart, g_entries, phi_expr, lam, spec, base, require_spd=True):
    """Build a MetricMeasure from expression strings (or ready jets).

    g_entries maps (i, j) with i <= j to expressions; missing pairs are zero.
    base supplies one value per coordinate; float mode accepts length-batch
    arrays.
    """
    n = chart.dim
    if spec.n_vars != n:
        raise ValueError("JetSpec has %d vars for a %d-dim chart" % (spec.n_vars, n))
    g = TensorJet(n, 2, spec, sym="s2")
    for (i, j), entry in g_entries.items():
        jv = entry if isinstance(entry, Jet) else field_to_jet(entry, chart.coords, base, spec)
        g.set_((i, j), jv)
    phi = phi_expr if isinstance(phi_expr, Jet) else field_to_jet(phi_expr, chart.coords, base, spec)
    lam = Fraction(lam)
    if spec.mode == "float":
        lam = float(lam)
    mm = MetricMeasure(chart, g, phi, lam, spec, tuple(base), require_spd)
    _check_signature(mm)
    return mm


def _check_signature(mm):
    n = mm.dim
    if mm.spec.mode == "rational":
        M = [[mm.g.get(i, j).value(0) for j in range(n)] for i in range(n)]
        for k in range(1, n + 1):
            d = _fraction_det([row[:k] for row in M[:k]])
            if mm.require_spd and d <= 0:
                raise SingularInputError("metric is not positive-definite at the base point")
            if not mm.require_spd and k == n and d == 0:
                raise SingularInputError("metric is degenerate at the base point")
        return
    M = np.stack(
        [np.stack([mm.g.get(i, j).value(0) for j in range(n)], -1) for i in range(n)], -2
    )
    for k in range(1, n + 1):
        d = np.linalg.det(M[:, :k, :k])
        if mm.require_spd and np.any(d <= 0):
            raise SingularInputError("metric is not positive-definite at some base point")
    if not mm.require_spd and np.any(np.abs(np.linalg.det(M)) < 1e-12):
        raise SingularInputError("metric is degenerate at some base point")


def _fraction_det(M):
    n = len(M)
    M = [row[:] for row in M]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        inv = Fraction(1) / M[col][col]
        for r in range(col + 1, n):
            if M[r][col] != 0:
                f = M[r][col] * inv
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return det


def metric_inverse(mm):
    def build():
        n = mm.dim
        A = [[mm.g.get(i, j) for j in range(n)] for i in range(n)]
        X = mat_inv(A)
        ginv = TensorJet(n, 2, mm.spec, sym="s2")
        for i in range(n):
            for j in range(i, n):
                ginv.set_((i, j), X[i][j])
        return ginv

    return mm.cached("ginv", build)


def christoffel(mm):
    """Gamma^k_{ij} = (1/2) g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)."""

    def build():
        n = mm.dim
        ginv = metric_inverse(mm)
        dg = {}
        for i in range(n):
            for j in range(i, n):
                gij = mm.g.get(i, j)
                if gij.is_zero():
                    continue
                for l in range(n):
                    dg[(l, i, j)] = jet_partial(gij, l)
        def d(l, i, j):
            if i > j:
                i, j = j, i
            return dg.get((l, i, j))

        gamma = TensorJet(n, 3, mm.spec, sym="c3s2")
        for k in range(n):
            for i in range(n):
                for j in range(i, n):
                    terms = []
                    for l in range(n):
                        gkl = ginv.get(k, l)
                        if gkl.is_zero():
                            continue
                        parts = []
                        for t in (d(i, j, l), d(j, i, l)):
                            if t is not None:
                                parts.append(t)
                        t = d(l, i, j)
                        if t is not None:
                            parts.append(jet_neg(t))
                        if parts:
                            terms.append(jet_mul(gkl, jet_sum(parts)))
                    if terms:
                        gamma.set_((k, i, j), jet_scale(jet_sum(terms), Fraction(1, 2)))
        return gamma

    return mm.cached("christoffel", build)


def riemann(mm):
    """R^a_{bcd}, antisymmetric in (c, d)."""

    def build():
        n = mm.dim
        gam = christoffel(mm)
        dgam = {}
        for key, jv in gam.comps.items():
            for m in range(n):
                dgam[(m,) + key] = jet_partial(jv, m)

        def dg(m, a, i, j):
            if i > j:
                i, j = j, i
            return dgam.get((m, a, i, j))

        R = TensorJet(n, 4, mm.spec, sym="a34")
        for a in range(n):
            for b in range(n):
                for cc in range(n):
                    for dd in range(cc + 1, n):
                        terms = []
                        t = dg(cc, a, dd, b)
                        if t is not None:
                            terms.append(t)
                        t = dg(dd, a, cc, b)
                        if t is not None:
                            terms.append(jet_neg(t))
                        for e in range(n):
                            g1, g2 = gam.get(a, cc, e), gam.get(e, dd, b)
                            if not (g1.is_zero() or g2.is_zero()):
                                terms.append(jet_mul(g1, g2))
                            g3, g4 = gam.get(a, dd, e), gam.get(e, cc, b)
                            if not (g3.is_zero() or g4.is_zero()):
                                terms.append(jet_neg(jet_mul(g3, g4)))
                        if terms:
                            R.set_((a, b, cc, dd), jet_sum(terms))
        return R

    return mm.cached("riemann", build)


def riemann_lowered(mm):
    """R_{abcd} = g_{ae} R^e_{bcd}, with the full Riemann symmetries."""

    def build():
        n = mm.dim
        R = riemann(mm)
        low = TensorJet(n, 4, mm.spec, sym="riemann4")
        for a in range(n):
            for b in range(a + 1, n):
                for cc in range(n):
                    for dd in range(cc + 1, n):
                        if (a, b) > (cc, dd):
                            continue
                        terms = []
                        for e in range(n):
                            gae = mm.g.get(a, e)
                            Re = R.get(e, b, cc, dd)
                            if not (gae.is_zero() or Re.is_zero()):
                                terms.append(jet_mul(gae, Re))
                        if terms:
                            low.set_((a, b, cc, dd), jet_sum(terms))
        return low

    return mm.cached("riemann_lowered", build)


def ricci(mm):
    """Ric_{bd} = R^a_{bad}."""

    def build():
        n = mm.dim
        R = riemann(mm)
        ric = TensorJet(n, 2, mm.spec, sym="s2")
        for b in range(n):
            for dd in range(b, n):
                terms = [R.get(a, b, a, dd) for a in range(n)]
                terms = [t for t in terms if not t.is_zero()]
                if terms:
                    ric.set_((b, dd), jet_sum(terms))
        return ric

    return mm.cached("ricci", build)


def scalar_curvature(mm):
    return mm.cached("scalar", lambda: t2_trace(mm, ricci(mm)))


def partials(mm, f):
    return [jet_partial(f, i) for i in range(mm.dim)]


def grad_up(mm, f):
    """The gradient vector grad^i f = g^{ij} d_j f."""
    n = mm.dim
    ginv = metric_inverse(mm)
    df = partials(mm, f)
    return [
        jet_sum(
            [jet_mul(ginv.get(i, j), df[j]) for j in range(n) if not ginv.get(i, j).is_zero()],
            spec=mm.spec,
        )
        for i in range(n)
    ]


def grad_inner(mm, f, h):
    """g(grad f, grad h) = g^{ij} d_i f d_j h."""
    n = mm.dim
    ginv = metric_inverse(mm)
    df, dh = partials(mm, f), partials(mm, h)
    terms = []
    for i in range(n):
        for j in range(n):
            gij = ginv.get(i, j)
            if not gij.is_zero():
                terms.append(jet_mul(gij, jet_mul(df[i], dh[j])))
    return jet_sum(terms, spec=mm.spec)


def hessian(mm, f):
    """(Hess f)_{ij} = d_i d_j f - Gamma^k_{ij} d_k f."""
    n = mm.dim
    gam = christoffel(mm)
    df = partials(mm, f)
    H = TensorJet(n, 2, mm.spec, sym="s2")
    for i in range(n):
        for j in range(i, n):
            terms = [jet_partial(df[i], j)]
            for k in range(n):
                gk = gam.get(k, i, j)
                if not gk.is_zero():
                    terms.append(jet_neg(jet_mul(gk, df[k])))
            H.set_((i, j), jet_sum(terms))
    return H


def laplacian(mm, f):
    return t2_trace(mm, hessian(mm, f))


def weighted_laplacian(mm, f):
    """Delta_phi f = Delta f - g(grad phi, grad f)."""
    return jet_sub(laplacian(mm, f), grad_inner(mm, mm.phi, f))


def cov_deriv(mm, T):
    """Covariant derivative of a fully covariant TensorJet; new first slot is the
    derivative index: (i, a_1..a_r) -> d_i T - sum_s Gamma^l_{i a_s} T(..l..)."""
    n = mm.dim
    gam = christoffel(mm)
    out = TensorJet(n, T.rank + 1, mm.spec, sym="none")
    for idx in itertools.product(range(n), repeat=T.rank):
        base_jet = T.get(*idx)
        for i in range(n):
            terms = []
            if not base_jet.is_zero():
                terms.append(jet_partial(base_jet, i))
            for s in range(T.rank):
                for l in range(n):
                    gl = gam.get(l, i, idx[s])
                    if gl.is_zero():
                        continue
                    sub = idx[:s] + (l,) + idx[s + 1 :]
                    tv = T.get(*sub)
                    if not tv.is_zero():
                        terms.append(jet_neg(jet_mul(gl, tv)))
            if terms:
                out.set_((i,) + idx, jet_sum(terms))
    return out


# -- index gymnastics -------------------------------------------------------


def t2_trace(mm, A):
    """g^{ij} A_{ij}."""
    n = mm.dim
    ginv = metric_inverse(mm)
    terms = []
    for i in range(n):
        for j in range(n):
            gij = ginv.get(i, j)
            a = A.get(i, j)
            if not (gij.is_zero() or a.is_zero()):
                terms.append(jet_mul(gij, a))
    return jet_sum(terms, spec=mm.spec)


def t2_mixed(mm, A):
    """A^i_j = g^{ik} A_{kj}, as a nested list [i][j]."""
    n = mm.dim
    ginv = metric_inverse(mm)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            terms = []
            for k in range(n):
                gik = ginv.get(i, k)
                a = A.get(k, j)
                if not (gik.is_zero() or a.is_zero()):
                    terms.append(jet_mul(gik, a))
            row.append(jet_sum(terms, spec=mm.spec))
        out.append(row)
    return out


def t2_inner(mm, A, B):
    """<A, B> = g^{ik} g^{jl} A_{ij} B_{kl}."""
    n = mm.dim
    Am = t2_mixed(mm, A)
    Bm = t2_mixed(mm, B)
    terms = []
    for i in range(n):
        for j in range(n):
            if not (Am[i][j].is_zero() or Bm[j][i].is_zero()):
                terms.append(jet_mul(Am[i][j], Bm[j][i]))
    return jet_sum(terms, spec=mm.spec)


def t11_trace_pow(mm, A, p):
    """tr of the p-th power of the mixed form of A (e.g. tr P^3)."""
    n = mm.dim
    Am = t2_mixed(mm, A)
    M = Am
    for _ in range(p - 1):
        M = [
            [
                jet_sum([jet_mul(M[i][k], Am[k][j]) for k in range(n)], spec=mm.spec)
                for j in range(n)
            ]
            for i in range(n)
        ]
    return jet_sum([M[i][i] for i in range(n)], spec=mm.spec)


# -- weighted invariants ----------------------------------------------------


@dataclass
class WeightedInvariants:
    ric_phi: TensorJet
    r_phi: Jet
    p_phi: TensorJet
    f_phi: Jet
    y_phi: Jet


def weighted_invariants(mm):
    """Ric_phi, R_phi, P_phi, F_phi, Y_phi of (g, phi, lambda) on an n-chart."""

    def build():
        n = mm.dim
        spec = mm.spec
        lam = mm.lam
        ric = ricci(mm)
        hess = hessian(mm, mm.phi)
        ric_phi = ric.add(hess)
        R = scalar_curvature(mm)
        lap = t2_trace(mm, hess)
        gp2 = grad_inner(mm, mm.phi, mm.phi)
        two_lam_phi = jet_scale(mm.phi, 2 * lam)
        r_phi = jet_add(
            jet_sub(jet_add(R, jet_scale(lap, 2)), gp2),
            jet_sub(two_lam_phi, jet_const(spec, 2 * lam * n)),
        )
        p_phi = ric_phi.add(mm.g.scale(-lam))
        f_phi = jet_add(
            jet_sub(lap, gp2),
            jet_sub(two_lam_phi, jet_const(spec, lam * n)),
        )
        y_phi = jet_scale(jet_sub(jet_add(R, gp2), two_lam_phi), Fraction(-1, 2))
        return WeightedInvariants(ric_phi, r_phi, p_phi, f_phi, y_phi)

    return mm.cached("weighted_invariants", build)


def trace_identity_residual(mm):
    """tr_g P_phi + Y_phi - (1/2) R_phi, identically zero by construction."""
    w = weighted_invariants(mm)
    return jet_sub(jet_add(t2_trace(mm, w.p_phi), w.y_phi), jet_scale(w.r_phi, Fraction(1, 2)))


def weighted_bach(mm):
    """B_phi = delta_phi dP_phi + Rm . P_phi.

    dP_{kij} = (cov_k P)_{ij} - (cov_i P)_{kj};
    (delta_phi dP)_{ij} = g^{mk} (cov_m dP)_{kij} - g^{mk} d_m phi dP_{kij};
    (Rm . P)_{ij} = g^{ka} g^{lb} P_{ab} R_{kilj}.
    """

    def build():
        n = mm.dim
        w = weighted_invariants(mm)
        P = w.p_phi
        cp = cov_deriv(mm, P)
        dP = TensorJet(n, 3, mm.spec, sym="none")
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    dP.set_((k, i, j), jet_sub(cp.get(k, i, j), cp.get(i, k, j)))
        cdP = cov_deriv(mm, dP)
        ginv = metric_inverse(mm)
        dphi = partials(mm, mm.phi)
        Rlow = riemann_lowered(mm)
        Pup = _t2_up(mm, P)
        B = TensorJet(n, 2, mm.spec, sym="none")
        for i in range(n):
            for j in range(n):
                terms = []
                for m in range(n):
                    for k in range(n):
                        gmk = ginv.get(m, k)
                        if gmk.is_zero():
                            continue
                        t = cdP.get(m, k, i, j)
                        if not t.is_zero():
                            terms.append(jet_mul(gmk, t))
                        t2 = dP.get(k, i, j)
                        if not t2.is_zero():
                            terms.append(jet_neg(jet_mul(gmk, jet_mul(dphi[m], t2))))
                for k in range(n):
                    for l in range(n):
                        pab = Pup[k][l]
                        if pab.is_zero():
                            continue
                        r = Rlow.get(k, i, l, j)
                        if not r.is_zero():
                            terms.append(jet_mul(pab, r))
                if terms:
                    B.set_((i, j), jet_sum(terms))
        return B

    return mm.cached("weighted_bach", build)


def _t2_up(mm, A):
    """A^{ij} as a nested list."""
    n = mm.dim
    Am = t2_mixed(mm, A)
    ginv = metric_inverse(mm)
    return [
        [
            jet_sum(
                [jet_mul(Am[i][k], ginv.get(k, j)) for k in range(n) if not ginv.get(k, j).is_zero()],
                spec=mm.spec,
            )
            for j in range(n)
        ]
        for i in range(n)
    ]


def divergence_phi(mm, X_up):
    """div_phi X = cov_i X^i - X^i d_i phi for an upper-index vector (list)."""
    n = mm.dim
    gam = christoffel(mm)
    dphi = partials(mm, mm.phi)
    terms = []
    for i in range(n):
        if not X_up[i].is_zero():
            terms.append(jet_partial(X_up[i], i))
            terms.append(jet_neg(jet_mul(X_up[i], dphi[i])))
    for i in range(n):
        for l in range(n):
            gil = gam.get(i, i, l)
            if not (gil.is_zero() or X_up[l].is_zero()):
                terms.append(jet_mul(gil, X_up[l]))
    return jet_sum(terms, spec=mm.spec)


def conformal_shift(mm, omega):
    """Shift the density by omega and return (new MetricMeasure, predicted invariants).

    The predictions follow the closed-form transformation laws; callers verify
    them against weighted_invariants of the shifted data, which is the oracle.
    """
    if not isinstance(omega, Jet):
        omega = field_to_jet(omega, mm.chart.coords, mm.base, mm.spec)
    mm2 = MetricMeasure(
        mm.chart, mm.g, jet_add(mm.phi, omega), mm.lam, mm.spec, mm.base, mm.require_spd
    )
    w = weighted_invariants(mm)
    lam = mm.lam
    hess_o = hessian(mm, omega)
    lap_o = t2_trace(mm, hess_o)
    cross = grad_inner(mm, mm.phi, omega)
    norm_o = grad_inner(mm, omega, omega)
    lam_o = jet_scale(omega, 2 * lam)
    shift_scalar = jet_add(jet_neg(jet_add(jet_scale(cross, 2), norm_o)), lam_o)
    predictions = {
        "ric_phi": w.ric_phi.add(hess_o),
        "r_phi": jet_add(w.r_phi, jet_add(jet_scale(lap_o, 2), shift_scalar)),
        "f_phi": jet_add(w.f_phi, jet_add(lap_o, shift_scalar)),
        "y_phi": jet_add(
            w.y_phi,
            jet_add(
                jet_neg(jet_add(cross, jet_scale(norm_o, Fraction(1, 2)))),
                jet_scale(omega, lam),
            ),
        ),
    }
    return mm2, predictions


def measure_density(mm):
    """e^{-phi} sqrt(det g) at the base points, as a float array of batch size.

    Only the value slots are needed, so this goes through plain numpy rather
    than jet determinants; rational-mode inputs are converted.
    """
    import numpy as np

    n = mm.dim
    B = mm.spec.batch
    G = np.empty((B, n, n))
    for i in range(n):
        for j in range(n):
            v = mm.g.get(i, j).value(0)
            if mm.spec.mode == "rational":
                v = float(v)
            G[:, i, j] = v
    phi0 = mm.phi.value(0)
    if mm.spec.mode == "rational":
        phi0 = float(phi0)
    det = np.linalg.det(G)
    if np.any(det <= 0):
        raise SingularInputError("metric determinant not positive at a quadrature node")
    return np.exp(-np.asarray(phi0, dtype=float)) * np.sqrt(det)


def bianchi_residual(mm):
    """2 (delta_phi P_phi)_j - d_j R_phi, with (delta_phi T)_j = g^{ik} cov_i T_{kj} - T_{kj} g^{kl} d_l phi.

    Grouping the lambda*g part of Ric_phi into P_phi makes the identity hold
    for every lambda, not only lambda = 0.
    """
    n = mm.dim
    w = weighted_invariants(mm)
    P = w.p_phi
    cp = cov_deriv(mm, P)
    ginv = metric_inverse(mm)
    gphi = grad_up(mm, mm.phi)
    out = TensorJet(n, 1, mm.spec, sym="none")
    dR = partials(mm, w.r_phi)
    for j in range(n):
        terms = []
        for i in range(n):
            for k in range(n):
                gik = ginv.get(i, k)
                t = cp.get(i, k, j)
                if not (gik.is_zero() or t.is_zero()):
                    terms.append(jet_scale(jet_mul(gik, t), 2))
        for k in range(n):
            pkj = P.get(k, j)
            if not (pkj.is_zero() or gphi[k].is_zero()):
                terms.append(jet_scale(jet_mul(pkj, gphi[k]), -2))
        terms.append(jet_neg(dR[j]))
        out.set_((j,), jet_sum(terms))
    return out
