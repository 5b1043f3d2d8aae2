"""Truncated multivariate power series in spatial variables plus one series variable u.

A Jet stores the Taylor coefficients of a function of (x^1..x^n, u) at a base
point, truncated to a spatial total degree cap and a u-order cap.  The two caps
are independent: the ambient expansion is a u-series whose coefficients are
x-jets, and solving to u-order K eats up to 2 spatial derivative orders per
step, so callers budget spatial_degree >= 2*K + 2.

Coefficients are exact Fractions ("rational" mode) or float64 ("float" mode).
Float mode is batched: every coefficient is a vector over a batch of base
points, so one Jet carries a whole quadrature grid.

Each Jet tracks, per u-order, how many spatial degrees are still trustworthy
("validity").  Spatial differentiation lowers validity by one; products take
the worst of their factors.  Reading a coefficient past the validity is a
BudgetError, never a silent zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse as _sparse


class JetError(Exception):
    pass


class SpecMismatchError(JetError):
    pass


class BudgetError(JetError):
    """A coefficient past the tracked validity (or past the caps) was requested."""


class SingularInputError(JetError):
    pass


class DomainError(JetError):
    pass


@dataclass(frozen=True)
class JetSpec:
    n_vars: int
    spatial_degree: int
    u_order: int
    mode: str = "rational"  # "rational" | "float"
    batch: int = 1

    def __post_init__(self):
        if self.n_vars < 1 or self.spatial_degree < 0 or self.u_order < 0:
            raise ValueError("bad JetSpec caps")
        if self.mode not in ("rational", "float"):
            raise ValueError("mode must be 'rational' or 'float'")
        if self.mode == "rational" and self.batch != 1:
            raise ValueError("rational mode is unbatched")


@lru_cache(maxsize=None)
def monomials(n_vars, degree):
    """All exponent tuples with total degree <= degree, graded order.

    The listing for a smaller degree is a prefix of the listing for a larger
    one; float rows rely on that to truncate by slicing.
    """
    out = []
    for d in range(degree + 1):
        level = []

        def rec(prefix, remaining, slots):
            if slots == 1:
                level.append(prefix + (remaining,))
                return
            for e in range(remaining + 1):
                rec(prefix + (e,), remaining - e, slots - 1)

        rec((), d, n_vars)
        level.sort()
        out.extend(level)
    return tuple(out)


@lru_cache(maxsize=None)
def mono_count(n_vars, degree):
    return len(monomials(n_vars, degree))


@lru_cache(maxsize=None)
def mono_index(n_vars, degree):
    return {m: i for i, m in enumerate(monomials(n_vars, degree))}


@lru_cache(maxsize=None)
def _mul_table(n_vars, wa, wb, wout):
    """Index triple for truncated products: (ia, ib, S) with out = S @ (a[ia]*b[ib])."""
    ma = monomials(n_vars, wa)
    mb = monomials(n_vars, wb)
    idx = mono_index(n_vars, wout)
    ia, ib, io = [], [], []
    for p, alpha in enumerate(ma):
        da = sum(alpha)
        if da > wout:
            break
        for q, beta in enumerate(mb):
            if da + sum(beta) > wout:
                break
            gamma = tuple(x + y for x, y in zip(alpha, beta))
            ia.append(p)
            ib.append(q)
            io.append(idx[gamma])
    nnz = len(ia)
    S = _sparse.csr_matrix(
        (np.ones(nnz), (np.asarray(io), np.arange(nnz))),
        shape=(mono_count(n_vars, wout), nnz),
    )
    return np.asarray(ia), np.asarray(ib), S


@lru_cache(maxsize=None)
def _deriv_table(n_vars, w, var):
    """For each mono of degree <= w-1, the source index of mono+e_var and the factor."""
    tgt = monomials(n_vars, w - 1) if w >= 1 else ()
    idx = mono_index(n_vars, w)
    src = np.asarray([idx[m[:var] + (m[var] + 1,) + m[var + 1 :]] for m in tgt], dtype=int)
    mult = np.asarray([m[var] + 1 for m in tgt], dtype=float)
    return src, mult


class Jet:
    """Immutable truncated series.  Do not mutate coeffs/rows after creation."""

    __slots__ = ("spec", "valid", "coeffs", "rows")

    def __init__(self, spec, valid, coeffs=None, rows=None):
        self.spec = spec
        self.valid = tuple(min(v, spec.spatial_degree) for v in valid)
        if len(self.valid) != spec.u_order + 1:
            raise ValueError("validity length mismatch")
        if spec.mode == "rational":
            clean = {}
            for (k, mono), c in (coeffs or {}).items():
                if c != 0 and sum(mono) <= self.valid[k]:
                    clean[(k, mono)] = c
            self.coeffs = clean
            self.rows = None
        else:
            rs = list(rows) if rows is not None else [None] * (spec.u_order + 1)
            for k, r in enumerate(rs):
                if r is not None:
                    want = (spec.batch, mono_count(spec.n_vars, self.valid[k]))
                    if self.valid[k] < 0 or r.shape != want:
                        raise ValueError("row shape mismatch at u-order %d" % k)
            self.coeffs = None
            self.rows = rs

    # -- inspection ---------------------------------------------------------

    def is_zero(self):
        """Known zero to the caps: no stored content AND full validity.

        A jet with empty content but eroded validity is unknown past the
        validity staircase, not zero; treating it as zero would let skip
        paths fabricate coefficients.
        """
        if any(v != self.spec.spatial_degree for v in self.valid):
            return False
        return self._no_content()

    def _no_content(self):
        if self.spec.mode == "rational":
            return not self.coeffs
        return all(r is None or not r.any() for r in self.rows)

    def _slot_empty(self, k):
        """No stored content at u-order k (the row is zero as far as it is valid)."""
        if self.spec.mode == "rational":
            return not any(kk == k for (kk, _) in self.coeffs)
        r = self.rows[k]
        return r is None or not r.any()

    def max_abs(self):
        if self.spec.mode == "rational":
            return max((abs(c) for c in self.coeffs.values()), default=Fraction(0))
        m = 0.0
        for r in self.rows:
            if r is not None and r.size:
                m = max(m, float(np.max(np.abs(r))))
        return m

    def coeff(self, k, mono):
        """Coefficient of x^mono * u^k.  BudgetError past validity or caps."""
        spec = self.spec
        mono = tuple(mono)
        if k > spec.u_order or sum(mono) > spec.spatial_degree:
            raise BudgetError("requested index (%s, u^%d) exceeds jet caps" % (mono, k))
        if sum(mono) > self.valid[k]:
            raise BudgetError(
                "coefficient (%s, u^%d) past validity %d" % (mono, k, self.valid[k])
            )
        if spec.mode == "rational":
            return self.coeffs.get((k, mono), Fraction(0))
        r = self.rows[k]
        if r is None:
            return np.zeros(spec.batch)
        return r[:, mono_index(spec.n_vars, self.valid[k])[mono]].copy()

    def value(self, k=0):
        """Constant spatial term of the u^k coefficient (the value at the base point)."""
        return self.coeff(k, (0,) * self.spec.n_vars)

    def norms_by_order(self):
        """Max |coefficient| per u-order, as floats; None where nothing is valid."""
        out = []
        for k in range(self.spec.u_order + 1):
            if self.valid[k] < 0:
                out.append(None)
                continue
            if self.spec.mode == "rational":
                vals = [abs(c) for (kk, _), c in self.coeffs.items() if kk == k]
                out.append(float(max(vals, default=0)))
            else:
                r = self.rows[k]
                out.append(0.0 if r is None or not r.size else float(np.max(np.abs(r))))
        return out


def _check_specs(a, b):
    if a.spec != b.spec:
        raise SpecMismatchError("jets have different JetSpecs")


def jet_const(spec, value):
    zero_mono = (0,) * spec.n_vars
    full = (spec.spatial_degree,) * (spec.u_order + 1)
    if spec.mode == "rational":
        c = Fraction(value)
        return Jet(spec, full, coeffs={(0, zero_mono): c} if c else {})
    arr = np.broadcast_to(np.asarray(value, dtype=float), (spec.batch,))
    rows = [None] * (spec.u_order + 1)
    if arr.any():
        r = np.zeros((spec.batch, mono_count(spec.n_vars, spec.spatial_degree)))
        r[:, 0] = arr
        rows[0] = r
    return Jet(spec, full, rows=rows)


def jet_zero(spec):
    return jet_const(spec, 0)


def jet_coordinate(spec, var, base=0):
    """The jet of the coordinate function x^var about the base value."""
    if not 0 <= var < spec.n_vars:
        raise ValueError("no spatial variable %r" % (var,))
    mono = tuple(1 if i == var else 0 for i in range(spec.n_vars))
    full = (spec.spatial_degree,) * (spec.u_order + 1)
    if spec.spatial_degree < 1:
        raise BudgetError("spatial degree cap too small for a coordinate jet")
    if spec.mode == "rational":
        coeffs = {(0, mono): Fraction(1)}
        b = Fraction(base)
        if b:
            coeffs[(0, (0,) * spec.n_vars)] = b
        return Jet(spec, full, coeffs=coeffs)
    r = np.zeros((spec.batch, mono_count(spec.n_vars, spec.spatial_degree)))
    r[:, 0] = np.broadcast_to(np.asarray(base, dtype=float), (spec.batch,))
    r[:, mono_index(spec.n_vars, spec.spatial_degree)[mono]] = 1.0
    rows = [r] + [None] * spec.u_order
    return Jet(spec, full, rows=rows)


def jet_u_power(spec, m):
    """The jet of u^m (exact monomial, full validity)."""
    if m > spec.u_order:
        raise BudgetError("u^%d exceeds the u-order cap" % m)
    full = (spec.spatial_degree,) * (spec.u_order + 1)
    zero_mono = (0,) * spec.n_vars
    if spec.mode == "rational":
        return Jet(spec, full, coeffs={(m, zero_mono): Fraction(1)})
    rows = [None] * (spec.u_order + 1)
    r = np.zeros((spec.batch, mono_count(spec.n_vars, spec.spatial_degree)))
    r[:, 0] = 1.0
    rows[m] = r
    return Jet(spec, full, rows=rows)


def jet_add(a, b):
    _check_specs(a, b)
    spec = a.spec
    valid = tuple(min(x, y) for x, y in zip(a.valid, b.valid))
    if spec.mode == "rational":
        out = {}
        for (k, mono), c in a.coeffs.items():
            if sum(mono) <= valid[k]:
                out[(k, mono)] = c
        for (k, mono), c in b.coeffs.items():
            if sum(mono) <= valid[k]:
                out[(k, mono)] = out.get((k, mono), Fraction(0)) + c
        return Jet(spec, valid, coeffs=out)
    rows = []
    for k in range(spec.u_order + 1):
        w = valid[k]
        if w < 0:
            rows.append(None)
            continue
        m = mono_count(spec.n_vars, w)
        ra, rb = a.rows[k], b.rows[k]
        if ra is None and rb is None:
            rows.append(None)
        elif ra is None:
            rows.append(rb[:, :m].copy())
        elif rb is None:
            rows.append(ra[:, :m].copy())
        else:
            rows.append(ra[:, :m] + rb[:, :m])
    return Jet(spec, valid, rows=rows)


def jet_scale(a, s):
    spec = a.spec
    if spec.mode == "rational":
        s = Fraction(s)
        return Jet(spec, a.valid, coeffs={k: c * s for k, c in a.coeffs.items()})
    s = np.asarray(s, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    rows = [None if r is None else r * s for r in a.rows]
    return Jet(spec, a.valid, rows=rows)


def jet_neg(a):
    return jet_scale(a, -1)


def jet_sub(a, b):
    return jet_add(a, jet_neg(b))


def jet_mul(a, b):
    _check_specs(a, b)
    spec = a.spec
    K = spec.u_order
    # Validity per u-order: a pair whose a-side (or b-side) row has no content
    # is known zero as far as that side is valid, whatever the other side, so
    # it constrains the product only by the empty side's validity.  Without
    # this, multiplying by u^m would erode every order through the zero slots.
    za = [a._slot_empty(k) for k in range(K + 1)]
    zb = [b._slot_empty(k) for k in range(K + 1)]
    valid = []
    for k in range(K + 1):
        v = spec.spatial_degree
        for i in range(k + 1):
            j = k - i
            if za[i] and zb[j]:
                pv = max(a.valid[i], b.valid[j])
            elif za[i]:
                pv = a.valid[i]
            elif zb[j]:
                pv = b.valid[j]
            else:
                pv = min(a.valid[i], b.valid[j])
            v = min(v, pv)
        valid.append(v)
    if spec.mode == "rational":
        out = {}
        items_b = list(b.coeffs.items())
        for (i, alpha), ca in a.coeffs.items():
            da = sum(alpha)
            for (j, beta), cb in items_b:
                k = i + j
                if k > K:
                    continue
                if da + sum(beta) > valid[k]:
                    continue
                gamma = tuple(x + y for x, y in zip(alpha, beta))
                key = (k, gamma)
                out[key] = out.get(key, Fraction(0)) + ca * cb
        return Jet(spec, valid, coeffs=out)
    rows = [None] * (K + 1)
    for k in range(K + 1):
        w = valid[k]
        if w < 0:
            continue
        acc = None
        for i in range(k + 1):
            ra, rb = a.rows[i], b.rows[k - i]
            if ra is None or rb is None:
                continue
            wa = min(a.valid[i], w)
            wb = min(b.valid[k - i], w)
            ia, ib, S = _mul_table(spec.n_vars, wa, wb, w)
            na, nb = mono_count(spec.n_vars, wa), mono_count(spec.n_vars, wb)
            prod = ra[:, :na][:, ia] * rb[:, :nb][:, ib]
            term = (S @ prod.T).T
            acc = term if acc is None else acc + term
        if acc is not None:
            rows[k] = np.ascontiguousarray(acc)
    return Jet(spec, valid, rows=rows)


def jet_partial(a, var):
    """Formal partial derivative.  var is a spatial index 0..n-1 or the string "u"."""
    spec = a.spec
    K = spec.u_order
    if var == "u":
        valid = tuple(a.valid[k + 1] for k in range(K)) + (-1,)
        if spec.mode == "rational":
            out = {}
            for (k, mono), c in a.coeffs.items():
                if k >= 1:
                    out[(k - 1, mono)] = c * k
            return Jet(spec, valid, coeffs=out)
        rows = [None if a.rows[k + 1] is None else a.rows[k + 1] * (k + 1) for k in range(K)]
        rows.append(None)
        return Jet(spec, valid, rows=rows)
    if not 0 <= var < spec.n_vars:
        raise ValueError("no variable %r" % (var,))
    valid = tuple(max(v - 1, -1) for v in a.valid)
    if spec.mode == "rational":
        out = {}
        for (k, mono), c in a.coeffs.items():
            e = mono[var]
            if e >= 1:
                tgt = mono[:var] + (e - 1,) + mono[var + 1 :]
                out[(k, tgt)] = c * e
        return Jet(spec, valid, coeffs=out)
    rows = []
    for k in range(K + 1):
        w = a.valid[k]
        if w < 1 or a.rows[k] is None:
            rows.append(None)
            continue
        src, mult = _deriv_table(spec.n_vars, w, var)
        rows.append(a.rows[k][:, src] * mult)
    return Jet(spec, valid, rows=rows)


def jet_integrate_u(a):
    """u-antiderivative with zero constant term; the top u-order of a is dropped."""
    spec = a.spec
    K = spec.u_order
    valid = (spec.spatial_degree,) + tuple(a.valid[k - 1] for k in range(1, K + 1))
    if spec.mode == "rational":
        out = {}
        for (k, mono), c in a.coeffs.items():
            if k + 1 <= K:
                out[(k + 1, mono)] = c / (k + 1)
        return Jet(spec, valid, coeffs=out)
    rows = [None]
    for k in range(1, K + 1):
        r = a.rows[k - 1]
        rows.append(None if r is None else r / k)
    return Jet(spec, valid, rows=rows)


def jet_u_coefficient(a, k):
    """The u^k coefficient as a u-constant jet (validity copied to every u-order)."""
    spec = a.spec
    if k > spec.u_order:
        raise BudgetError("u-order %d exceeds the cap" % k)
    v = a.valid[k]
    valid = (v,) * (spec.u_order + 1)
    if v < 0:
        raise BudgetError("u-order %d has no valid coefficients" % k)
    if spec.mode == "rational":
        out = {(0, mono): c for (kk, mono), c in a.coeffs.items() if kk == k}
        return Jet(spec, valid, coeffs=out)
    rows = [None] * (spec.u_order + 1)
    if a.rows[k] is not None:
        rows[0] = a.rows[k].copy()
    return Jet(spec, valid, rows=rows)


def jet_eval_u(a, u0):
    """Substitute the scalar u = u0 (exact in rational mode), keeping x-dependence."""
    spec = a.spec
    v = min(x for x in a.valid)
    valid = (v,) * (spec.u_order + 1)
    if v < 0:
        raise BudgetError("cannot evaluate in u: some u-order has no valid data")
    if spec.mode == "rational":
        u0 = Fraction(u0)
        out = {}
        for (k, mono), c in a.coeffs.items():
            if sum(mono) <= v:
                key = (0, mono)
                out[key] = out.get(key, Fraction(0)) + c * u0**k
        return Jet(spec, valid, coeffs=out)
    m = mono_count(spec.n_vars, v)
    acc = np.zeros((spec.batch, m))
    for k in range(spec.u_order + 1):
        if a.rows[k] is not None:
            acc = acc + a.rows[k][:, :m] * float(u0) ** k
    rows = [None] * (spec.u_order + 1)
    rows[0] = acc
    return Jet(spec, valid, rows=rows)


def _newton_iterations(spec):
    # error order doubles per step; total filtration order to clear is D + K
    t = spec.spatial_degree + spec.u_order + 1
    return max(1, math.ceil(math.log2(t))) + 1


def jet_invert(a):
    spec = a.spec
    a0 = a.value(0)
    if spec.mode == "rational":
        if a0 == 0:
            raise SingularInputError("constant term is zero; jet not invertible")
        x = jet_const(spec, Fraction(1) / a0)
    else:
        if np.any(a0 == 0.0):
            raise SingularInputError("constant term is zero somewhere in the batch")
        x = jet_const(spec, 1.0 / a0)
    two = jet_const(spec, 2)
    for _ in range(_newton_iterations(spec)):
        x = jet_mul(x, jet_sub(two, jet_mul(a, x)))
    return x


def jet_div(a, b):
    return jet_mul(a, jet_invert(b))


def jet_int_pow(a, r):
    """a**r for integer r, by binary exponentiation (negative r via inversion)."""
    r = int(r)
    if r < 0:
        return jet_int_pow(jet_invert(a), -r)
    result = jet_const(a.spec, 1)
    base = a
    while r:
        if r & 1:
            result = jet_mul(result, base)
        base = jet_mul(base, base) if r > 1 else base
        r >>= 1
    return result


def _binomial(r, j):
    # r may be a Fraction; ordinary falling-factorial binomial
    num = Fraction(1)
    for i in range(j):
        num *= r - i
    return num / math.factorial(j)


def _series_coeffs(fn, a0, count, spec, r=None):
    """Taylor coefficients of fn about a0, as Fractions or (batch,) float arrays."""
    if spec.mode == "rational":
        if fn == "exp":
            if a0 != 0:
                raise DomainError("exact exp needs a zero constant term")
            return [Fraction(1, math.factorial(j)) for j in range(count)]
        if fn == "log":
            if a0 <= 0:
                raise DomainError("log needs a positive constant term")
            if a0 != 1:
                raise DomainError("exact log needs constant term 1")
            return [Fraction(0)] + [Fraction((-1) ** (j + 1), j) for j in range(1, count)]
        if fn == "sqrt":
            s = _exact_sqrt(a0)
            return [s * _binomial(Fraction(1, 2), j) / a0**j for j in range(count)]
        if fn == "pow":
            rr = Fraction(r)
            if rr.denominator == 1:
                p = a0**rr.numerator
            elif a0 == 1:
                p = Fraction(1)
            elif rr.denominator == 2:
                p = _exact_sqrt(a0) ** rr.numerator
            else:
                raise DomainError("exact pow supports integer and half-integer exponents")
            return [p * _binomial(rr, j) / a0**j for j in range(count)]
        if fn == "sin":
            if a0 != 0:
                raise DomainError("exact sin needs a zero constant term")
            return [
                Fraction((-1) ** (j // 2), math.factorial(j)) if j % 2 == 1 else Fraction(0)
                for j in range(count)
            ]
        if fn == "cos":
            if a0 != 0:
                raise DomainError("exact cos needs a zero constant term")
            return [
                Fraction((-1) ** (j // 2), math.factorial(j)) if j % 2 == 0 else Fraction(0)
                for j in range(count)
            ]
        raise ValueError("unknown analytic function %r" % fn)
    a0 = np.asarray(a0, dtype=float)
    if fn == "exp":
        e = np.exp(a0)
        return [e / math.factorial(j) for j in range(count)]
    if fn == "log":
        if np.any(a0 <= 0):
            raise DomainError("log needs a positive constant term")
        out = [np.log(a0)]
        for j in range(1, count):
            out.append((-1) ** (j + 1) / (j * a0**j))
        return out
    if fn == "sqrt":
        if np.any(a0 <= 0):
            raise DomainError("sqrt needs a positive constant term")
        s = np.sqrt(a0)
        return [s * float(_binomial(Fraction(1, 2), j)) / a0**j for j in range(count)]
    if fn == "pow":
        if np.any(a0 <= 0):
            raise DomainError("pow needs a positive constant term")
        p = a0 ** float(r)
        return [p * float(_binomial(Fraction(r), j)) / a0**j for j in range(count)]
    if fn == "sin":
        s, c = np.sin(a0), np.cos(a0)
        return [(s, c, s, c)[j % 4] * (1, 1, -1, -1)[j % 4] / math.factorial(j) for j in range(count)]
    if fn == "cos":
        s, c = np.sin(a0), np.cos(a0)
        return [(c, s, c, s)[j % 4] * (1, -1, -1, 1)[j % 4] / math.factorial(j) for j in range(count)]
    raise ValueError("unknown analytic function %r" % fn)


def _exact_sqrt(q):
    q = Fraction(q)
    if q <= 0:
        raise DomainError("sqrt needs a positive constant term")
    pn, pd = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if pn * pn != q.numerator or pd * pd != q.denominator:
        raise DomainError("exact sqrt needs a perfect-square constant term, got %s" % q)
    return Fraction(pn, pd)


def jet_compose_univariate(a, coeffs):
    """sum_j coeffs[j] * (a - a0)^j by Horner; coeffs[0] replaces the constant term."""
    spec = a.spec
    b = jet_sub(a, jet_const(spec, a.value(0)))
    result = jet_const(spec, coeffs[-1])
    for c in reversed(coeffs[:-1]):
        result = jet_add(jet_mul(result, b), jet_const(spec, c))
    return result


def jet_analytic(a, fn, r=None):
    """exp, log, sqrt or pow(r) of a jet, as composition with the univariate Taylor series."""
    spec = a.spec
    if fn == "pow":
        if r is None:
            raise ValueError("pow needs the exponent r")
        r = Fraction(r)
        if r.denominator == 1:
            return jet_int_pow(a, int(r))
    count = spec.spatial_degree + spec.u_order + 1
    coeffs = _series_coeffs(fn, a.value(0), count, spec, r=r)
    return jet_compose_univariate(a, coeffs)


def jet_sin(a):
    count = a.spec.spatial_degree + a.spec.u_order + 1
    return jet_compose_univariate(a, _series_coeffs("sin", a.value(0), count, a.spec))


def jet_cos(a):
    count = a.spec.spatial_degree + a.spec.u_order + 1
    return jet_compose_univariate(a, _series_coeffs("cos", a.value(0), count, a.spec))


# -- jet matrices -----------------------------------------------------------


def mat_mul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    return [
        [
            _sum_jets([jet_mul(A[i][k], B[k][j]) for k in range(m)])
            for j in range(p)
        ]
        for i in range(n)
    ]


def jet_sum(js, spec=None):
    js = list(js)
    if not js:
        if spec is None:
            raise ValueError("empty sum needs a spec")
        return jet_zero(spec)
    acc = js[0]
    for j in js[1:]:
        acc = jet_add(acc, j)
    return acc


_sum_jets = jet_sum


def mat_identity(spec, n):
    one, zero = jet_const(spec, 1), jet_zero(spec)
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


def mat_trace(A):
    return _sum_jets([A[i][i] for i in range(len(A))])


def _const_matrix(A):
    n = len(A)
    spec = A[0][0].spec
    if spec.mode == "rational":
        return [[A[i][j].value(0) for j in range(n)] for i in range(n)]
    return np.stack([np.stack([A[i][j].value(0) for j in range(n)], -1) for i in range(n)], -2)


def mat_inv(A):
    """Inverse of a jet matrix by Newton iteration from the inverted constant part."""
    n = len(A)
    spec = A[0][0].spec
    A0 = _const_matrix(A)
    if spec.mode == "rational":
        X0 = _exact_matrix_inverse(A0)
        X = [[jet_const(spec, X0[i][j]) for j in range(n)] for i in range(n)]
    else:
        X0 = np.linalg.inv(A0)  # (batch, n, n)
        X = [[jet_const(spec, X0[:, i, j]) for j in range(n)] for i in range(n)]
    two_I = [[jet_const(spec, 2 if i == j else 0) for j in range(n)] for i in range(n)]
    for _ in range(_newton_iterations(spec)):
        AX = mat_mul(A, X)
        corr = [[jet_sub(two_I[i][j], AX[i][j]) for j in range(n)] for i in range(n)]
        X = mat_mul(X, corr)
    return X


def _exact_matrix_inverse(M):
    n = len(M)
    aug = [[Fraction(M[i][j]) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise SingularInputError("matrix constant part is singular")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def mat_det(A):
    """Determinant by LU elimination with jet pivots; needs invertible leading minors."""
    n = len(A)
    M = [row[:] for row in A]
    det = jet_const(A[0][0].spec, 1)
    for col in range(n):
        piv = M[col][col]
        det = jet_mul(det, piv)
        piv_inv = jet_invert(piv)
        for r in range(col + 1, n):
            f = jet_mul(M[r][col], piv_inv)
            for c in range(col + 1, n):
                M[r][c] = jet_sub(M[r][c], jet_mul(f, M[col][c]))
    return det
