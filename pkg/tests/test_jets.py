"""Unit and property tests for the jet arithmetic layer."""

from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from ambientkit.jets import (
    BudgetError,
    DomainError,
    Jet,
    JetSpec,
    SingularInputError,
    SpecMismatchError,
    jet_add,
    jet_analytic,
    jet_const,
    jet_coordinate,
    jet_cos,
    jet_eval_u,
    jet_int_pow,
    jet_integrate_u,
    jet_invert,
    jet_mul,
    jet_partial,
    jet_sin,
    jet_sub,
    jet_u_coefficient,
    jet_u_power,
    jet_zero,
    mat_det,
    mat_inv,
    mat_mul,
    mat_trace,
    mat_identity,
    monomials,
)

SPEC2 = JetSpec(n_vars=2, spatial_degree=4, u_order=3, mode="rational")


def frac(p, q=1):
    return Fraction(p, q)


def c(j, k, mono):
    return j.coeff(k, mono)


# -- frozen examples --------------------------------------------------------


def test_add_cancellation():
    spec = JetSpec(1, 3, 0)
    one_plus_x = jet_add(jet_const(spec, 1), jet_coordinate(spec, 0))
    one_minus_x = jet_sub(jet_const(spec, 1), jet_coordinate(spec, 0))
    s = jet_add(one_plus_x, one_minus_x)
    assert c(s, 0, (0,)) == 2
    assert c(s, 0, (1,)) == 0


def test_add_identity_and_u():
    spec = JetSpec(1, 3, 2)
    x = jet_coordinate(spec, 0)
    u = jet_u_power(spec, 1)
    assert jet_sub(jet_add(x, jet_zero(spec)), x).max_abs() == 0
    s = jet_add(jet_add(x, u), jet_sub(x, u))
    assert c(s, 0, (1,)) == 2
    assert c(s, 1, (0,)) == 0


def test_mul_difference_of_squares():
    spec = JetSpec(1, 2, 0)
    a = jet_add(jet_const(spec, 1), jet_coordinate(spec, 0))
    b = jet_sub(jet_const(spec, 1), jet_coordinate(spec, 0))
    p = jet_mul(a, b)
    assert c(p, 0, (0,)) == 1
    assert c(p, 0, (1,)) == 0
    assert c(p, 0, (2,)) == -1


def test_mul_truncates_u():
    spec = JetSpec(1, 0, 1)
    a = jet_add(jet_const(spec, 1), jet_u_power(spec, 1))
    p = jet_mul(a, a)
    assert c(p, 0, (0,)) == 1
    assert c(p, 1, (0,)) == 2  # u^2 dropped by the cap


def test_partial_spatial():
    spec = JetSpec(2, 4, 0)
    x, y = jet_coordinate(spec, 0), jet_coordinate(spec, 1)
    f = jet_mul(jet_mul(x, x), y)
    d = jet_partial(f, 0)
    assert c(d, 0, (1, 1)) == 2
    assert c(d, 0, (2, 0)) == 0


def test_partial_u():
    spec = JetSpec(1, 2, 2)
    u = jet_u_power(spec, 1)
    f = jet_add(jet_const(spec, 1), jet_add(jet_const(spec, 3), jet_u_power(spec, 1)))
    f = jet_add(jet_const(spec, 1), jet_add(jet_mul(jet_const(spec, 3), u), jet_mul(u, u)))
    d = jet_partial(f, "u")
    assert c(d, 0, (0,)) == 3
    assert c(d, 1, (0,)) == 2


def test_invert_geometric_series_in_u():
    spec = JetSpec(1, 0, 3)
    a = jet_sub(jet_const(spec, 1), jet_u_power(spec, 1))
    b = jet_invert(a)
    assert [c(b, k, (0,)) for k in range(4)] == [1, 1, 1, 1]


def test_invert_constant_and_spatial():
    spec = JetSpec(1, 2, 0)
    assert c(jet_invert(jet_const(spec, 2)), 0, (0,)) == frac(1, 2)
    b = jet_invert(jet_add(jet_const(spec, 1), jet_coordinate(spec, 0)))
    assert [c(b, 0, (d,)) for d in range(3)] == [1, -1, 1]


def test_invert_singular():
    spec = JetSpec(1, 2, 0)
    with pytest.raises(SingularInputError):
        jet_invert(jet_coordinate(spec, 0))


def test_log_series_in_u():
    spec = JetSpec(1, 0, 3)
    a = jet_add(jet_const(spec, 1), jet_u_power(spec, 1))
    b = jet_analytic(a, "log")
    assert [c(b, k, (0,)) for k in range(4)] == [0, 1, frac(-1, 2), frac(1, 3)]


def test_sqrt_of_one():
    spec = JetSpec(1, 2, 0)
    assert c(jet_analytic(jet_const(spec, 1), "sqrt"), 0, (0,)) == 1


def test_sin_jet():
    spec = JetSpec(1, 3, 0)
    s = jet_sin(jet_coordinate(spec, 0))
    assert c(s, 0, (1,)) == 1
    assert c(s, 0, (3,)) == frac(-1, 6)
    assert c(s, 0, (2,)) == 0


def test_exp_log_roundtrip_float():
    spec = JetSpec(2, 4, 2, mode="float", batch=3)
    rng = np.random.default_rng(0)
    a = _random_float_jet(spec, rng, positive=True)
    b = jet_analytic(jet_analytic(a, "log"), "exp")
    assert jet_sub(a, b).max_abs() < 1e-10


def test_spec_mismatch():
    with pytest.raises(SpecMismatchError):
        jet_add(jet_const(JetSpec(1, 2, 0), 1), jet_const(JetSpec(1, 3, 0), 1))


# -- validity bookkeeping ---------------------------------------------------


def test_partial_erodes_validity():
    spec = JetSpec(1, 3, 0)
    f = jet_coordinate(spec, 0)
    d = jet_partial(f, 0)
    assert d.valid[0] == 2
    with pytest.raises(BudgetError):
        d.coeff(0, (3,))


def test_budget_error_not_silent_zero():
    spec = JetSpec(1, 4, 0)
    f = jet_analytic(jet_add(jet_const(spec, 1), jet_coordinate(spec, 0)), "log")
    g = f
    for _ in range(5):
        g = jet_partial(g, 0)
    with pytest.raises(BudgetError):
        g.coeff(0, (0,))


def test_mul_validity_is_min():
    spec = JetSpec(1, 4, 0)
    a = jet_partial(jet_coordinate(spec, 0), 0)  # validity 3
    b = jet_coordinate(spec, 0)  # validity 4
    assert jet_mul(a, b).valid[0] == 3


def test_u_coefficient_and_eval():
    spec = JetSpec(1, 2, 3)
    x = jet_coordinate(spec, 0)
    f = jet_add(x, jet_mul(jet_u_power(spec, 2), jet_const(spec, 5)))
    f2 = jet_u_coefficient(f, 2)
    assert c(f2, 0, (0,)) == 5
    at_half = jet_eval_u(f, frac(1, 2))
    assert c(at_half, 0, (0,)) == frac(5, 4)
    assert c(at_half, 0, (1,)) == 1


def test_integrate_u_inverts_partial():
    spec = JetSpec(1, 2, 3)
    f = jet_add(jet_u_power(spec, 1), jet_mul(jet_u_power(spec, 2), jet_const(spec, 3)))
    g = jet_partial(jet_integrate_u(f), "u")
    for k in range(3):
        assert c(g, k, (0,)) == c(f, k, (0,))


# -- property tests ---------------------------------------------------------


def _random_rational_jet(draw, spec):
    monos = monomials(spec.n_vars, spec.spatial_degree)
    n_terms = draw(st.integers(0, 6))
    coeffs = {}
    for _ in range(n_terms):
        k = draw(st.integers(0, spec.u_order))
        mono = monos[draw(st.integers(0, len(monos) - 1))]
        num = draw(st.integers(-9, 9))
        den = draw(st.integers(1, 9))
        coeffs[(k, mono)] = Fraction(num, den)
    full = (spec.spatial_degree,) * (spec.u_order + 1)
    return Jet(spec, full, coeffs=coeffs)


jets2 = st.builds(lambda: None)


@st.composite
def rational_jets(draw, spec=SPEC2):
    return _random_rational_jet(draw, spec)


@given(a=rational_jets(), b=rational_jets(), d=rational_jets())
@settings(max_examples=60, deadline=None)
def test_ring_axioms(a, b, d):
    lhs = jet_mul(a, jet_add(b, d))
    rhs = jet_add(jet_mul(a, b), jet_mul(a, d))
    assert jet_sub(lhs, rhs).max_abs() == 0
    assert jet_sub(jet_mul(a, b), jet_mul(b, a)).max_abs() == 0
    assoc = jet_sub(jet_mul(jet_mul(a, b), d), jet_mul(a, jet_mul(b, d)))
    assert assoc.max_abs() == 0


@given(a=rational_jets(), b=rational_jets())
@settings(max_examples=60, deadline=None)
def test_leibniz(a, b):
    for var in (0, 1, "u"):
        lhs = jet_partial(jet_mul(a, b), var)
        rhs = jet_add(jet_mul(jet_partial(a, var), b), jet_mul(a, jet_partial(b, var)))
        assert jet_sub(lhs, rhs).max_abs() == 0


@given(a=rational_jets())
@settings(max_examples=60, deadline=None)
def test_partials_commute(a):
    xy = jet_partial(jet_partial(a, 0), 1)
    yx = jet_partial(jet_partial(a, 1), 0)
    assert jet_sub(xy, yx).max_abs() == 0


@given(a=rational_jets())
@settings(max_examples=40, deadline=None)
def test_backend_agreement(a):
    fspec = JetSpec(SPEC2.n_vars, SPEC2.spatial_degree, SPEC2.u_order, mode="float")
    af = _to_float(a, fspec)
    one = jet_const(SPEC2, 1)
    g = jet_invert(jet_add(one, jet_mul(a, a)))
    gf = jet_invert(jet_add(jet_const(fspec, 1), jet_mul(af, af)))
    for (k, mono), v in g.coeffs.items():
        got = float(gf.coeff(k, mono)[0])
        assert abs(got - float(v)) <= 1e-12 * max(1.0, abs(float(v)))


def _to_float(a, fspec):
    rows = [None] * (fspec.u_order + 1)
    from ambientkit.jets import mono_index, mono_count

    for (k, mono), v in a.coeffs.items():
        if rows[k] is None:
            rows[k] = np.zeros((1, mono_count(fspec.n_vars, fspec.spatial_degree)))
        rows[k][0, mono_index(fspec.n_vars, fspec.spatial_degree)[mono]] = float(v)
    valid = (fspec.spatial_degree,) * (fspec.u_order + 1)
    return Jet(fspec, valid, rows=rows)


def _random_float_jet(spec, rng, positive=False):
    from ambientkit.jets import mono_count

    rows = []
    for _ in range(spec.u_order + 1):
        r = rng.uniform(-0.3, 0.3, (spec.batch, mono_count(spec.n_vars, spec.spatial_degree)))
        rows.append(r)
    if positive:
        rows[0][:, 0] = rng.uniform(1.0, 2.0, spec.batch)
    valid = (spec.spatial_degree,) * (spec.u_order + 1)
    return Jet(spec, valid, rows=rows)


def test_truncation_consistency():
    big = JetSpec(2, 6, 2)
    small = JetSpec(2, 3, 2)
    rng = np.random.default_rng(7)
    monos = monomials(2, 6)
    coeffs_a = {}
    coeffs_b = {}
    for tgt in (coeffs_a, coeffs_b):
        for _ in range(8):
            k = int(rng.integers(0, 3))
            mono = monos[int(rng.integers(0, len(monos)))]
            tgt[(k, mono)] = Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 5)))
    full = (6, 6, 6)
    a, b = Jet(big, full, coeffs=coeffs_a), Jet(big, full, coeffs=coeffs_b)
    p_then_t = _truncate(jet_mul(a, b), small)
    t_then_p = jet_mul(_truncate(a, small), _truncate(b, small))
    assert jet_sub(p_then_t, t_then_p).max_abs() == 0


def _truncate(a, small):
    coeffs = {
        (k, m): v
        for (k, m), v in a.coeffs.items()
        if k <= small.u_order and sum(m) <= small.spatial_degree
    }
    valid = tuple(min(v, small.spatial_degree) for v in a.valid[: small.u_order + 1])
    return Jet(small, valid, coeffs=coeffs)


# -- matrix helpers against a sympy oracle ----------------------------------


def test_mat_inv_det_vs_sympy():
    spec = JetSpec(2, 3, 0)
    x, y = jet_coordinate(spec, 0), jet_coordinate(spec, 1)
    one = jet_const(spec, 1)
    A = [
        [jet_add(one, jet_mul(x, y)), jet_mul(jet_const(spec, 2), y)],
        [x, jet_add(jet_const(spec, 3), jet_mul(x, x))],
    ]
    Ainv = mat_inv(A)
    prod = mat_mul(A, Ainv)
    ident = mat_identity(spec, 2)
    for i in range(2):
        for j in range(2):
            assert jet_sub(prod[i][j], ident[i][j]).max_abs() == 0

    sx, sy = sympy.symbols("x y")
    S = sympy.Matrix([[1 + sx * sy, 2 * sy], [sx, 3 + sx * sx]])
    det = mat_det(A)
    sdet = sympy.expand(S.det())
    for mono in monomials(2, 3):
        ours = det.coeff(0, mono)
        theirs = sdet.coeff(sx, mono[0]).coeff(sy, mono[1])
        assert Fraction(int(sympy.Integer(theirs)), 1) == ours


def test_mat_trace_and_int_pow():
    spec = JetSpec(1, 4, 0)
    x = jet_coordinate(spec, 0)
    p = jet_int_pow(jet_add(jet_const(spec, 1), x), 4)
    assert [c(p, 0, (d,)) for d in range(5)] == [1, 4, 6, 4, 1]
    q = jet_int_pow(jet_add(jet_const(spec, 1), x), -2)
    assert [c(q, 0, (d,)) for d in range(4)] == [1, -2, 3, -4]
    A = [[jet_const(spec, 2), x], [x, jet_const(spec, 5)]]
    assert c(mat_trace(A), 0, (0,)) == 7


def test_cos_and_analytic_domain():
    spec = JetSpec(1, 4, 0)
    x = jet_coordinate(spec, 0)
    co = jet_cos(x)
    assert c(co, 0, (0,)) == 1
    assert c(co, 0, (2,)) == frac(-1, 2)
    with pytest.raises(DomainError):
        jet_analytic(jet_const(spec, 2), "log")
    with pytest.raises(DomainError):
        jet_analytic(jet_const(spec, 3), "sqrt")
    half = jet_analytic(jet_const(spec, frac(9, 4)), "sqrt")
    assert c(half, 0, (0,)) == frac(3, 2)


def test_pow_half_integer_exact():
    spec = JetSpec(1, 3, 0)
    a = jet_add(jet_const(spec, 4), jet_coordinate(spec, 0))
    p = jet_analytic(a, "pow", r=frac(3, 2))
    # (4+x)^{3/2} about 4: 8 + 3x + (3/16)x^2 - (1/128)x^3
    assert c(p, 0, (0,)) == 8
    assert c(p, 0, (1,)) == 3
    assert c(p, 0, (2,)) == frac(3, 16)
    assert c(p, 0, (3,)) == frac(-1, 128)


def test_known_zero_slots_do_not_erode_products():
    # multiplying by u^m must keep full validity on the orders where the
    # power's rows are known zero, or order-by-order solvers lose two degrees
    # per step more than the arithmetic actually spends
    spec = JetSpec(2, 4, 2, mode="rational")
    x = jet_coordinate(spec, 0)
    u = jet_u_power(spec, 1)
    prod = jet_mul(x, u)
    assert prod.valid == (4, 4, 4)
    eroded = jet_partial(jet_mul(x, x), 0)  # validity 3, content 2x
    lifted = jet_mul(eroded, u)
    assert lifted.valid[0] == 4  # slot 0 content is known zero to the cap
    assert lifted.valid[1] == 3
    # a zero-content factor bounds the product by its own validity alone
    zc = jet_partial(jet_const(spec, 7), 0)  # zero content, validity 3
    assert jet_mul(zc, x).valid == (3, 3, 3)


def test_strict_zero_semantics():
    # eroded-validity zero content is unknown past its staircase, not zero
    spec = JetSpec(2, 4, 1, mode="rational")
    z = jet_partial(jet_const(spec, 5), 0)
    assert z.max_abs() == 0
    assert not z.is_zero()
    assert jet_zero(spec).is_zero()
