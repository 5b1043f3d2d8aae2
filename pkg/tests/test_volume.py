"""Volume coefficients: low-order formulas, closed forms, transports, variations."""

from fractions import Fraction as F

import numpy as np
import pytest

from ambientkit.jets import JetSpec, jet_scale, jet_sub, jet_add, jet_mul
from ambientkit.geometry import (
    metric_measure,
    t2_inner,
    t11_trace_pow,
    weighted_bach,
    weighted_invariants,
)
from ambientkit.scenarios import build, make, default_base
from ambientkit.ambient import solve_ambient
from ambientkit.quadrature import build_grid
from ambientkit.volume import (
    conformal_variation,
    critical_residual,
    einstein_sign,
    einstein_volume_value,
    p_coefficients,
    transport_tensor,
    volume_coefficients,
    volume_values,
)


def rational_exp(name, order=2, deg=6, **kw):
    spec = JetSpec(3, deg, order, mode="rational")
    mm = build(make(name, **kw), spec)
    return mm, solve_ambient(mm, order)


def test_v1_is_half_weighted_scalar():
    mm, exp = rational_exp("perturbed-torus", seed=4, lam=F(1, 4))
    v = volume_coefficients(exp, 1)
    w = weighted_invariants(mm)
    assert v[0].value(0) == 1
    assert jet_sub(v[1], jet_scale(w.r_phi, F(1, 2))).max_abs() == 0


def test_v2_formula():
    # v_2 = (v_1^2 - |P|^2) / 2
    mm, exp = rational_exp("perturbed-torus", seed=6, lam=F(1, 3))
    v = volume_coefficients(exp, 2)
    w = weighted_invariants(mm)
    p2 = t2_inner(mm, w.p_phi, w.p_phi)
    pred = jet_scale(jet_sub(jet_mul(v[1], v[1]), p2), F(1, 2))
    assert jet_sub(v[2], pred).max_abs() == 0


def v3_prediction(mm, v1):
    w = weighted_invariants(mm)
    p2 = t2_inner(mm, w.p_phi, w.p_phi)
    p3 = t11_trace_pow(mm, w.p_phi, 3)
    pb = t2_inner(mm, w.p_phi, weighted_bach(mm))
    cubic = jet_add(
        jet_sub(jet_mul(v1, jet_mul(v1, v1)), jet_scale(jet_mul(v1, p2), 3)),
        jet_scale(p3, 2),
    )
    return jet_add(jet_scale(cubic, F(1, 6)), jet_scale(pb, F(1, 3)))


def test_v3_formula_einstein_and_flat():
    for name in ("einstein-n3", "flat-phi-poly"):
        spec = JetSpec(3, 8, 3, mode="rational")
        mm = build(make(name), spec)
        exp = solve_ambient(mm, 3)
        v = volume_coefficients(exp, 3)
        assert jet_sub(v[3], v3_prediction(mm, v[1])).max_abs() == 0


def test_v3_formula_generic_float():
    spec = JetSpec(3, 8, 3, mode="float", batch=3)
    rng = np.random.default_rng(2)
    base = tuple(rng.uniform(0.2, 5.9, size=3) for _ in range(3))
    mm = build(make("perturbed-torus", seed=9), spec, base=base)
    exp = solve_ambient(mm, 3)
    v = volume_coefficients(exp, 3)
    assert jet_sub(v[3], v3_prediction(mm, v[1])).max_abs() < 1e-10


def test_einstein_n3_frozen_values():
    spec = JetSpec(3, 8, 3, mode="rational")
    mm = build(make("einstein-n3"), spec)
    exp = solve_ambient(mm, 3)
    assert volume_values(exp) == [1, 3, F(-3, 2), F(5, 2)]


def test_einstein_closed_form_various_n():
    for n in (4, 5, 6):
        spec = JetSpec(n, 6, 2, mode="rational")
        mm = build(make("einstein-sphere", n=n, mu=F(1)), spec)
        exp = solve_ambient(mm, 2)
        vals = volume_values(exp)
        for k in (1, 2):
            assert vals[k] == einstein_volume_value(n, 1, k)


def test_einstein_closed_form_value_table():
    assert einstein_volume_value(3, 1, 3) == F(5, 2)
    assert einstein_volume_value(4, 1, 2) == 0
    assert einstein_volume_value(8, 1, 2) == 16
    assert einstein_volume_value(12, 1, 3) == 64
    assert einstein_sign(4, 2) == 0
    assert einstein_sign(3, 2) == -1
    assert einstein_sign(10, 1) == 1


def test_p_coefficients_scale():
    mm, exp = rational_exp("einstein-n3", order=2, deg=6)
    v = volume_coefficients(exp, 2)
    p = p_coefficients(exp, 2)
    assert p[2].value(0) == 2 * v[2].value(0)


def test_transport_tensors_gaussian():
    # V = 1 identically, so L_1 = g^{-1} and higher transports vanish
    mm, exp = rational_exp("gaussian-soliton", order=2, deg=6)
    L1 = transport_tensor(exp, 1)
    L2 = transport_tensor(exp, 2)
    for i in range(3):
        assert L1.get(i, i).value(0) == 1
    assert L2.max_abs() == 0


def test_transport_tensors_sphere_soliton():
    # on a shrinker L_k = v_1^{k-1}/(k-1)! g^{-1} with v_1 constant
    spec = JetSpec(3, 6, 2, mode="rational")
    mm = build(make("sphere-soliton"), spec)
    exp = solve_ambient(mm, 2)
    v1 = F(2) * F(633, 500) - 3
    v = volume_coefficients(exp, 1)
    assert v[1].value(0) == v1
    from ambientkit.geometry import metric_inverse

    ginv = metric_inverse(mm)
    L2 = transport_tensor(exp, 2)
    for i in range(3):
        for j in range(i, 3):
            want = jet_scale(ginv.get(i, j), v1)
            assert jet_sub(L2.get(i, j), want).max_abs() == 0


def test_conformal_variation_against_finite_difference():
    # pointwise delta v_2 against a central difference through re-solves
    n = 3
    k = 2
    h = 1e-3
    spec = JetSpec(n, 2 * k + 2, k, mode="float", batch=5)
    rng = np.random.default_rng(7)
    base = tuple(rng.uniform(-1.2, 1.2, size=5) for _ in range(n))
    sc = make("gaussian-soliton")
    omega = "sin(x1)*cos(x2) + x3^2/4"
    mm = build(sc, spec, base=base)
    exp = solve_ambient(mm, k)
    pred = conformal_variation(exp, omega, k).value(0)

    def vk_at(t):
        phi_t = "%s + (%s)*(%s)" % (sc.phi, t, omega)
        mt = metric_measure(sc.chart, sc.metric, phi_t, sc.lam, spec, base)
        return np.asarray(volume_coefficients(solve_ambient(mt, k), k)[k].value(0))

    step = F(1, 1000)
    fd = (vk_at(step) - vk_at(-step)) / (2 * h)
    denom = max(1.0, float(np.max(np.abs(fd))))
    assert float(np.max(np.abs(np.asarray(pred) - fd))) / denom < 1e-5


def test_scale_law():
    # v_k[c g, phi, lam/c] = c^{-k} v_k[g, phi, lam]
    c = F(3)
    sc = make("perturbed-torus", seed=8, lam=F(1, 2))
    spec = JetSpec(3, 6, 2, mode="rational")
    mm = build(sc, spec)
    exp = solve_ambient(mm, 2)
    scaled_metric = {key: "%s*(%s)" % (c, e) for key, e in sc.metric.items()}
    mm2 = metric_measure(sc.chart, scaled_metric, sc.phi, sc.lam / c, spec, default_base(sc))
    exp2 = solve_ambient(mm2, 2)
    v = volume_values(exp)
    v2 = volume_values(exp2)
    for k in (1, 2):
        assert v2[k] == v[k] / c**k


def test_critical_residual_homogeneous_vs_generic():
    n = 2
    sc = make("sphere-soliton", n=2)
    grid = build_grid(sc.chart, (10, 12))
    spec = JetSpec(n, 6, 2, mode="float", batch=grid.count)
    mm = build(sc, spec, base=grid.base)
    exp = solve_ambient(mm, 2)
    res, mean = critical_residual(exp, 2, grid)
    assert res < 1e-10
    v1 = float(F(6931, 10000) - 1)
    assert mean == pytest.approx(v1**2 / 2, rel=1e-9)

    sc2 = make("perturbed-torus", seed=1)
    grid2 = build_grid(sc2.chart, (6, 6, 6))
    spec2 = JetSpec(3, 6, 2, mode="float", batch=grid2.count)
    mm2 = build(sc2, spec2, base=grid2.base)
    exp2 = solve_ambient(mm2, 2)
    res2, _ = critical_residual(exp2, 2, grid2)
    assert res2 > 1e-4
