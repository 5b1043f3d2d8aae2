"""Order-by-order expansion solver against closed forms and re-derived residuals."""

from fractions import Fraction as F

import numpy as np
import pytest

from ambientkit.jets import BudgetError, JetSpec, jet_scale, jet_sub, jet_mul, jet_sum, jet_u_power
from ambientkit.geometry import TensorJet, t2_mixed, weighted_invariants
from ambientkit.scenarios import build, make
from ambientkit.ambient import (
    ambient_residual,
    half_space_check,
    solve_ambient,
    third_order_trace,
)
from ambientkit.calibration import calibrate, resolve_candidate


def torus_float(seed=5, order=3, deg=8, pts=4):
    spec = JetSpec(3, deg, order, mode="float", batch=pts)
    rng = np.random.default_rng(11)
    base = tuple(rng.uniform(0.1, 6.0, size=pts) for _ in range(3))
    return build(make("perturbed-torus", seed=seed), spec, base=base)


def test_first_order_coefficients_match_invariants():
    spec = JetSpec(3, 6, 1, mode="rational")
    mm = build(make("flat-phi-poly"), spec)
    exp = solve_ambient(mm, 1)
    w = weighted_invariants(mm)
    assert exp.g_hat(1).sub(w.p_phi.scale(2)).max_abs() == 0
    assert jet_sub(exp.phi_hat(1), jet_scale(w.y_phi, -1)).max_abs() == 0


def test_first_order_on_generic_torus():
    spec = JetSpec(3, 6, 1, mode="rational")
    mm = build(make("perturbed-torus", seed=2, lam=F(2, 5)), spec)
    exp = solve_ambient(mm, 1)
    w = weighted_invariants(mm)
    assert exp.g_hat(1).sub(w.p_phi.scale(2)).max_abs() == 0
    assert jet_sub(exp.phi_hat(1), jet_scale(w.y_phi, -1)).max_abs() == 0


def test_einstein_closed_form():
    # g_u = (1 + 4u) g and phi_u = (3/4) log(1 + 4u) for the round S^3, mu = 1
    spec = JetSpec(3, 8, 3, mode="rational")
    mm = build(make("einstein-n3"), spec)
    exp = solve_ambient(mm, 3)
    assert exp.g_hat(1).sub(mm.g.scale(4)).max_abs() == 0
    assert exp.g_hat(2).max_abs() == 0
    assert exp.g_hat(3).max_abs() == 0
    assert [exp.phi_hat(k).value(0) for k in (1, 2, 3)] == [F(3), F(-6), F(16)]


def test_gaussian_soliton_is_stationary():
    spec = JetSpec(3, 8, 3, mode="rational")
    mm = build(make("gaussian-soliton"), spec)
    exp = solve_ambient(mm, 3)
    for k in (1, 2, 3):
        assert exp.g_hat(k).max_abs() == 0
        assert exp.phi_hat(k).max_abs() == 0


def test_flat_quadratic_closed_form():
    # flat metric: expansion terminates, g_u = g + 2uP + u^2 P g^{-1} P
    spec = JetSpec(3, 6, 2, mode="rational")
    mm = build(make("flat-phi-poly"), spec)
    exp = solve_ambient(mm, 2)
    w = weighted_invariants(mm)
    P = w.p_phi
    Pm = t2_mixed(mm, P)
    PP = TensorJet(3, 2, spec, sym="s2")
    for i in range(3):
        for j in range(i, 3):
            PP.set_((i, j), jet_sum([jet_mul(P.get(i, a), Pm[a][j]) for a in range(3)], spec=spec))
    assert exp.g_hat(1).sub(P.scale(2)).max_abs() == 0
    assert exp.g_hat(2).sub(PP).max_abs() == 0
    assert jet_sub(exp.phi_hat(1), jet_scale(w.y_phi, -1)).max_abs() == 0
    assert exp.phi_hat(2).max_abs() == 0


def test_residual_components_vanish_rational():
    spec = JetSpec(3, 6, 2, mode="rational")
    mm = build(make("perturbed-torus", seed=7, lam=F(1, 4)), spec)
    exp = solve_ambient(mm, 2)
    res = ambient_residual(exp)
    assert res["tangential"] == [0.0, 0.0]
    assert res["scalar"] == [0.0, 0.0]
    assert max(res["mixed"]) == 0.0
    assert res["normal"][0] == 0.0
    assert res["v_slope"] == 0.0
    assert res["v_row"] == 0.0


def test_residual_components_vanish_float():
    exp = solve_ambient(torus_float(), 3)
    res = ambient_residual(exp)
    assert max(res["tangential"]) < 1e-10
    assert max(res["scalar"]) < 1e-10
    assert max(res["mixed"]) < 1e-10
    assert max(res["normal"]) < 1e-10
    assert res["v_slope"] == 0.0


def test_solver_is_deterministic():
    mm = build(make("perturbed-torus", seed=3), JetSpec(3, 6, 2, mode="rational"))
    a = solve_ambient(mm, 2)
    b = solve_ambient(mm, 2)
    assert a.g_u.sub(b.g_u).max_abs() == 0
    assert jet_sub(a.phi_u, b.phi_u).max_abs() == 0


def test_perturbing_a_coefficient_breaks_the_equations():
    # uniqueness probe: any change to the solved data shows up in the residual
    spec = JetSpec(3, 6, 2, mode="rational")
    mm = build(make("perturbed-torus", seed=3), spec)
    exp = solve_ambient(mm, 2)
    bad_g = exp.g_u.add(
        exp.g_u.map(lambda j: jet_mul(jet_scale(jet_u_power(spec, 2), F(1, 50)), j))
    )
    from ambientkit.ambient import AmbientExpansion

    tampered = AmbientExpansion(mm, exp.order, exp.kappa, bad_g, exp.phi_u)
    res = ambient_residual(tampered)
    assert max(res["tangential"]) > 1e-6


def test_third_order_trace_einstein_exact():
    spec = JetSpec(3, 8, 3, mode="rational")
    mm = build(make("einstein-n3"), spec)
    exp = solve_ambient(mm, 3)
    out = third_order_trace(exp)
    # (1/2) tr g''' - phi''' = 0 - 96 and -4<P, B> = -4 * <2g, 4g> = -96
    assert out["lhs_at_0"].value(0) == F(-96)
    assert out["rhs_bach_at_0"].value(0) == F(-96)
    assert out["residual_at_0"] == 0.0
    assert all(x == 0.0 for x in out["series_residual"])


def test_third_order_trace_generic_float():
    exp = solve_ambient(torus_float(), 3)
    out = third_order_trace(exp)
    assert out["residual_at_0"] < 1e-10
    assert all(x < 1e-10 for x in out["series_residual"])


def test_order_cap_guard():
    mm = build(make("gaussian-soliton"), JetSpec(3, 6, 1, mode="rational"))
    with pytest.raises(BudgetError):
        solve_ambient(mm, 2)


def test_wrong_dimension_constant_shifts_phi():
    # with kappa = n the soliton's first density coefficient picks up
    # -(n + 2 - kappa) lambda / 2 = -lambda exactly
    spec = JetSpec(3, 6, 1, mode="rational")
    mm = build(make("gaussian-soliton"), spec)
    exp = solve_ambient(mm, 1, kappa=F(3))
    assert exp.phi_hat(1).value(0) == -mm.lam


def test_calibration_selects_n_plus_2():
    rec = calibrate()
    assert rec.selected == "n+2"
    assert rec.insensitive == ["einstein"]
    assert rec.surviving["soliton"] == ["n+2"]
    assert rec.surviving["flat"] == ["n+2"]
    assert rec.residuals["soliton"]["n"] == pytest.approx(0.5)
    assert resolve_candidate("n+2", 4) == F(6)


def test_half_space_global_form():
    out = half_space_check()
    assert out["grid_points"] == 16
    assert out["ric_phi_max"] <= 1e-9
    assert out["scalar_eq_max"] <= 1e-9
    bad = half_space_check(negative=True)
    assert bad["ric_phi_max"] >= 1e-3


def test_expansion_scale_consistency():
    # doubling mu rescales coefficients: ghat_1 doubles relative to g
    spec = JetSpec(3, 6, 1, mode="rational")
    mm1 = build(make("einstein-sphere", n=3, mu=F(1)), spec)
    mm2 = build(make("einstein-sphere", n=3, mu=F(2)), spec)
    e1 = solve_ambient(mm1, 1)
    e2 = solve_ambient(mm2, 1)
    r1 = e1.g_hat(1).sub(mm1.g.scale(4)).max_abs()
    r2 = e2.g_hat(1).sub(mm2.g.scale(8)).max_abs()
    assert r1 == 0 and r2 == 0
