import json
import math
import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from ppblowup import model
from ppblowup.constants import (ConstantsReport, Regime, build_constants_report, classify, compute_C1, compute_C2,
                                compute_theta0, estimate_Cstar, estimate_Cstarstar, first_dirichlet_mode,
                                mountain_pass_d, solve_theta2)
from ppblowup.errors import NoConvergence, OutOfRegime, OutOfRegimeWarning
from ppblowup.fem import discrete_norms

from conftest import setup


def test_d_examples():
    assert mountain_pass_d(1.0, 4.0) == pytest.approx(0.25)
    assert mountain_pass_d(1.0, 3.0) == pytest.approx(1 / 6)
    vals = [mountain_pass_d(c, 3.5) for c in (0.2, 0.5, 1.3)]
    assert vals[0] > vals[1] > vals[2]


def test_theta2_examples():
    assert solve_theta2(0.0, 1.0, 4.0) == pytest.approx(math.sqrt(2), rel=1e-12)
    with pytest.warns(OutOfRegimeWarning):
        assert solve_theta2(0.25, 1.0, 4.0) == 1.0
    for bad in (-0.01, 0.3):
        with pytest.raises(OutOfRegime):
            solve_theta2(bad, 1.0, 4.0)


@given(f=st.floats(0.0, 0.999), Cs=st.floats(0.2, 1.5), p=st.floats(2.2, 5.8))
def test_theta2_root_and_chain(f, Cs, p):
    d = mountain_pass_d(Cs, p)
    J0 = f * d
    th2 = solve_theta2(J0, Cs, p)
    th1 = model.theta1_of(Cs, p)
    assert model.eval_h(th2, Cs, p) == pytest.approx(J0, abs=1e-10 * max(d, 1.0))
    assert th2 > th1
    th0 = compute_theta0(J0, Cs, p)
    assert th0 > 1
    assert th2 / th1 >= th0 * (1 - 1e-12)


def test_theta0_examples():
    assert compute_theta0(0.0, 1.0, 4.0) == pytest.approx(math.sqrt(2))
    assert compute_theta0(0.25 * (1 - 1e-12), 1.0, 4.0) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(OutOfRegime):
        compute_theta0(-1.0, 1.0, 4.0)


def test_C1_C2_examples():
    assert compute_C1(-0.1, None, 4.0) == 4.0
    assert compute_C1(0.0, math.sqrt(2), 4.0) == pytest.approx(3.5)
    assert compute_C1(0.0, 1 + 1e-9, 4.0) == pytest.approx(2.0, abs=1e-7)
    assert compute_C2(-0.1, None, 1.0, 4.0) == pytest.approx(1.0)
    assert compute_C2(0.0, math.sqrt(2), 1.0, 4.0) == pytest.approx(0.5)
    with pytest.raises(OutOfRegime):
        compute_C1(0.1, 1.0, 4.0)
    with pytest.raises(OutOfRegime):
        compute_C2(0.1, None, 1.0, 4.0)


@given(f=st.floats(0.0, 0.999), Css=st.floats(0.01, 4.0), p=st.floats(2.2, 5.8))
def test_C1_C2_positive(f, Css, p):
    th0 = compute_theta0(f * mountain_pass_d(1.0, p), 1.0, p)
    assert compute_C1(f, th0, p) > 2 or math.isclose(compute_C1(f, th0, p), 2.0)
    assert compute_C2(f, th0, Css, p) >= 0
    assert compute_C2(-1.0, None, Css, p) > 0


def test_classify():
    assert classify(-1.0, -2.0, 1.0) is Regime.NEGATIVE_ENERGY
    assert classify(0.0, -2.0, 1.0) is Regime.SUBCRITICAL
    assert classify(0.5, 0.0, 1.0) is Regime.NOT_CERTIFIED
    assert classify(1.0, -2.0, 1.0) is Regime.NOT_CERTIFIED
    assert classify(-1.0, -0.5, 1.0, eps_I=1.0) is Regime.NOT_CERTIFIED


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0])
def test_Cstarstar_matches_dense_route(s):
    mesh, ops = setup(s=s, M=80)
    Css, _ = estimate_Cstarstar(mesh, ops)
    # largest eigenvalue of L^-1 M_s L^-T with K = L L^T; better conditioned than eigh(K, M_s) on graded meshes
    L = np.linalg.cholesky(ops.K.toarray())
    Li = sla.solve_triangular(L, np.eye(mesh.n_dofs), lower=True)
    C = Li @ ops.M_s.toarray() @ Li.T
    assert Css == pytest.approx(np.linalg.eigvalsh(0.5 * (C + C.T))[-1], rel=1e-10)


def test_Cstarstar_s0_equals_dirichlet_mode():
    mesh, ops = setup(s=0.0, M=100, grading=1.0)
    lam, _, _ = first_dirichlet_mode(ops)
    assert estimate_Cstarstar(mesh, ops)[0] == pytest.approx(1 / lam, rel=1e-10)


def test_hardy_bound_and_monotone():
    vals = [estimate_Cstarstar(*setup(s=2.0, M=M))[0] for M in (25, 50, 100)]
    assert all(v <= 4 * (1 + 1e-6) for v in vals)
    assert vals[0] < vals[1] < vals[2]


def test_Cstar_p2_limit():
    mesh, ops = setup(s=0.0, p=4.0, M=200)
    Cs, _, _ = estimate_Cstar(mesh, ops, 2.0)
    assert Cs == pytest.approx(1 / math.pi, rel=1e-2)


def test_Cstar_scale_invariance(small):
    mesh, ops, est = small
    for c in (1.0, 2.0):
        g, q, _ = discrete_norms(mesh, ops, c * est.extremal, 4.0)
        assert q / g == pytest.approx(est.Cstar, rel=1e-12)


@pytest.mark.parametrize("p", [3.0, 4.0, 5.0])
def test_d_is_ray_maximum_of_ground_state(p):
    mesh, ops = setup(p=p, M=60)
    Cs, u, _ = estimate_Cstar(mesh, ops, p)
    a, b, _ = discrete_norms(mesh, ops, u, p)
    res = minimize_scalar(lambda l: -model.ray_scaling(l, a, b, p)[0], bracket=(0.1, a ** (2 / (p - 2)), 50.0),
                          method="golden", tol=1e-10)
    assert -res.fun == pytest.approx(mountain_pass_d(Cs, p), rel=1e-6)


def test_Cstar_increases_under_refinement():
    vals = [estimate_Cstar(*setup(M=M), 4.0)[0] for M in (25, 50, 100)]
    assert vals[0] < vals[1] < vals[2]


def test_Cstar_no_convergence():
    mesh, ops = setup(M=40)
    with pytest.raises(NoConvergence):
        estimate_Cstar(mesh, ops, 4.0, tol=1e-30, max_iter=3)


def _report(small, lam):
    mesh, ops, est = small
    return build_constants_report(mesh, ops, lam * est.extremal, est)


def test_report_zero_state(small):
    rep = _report(small, 0.0)
    assert rep.regime is Regime.NOT_CERTIFIED and rep.I0 == 0 and rep.C1 is None


def test_report_negative_energy_ray(small):
    mesh, ops, est = small
    a, b, _ = discrete_norms(mesh, ops, est.extremal, 4.0)
    lam = 1.01 * model.negative_energy_ray_threshold(a, b, 4.0)
    rep = _report(small, lam)
    assert rep.regime is Regime.NEGATIVE_ENERGY and rep.C1 == 4.0 and rep.branch == "J0<0"
    assert rep.G0 == -rep.J0 > 0


def test_report_branch_at_zero_energy(small):
    mesh, ops, est = small
    a, b, _ = discrete_norms(mesh, ops, est.extremal, 4.0)
    lam = model.negative_energy_ray_threshold(a, b, 4.0) * (1 - 1e-9)
    rep = _report(small, lam)
    assert rep.regime is Regime.SUBCRITICAL and rep.branch == "0<=J0<d"
    assert rep.J0 >= 0


@settings(max_examples=20, deadline=None)
@given(f=st.floats(1.0001, 3.0))
def test_report_invariants(small, f):
    mesh, ops, est = small
    a, b, _ = discrete_norms(mesh, ops, est.extremal, 4.0)
    rep = _report(small, f * model.nehari_ray_threshold(a, b, 4.0))
    assert rep.Cstar > 0 and rep.Cstarstar > 0
    assert rep.d == mountain_pass_d(rep.Cstar, 4.0)
    assert rep.theta1 == model.theta1_of(rep.Cstar, 4.0)
    assert rep.regime.certified
    assert rep.C1 > 2 and rep.C2 > 0 and rep.G0 > 0
    if rep.regime is Regime.NEGATIVE_ENERGY:
        assert rep.C1 == 4.0
    else:
        assert rep.theta2 > rep.theta1 and rep.theta2 / rep.theta1 >= rep.theta0 > 1


def test_report_json_roundtrip(small):
    rep = _report(small, 5.0)
    back = ConstantsReport.from_dict(json.loads(rep.to_json()))
    assert back == rep
    assert {"estimator", "tol", "iterations", "M"} <= set(rep.provenance["Cstar"])
