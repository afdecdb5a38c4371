import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppblowup import model
from ppblowup.bounds import (LOCATIONS, Tolerances, compute_bounds, energy_residual, growth_floor,
                             lower_rate_coeff, lower_rate_envelope, lower_time_bound, remark_comparison_holds,
                             remark_sides, upper_rate_coeff, upper_rate_envelope, upper_time_bound,
                             verify_trajectory)
from ppblowup.constants import Regime, build_constants_report
from ppblowup.dynamics import TimeStepConfig, run
from ppblowup.errors import OutOfRegime
from ppblowup.fem import discrete_norms


def test_formulas_by_hand():
    assert upper_time_bound(1.0, 1.0, 4.0) == pytest.approx(0.25)
    assert lower_time_bound(0.5, 1.0, 4.0) == pytest.approx(0.5)
    assert upper_rate_coeff(0.5, 1.0, 4.0) == pytest.approx(1 / 16)
    assert lower_rate_coeff(1.0, 4.0) == pytest.approx(0.5)
    assert upper_rate_envelope(0.5, 1.0, 0.5, 1.0, 4.0) == pytest.approx(1 / 8)
    assert lower_rate_envelope(0.5, 1.0, 1.0, 4.0) == pytest.approx(1.0)
    np.testing.assert_allclose(growth_floor([0.0, 1.0], 2.0, 0.5), [4.0, 4 * math.exp(0.5)])
    with pytest.raises(OutOfRegime):
        upper_time_bound(1.0, 0.0, 4.0)
    with pytest.raises(OutOfRegime):
        upper_time_bound(1.0, 1.0, 2.0)
    with pytest.raises(OutOfRegime):
        lower_rate_envelope(1.0, 1.0, 1.0, 4.0)


@given(C1=st.floats(2.1, 6.0), p=st.floats(2.1, 6.0))
def test_envelope_exponents(C1, p):
    t = np.array([0.0, 0.5])
    up = upper_rate_envelope(t, 1.0, 1.0, 1.0, C1)
    lo = lower_rate_envelope(t, 1.0, 1.0, p)
    assert math.log(up[1] / up[0]) / math.log(0.5) == pytest.approx(-2 / (C1 - 2), rel=1e-9)
    assert math.log(lo[1] / lo[0]) / math.log(0.5) == pytest.approx(-2 / (p - 2), rel=1e-9)


def test_remark_example():
    left, right = remark_sides(4.0, 0.0)
    assert left == pytest.approx(0.25)
    assert right == pytest.approx(1.5 - math.sqrt(1 / 4 + 1 / 3))
    assert remark_comparison_holds(4.0, 0.0)
    lefts = [remark_sides(3.0, e)[0] for e in (0.2, 0.5, 0.9)]
    assert lefts[0] < lefts[1] < lefts[2] < 1
    assert remark_sides(3.0, 0.999999)[0] == pytest.approx(1.0, abs=1e-5)
    assert len({remark_sides(3.0, e)[1] for e in (0.0, 0.4, 0.8)}) == 1
    with pytest.raises(ValueError):
        remark_comparison_holds(3.0, 1.0)


@given(p=st.floats(2.05, 8.0), eps=st.floats(0.0, 0.999))
def test_remark_recomputed(p, eps):
    base = ((1 - eps) * p + 2 * eps) / 2
    left = math.exp(-p / (p - 2) * math.log(base))
    right = (p - 1) / (p - 2) - math.sqrt((p - 2) ** -2 + p / (4 * (p - 1)))
    if abs(left - right) > 1e-9 * max(1.0, abs(right)):
        assert remark_comparison_holds(p, eps) == (left < right)


@pytest.fixture(scope="module")
def runs(small):
    mesh, ops, est = small
    a, b, _ = discrete_norms(mesh, ops, est.extremal, 4.0)
    lamI = model.nehari_ray_threshold(a, b, 4.0)
    out = {}
    for name, f in (("neg", 1.5), ("sub", 1.1), ("small", 0.4)):
        rep = build_constants_report(mesh, ops, f * lamI * est.extremal, est)
        cfg = TimeStepConfig(dt0=1e-3, blowup_factor=1e6, t_max=None if f > 1 else 2.0)
        out[name] = rep, run(mesh, ops, f * lamI * est.extremal, cfg, rep)
    return out


def test_regimes_of_fixture(runs):
    assert runs["neg"][0].regime is Regime.NEGATIVE_ENERGY
    assert runs["sub"][0].regime is Regime.SUBCRITICAL
    assert runs["small"][0].regime is Regime.NOT_CERTIFIED


@pytest.mark.parametrize("name", ["neg", "sub"])
def test_blowup_runs_pass(runs, name):
    rep, tr = runs[name]
    ver = verify_trajectory(tr, rep)
    assert ver.passed, ver.summary()
    applicable = {c.check for c in ver.checks if c.passed is not None}
    assert {"blowup_time_sandwich", "growth_floor", "upper_rate_envelope", "lower_rate_envelope"} <= applicable
    assert ("norm_floor" in applicable) == (name == "sub")
    assert ("rate_slope" in applicable) == (name == "neg")


def test_small_data_gating(runs):
    rep, tr = runs["small"]
    ver = verify_trajectory(tr, rep)
    assert ver.passed
    for c in ver.checks:
        if c.check in ("energy_identity", "power_identity", "energy_monotone"):
            assert c.passed is True
        else:
            assert c.passed is None and c.note


def test_every_check_has_location(runs):
    ver = verify_trajectory(*reversed(runs["neg"]))
    for c in ver.checks:
        assert c.paper_location == LOCATIONS[c.check]
    doc = json.loads(ver.to_json())
    assert all({"check", "paper_location", "pass", "measured", "tolerance"} <= set(d) for d in doc)
    assert any("C*_h" in n for n in ver.notes)


def test_corrupted_H_fails_only_monotonicity(runs):
    rep, tr = runs["neg"]
    H = tr.H.copy()
    k = len(H) // 2
    H[k], H[k + 1] = H[k + 1], H[k]
    ver = verify_trajectory(tr.with_columns(H=H), rep)
    assert ver.failed() == ["H_monotone"]


def test_corrupted_J_fails_only_energy_monotone(runs):
    rep, tr = runs["neg"]
    J = tr.J.copy()
    k = len(J) // 3
    J[k] += 1e-6 * abs(J[k]) + 1e-6 * abs(J[k] - J[k - 1])
    J[k] = max(J[k], J[k - 1] + 1e-9 * abs(J[k - 1]))
    ver = verify_trajectory(tr.with_columns(J=J), rep)
    assert ver.failed() == ["energy_monotone"]


def test_infeasible_slope_tolerance_fails(runs):
    rep, tr = runs["neg"]
    ver = verify_trajectory(tr, rep, Tolerances(slope_rel=1e-9))
    assert ver.failed() == ["rate_slope"]


def test_energy_residual_first_order(small):
    """Max energy residual halves with the step."""
    mesh, ops, est = small
    a, b, _ = discrete_norms(mesh, ops, est.extremal, 4.0)
    u0 = 1.5 * model.nehari_ray_threshold(a, b, 4.0) * est.extremal
    rep = build_constants_report(mesh, ops, u0, est)
    rho = []
    for dt0 in (2e-3, 1e-3):
        tr = run(mesh, ops, u0, TimeStepConfig(dt0=dt0, blowup_factor=1e3), rep)
        rho.append(np.abs(energy_residual(tr)[tr.t < tr.T_threshold]).max())
    assert 1.7 <= rho[0] / rho[1] <= 2.3


def test_compute_bounds(runs):
    rep, _ = runs["sub"]
    b = compute_bounds(rep)
    assert b.consistent and b.T_lower <= b.T_upper
    assert b.rate_upper_exp == pytest.approx(-2 / (rep.C1 - 2))
    assert b.rate_lower_exp == -1.0
    assert b.remark_eps == pytest.approx(rep.J0 / rep.d)
    assert b.remark_predicate == remark_comparison_holds(4.0, rep.J0 / rep.d)
    nb = compute_bounds(runs["small"][0])
    assert nb.T_upper is None and nb.consistent is None
    neg = compute_bounds(runs["neg"][0])
    assert neg.rate_upper_exp == neg.rate_lower_exp == -1.0
