import math

import numpy as np
import pytest

from dualfield import linsolve
from dualfield.cases import beltrami_u, constant_field, mms_force, mms_u
from dualfield.config import parse_config
from dualfield.spaces import C, D, Discretization
from dualfield.timestepping import DualFieldStepper, StepFailure, march, n_steps, run


@pytest.fixture(scope="module")
def inviscid22(disc22, mats22):
    return DualFieldStepper(disc22, 0.05, math.inf, backend="superlu", matrices=mats22)


@pytest.fixture(scope="module")
def cons_run(disc22, mats22):
    st = DualFieldStepper(disc22, 0.05, math.inf, backend="superlu", matrices=mats22)
    return march(st, beltrami_u, 0.5)


@pytest.fixture(scope="module")
def visc_run(disc22, mats22):
    st = DualFieldStepper(disc22, 0.05, 10.0, backend="superlu", matrices=mats22)
    return march(st, beltrami_u, 0.5)


def test_zero_field_stays_zero(inviscid22):
    res = march(inviscid22, constant_field(0, 0, 0), 0.15)
    s = res.state
    for f in (s.u1_half, s.w2_half, s.u2_int, s.w1_int, s.P0, s.P3):
        assert np.abs(f.coeffs).max() == 0.0
    assert len(res.records) == 4


def test_constant_field_is_steady(inviscid22, disc22):
    u0 = constant_field(0.3, -1.0, 2.0)
    res = march(inviscid22, u0, 0.2)
    np.testing.assert_allclose(res.state.u2_int.coeffs, disc22.project(u0, D).coeffs, atol=1e-12)
    np.testing.assert_allclose(res.state.u1_half.coeffs, disc22.project(u0, C).coeffs, atol=1e-12)
    assert np.abs(res.state.w1_int.coeffs).max() <= 1e-12


def test_initial_state_tags_and_curls(inviscid22, disc22):
    s = inviscid22.initial_state(beltrami_u)
    assert s.k == 0 and not s.bootstrapped
    assert s.u1_half.time_tag == 0.0
    np.testing.assert_array_equal(s.w2_half.coeffs, disc22.incidence.as_float.E_curl @ s.u1_half.coeffs)


def test_bootstrap_moves_to_half_instant(inviscid22):
    s = inviscid22.bootstrap_step(inviscid22.initial_state(beltrami_u))
    assert s.bootstrapped and s.k == 0
    assert s.u1_half.time_tag == pytest.approx(0.025)
    assert inviscid22.curl_identity_residual(s) <= 1e-12


def test_time_tags_after_steps(cons_run):
    s = cons_run.state
    assert s.k == 10
    assert s.u2_int.time_tag == pytest.approx(0.5)
    assert s.u1_half.time_tag == pytest.approx(0.525)
    assert s.P3.time_tag == pytest.approx(0.475)
    assert s.P0.time_tag == pytest.approx(0.5)


def test_curl_identity_holds_after_every_step(inviscid22):
    s = inviscid22.bootstrap_step(inviscid22.initial_state(beltrami_u))
    for _ in range(3):
        s = inviscid22.half_integer_step(inviscid22.integer_step(s))
        assert inviscid22.curl_identity_residual(s) <= 1e-11


def test_inviscid_run_conserves(cons_run):
    recs = cons_run.records
    K1 = np.array([r.K1 for r in recs])
    K2 = np.array([r.K2 for r in recs])
    H1 = np.array([r.H1 for r in recs])
    H2 = np.array([r.H2 for r in recs])
    assert np.ptp(K1) <= 1e-10 * K1[0]
    assert np.ptp(K2) <= 1e-10 * K2[0]
    assert np.abs(H1 - H1[0]).max() <= 1e-10
    assert np.abs(H2 - H2[0]).max() <= 1e-10
    assert np.abs(H1 - H2).max() <= 1e-10
    assert max(r.div_u2_linf for r in recs) <= 1e-10


def test_viscous_residuals_and_decay(visc_run):
    recs = visc_run.records
    for r in recs[1:]:
        assert abs(r.residual_K1) <= 1e-9
        assert abs(r.residual_K2) <= 1e-9
        assert abs(r.residual_H) <= 1e-9
    for a, b in zip(recs, recs[1:]):
        assert b.K1 <= a.K1 and b.K2 <= a.K2
    assert recs[-1].K2 < recs[0].K2


def test_solver_residuals_recorded(cons_run):
    res = cons_run.stepper.last_residuals
    assert set(res) == {"bootstrap", "integer", "half-integer"}
    assert max(res.values()) <= 1e-11


def test_t_end_zero_gives_one_record(inviscid22):
    res = march(inviscid22, beltrami_u, 0.0)
    assert len(res.records) == 1 and res.state.k == 0
    assert res.records[0].t == 0.0


def test_diag_every_keeps_final_record(inviscid22):
    res = march(inviscid22, beltrami_u, 0.25, diag_every=2)
    assert [round(r.t, 10) for r in res.records] == [0.0, 0.1, 0.2, 0.25]


def test_on_step_callback_sees_every_step(inviscid22):
    seen = []
    march(inviscid22, beltrami_u, 0.15, on_step=lambda s, r: seen.append(s.k))
    assert seen == [0, 1, 2, 3]


def test_resume_is_bit_identical(inviscid22):
    full = march(inviscid22, beltrami_u, 0.2)
    half = march(inviscid22, beltrami_u, 0.1)
    rest = march(inviscid22, None, 0.2, resume=(half.state, half.records[-1]))
    np.testing.assert_array_equal(rest.state.u2_int.coeffs, full.state.u2_int.coeffs)
    np.testing.assert_array_equal(rest.state.u1_half.coeffs, full.state.u1_half.coeffs)
    assert rest.records[-1].as_row() == full.records[-1].as_row()


def test_resume_needs_bootstrapped_state(inviscid22):
    s = inviscid22.initial_state(beltrami_u)
    with pytest.raises(ValueError):
        march(inviscid22, None, 0.1, resume=(s, None))


def test_manufactured_run_tracks_exact_solution():
    disc = Discretization.build(3, 2)
    st = DualFieldStepper(disc, 0.02, 1.0, mms_force(1.0), backend="superlu")
    res = march(st, mms_u, 0.1)
    from dualfield import diagnostics as dg

    err = dg.l2_error(disc, res.state.u2_int, mms_u)
    best = dg.l2_error(disc, disc.project(mms_u, D, 0.1), mms_u, 0.1)
    assert err <= 1.2 * best


def test_n_steps():
    assert n_steps(1.0, 0.05) == 20
    assert n_steps(0.0, 0.1) == 0
    with pytest.raises(ValueError):
        n_steps(1.0, 0.3)


def test_stepper_rejects_bad_parameters(disc22, mats22):
    with pytest.raises(ValueError):
        DualFieldStepper(disc22, 0.0, matrices=mats22)
    with pytest.raises(ValueError):
        DualFieldStepper(disc22, 0.1, -1.0, matrices=mats22)


def test_solver_failure_becomes_step_failure(inviscid22, monkeypatch):
    def boom(A, b, backend="auto"):
        raise linsolve.SolverError("singular")

    s = inviscid22.initial_state(beltrami_u)
    monkeypatch.setattr(linsolve, "solve", boom)
    with pytest.raises(StepFailure) as info:
        inviscid22.bootstrap_step(s)
    assert info.value.step == "bootstrap" and info.value.k == 0


def test_nonfinite_solution_becomes_step_failure(inviscid22, monkeypatch):
    s = inviscid22.bootstrap_step(inviscid22.initial_state(beltrami_u))
    monkeypatch.setattr(linsolve, "solve", lambda A, b, backend="auto": np.full(len(b), np.nan))
    with pytest.raises(StepFailure):
        inviscid22.integer_step(s)


def test_run_from_config():
    cfg = parse_config(case="dissipation", K=2, N=1, t_end=0.1, solver="superlu")
    res = run(cfg)
    assert len(res.records) == 3
    assert res.disc.mesh.K == 2 and res.stepper.Re == 100.0
