from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import linear_scalar_rhs, rhs_linear, rk4_integrate, rk4_until_fall
from upright.dynamics import ModelParams, PhaseState, make_field
from upright.errors import StepBudgetError
from upright.forcing import make_fourier_forcing
from upright.integrator import (EventKind, IntegratorConfig, Trajectory,
                                evolve, integrate_field,
                                shift_periodicity_check)

TWO_PI = 2.0 * math.pi

F1 = make_fourier_forcing(1.0, 1, [2.0], [])
Z1 = make_fourier_forcing(1.0, 1, [0.0], [])


def test_equilibrium_stays_put():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    traj = evolve(0.0, 5.0, PhaseState(0.0, 0.0), params, Z1)
    assert traj.events == []
    assert np.allclose(traj.end_state().flat(), [0.0, 0.0], atol=1e-13)
    assert np.allclose(traj.dense_eval(2.34).flat(), [0.0, 0.0], atol=1e-13)


def test_unstable_equilibrium_fall_against_rk4():
    params = ModelParams(G=1.0, lam=0.0, dim=1)
    cfg = IntegratorConfig()
    traj = evolve(0.0, 20.0, PhaseState(0.1, 0.0), params, Z1, cfg)
    ev = traj.fall_event
    assert ev is not None and ev.kind is EventKind.FALL_POSITIVE

    fun = lambda t, y: rhs_linear(t, y, 1.0, 0.0, lambda _: 0.0)
    fell, t_fall, _ = rk4_until_fall(fun, 0.0, 20.0, [0.1, 0.0], 1,
                                     cfg.fall_threshold, h=1e-4)
    assert fell
    assert ev.time == pytest.approx(t_fall, abs=1e-5)

    # x grows monotonically along the way
    ts = np.linspace(0.0, ev.time * 0.999, 200)
    xs = traj.dense_array(ts)[:, 0]
    assert np.all(np.diff(xs) > 0)


def test_states_match_rk4_before_fall():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    traj = evolve(0.0, 1.0, PhaseState(0.1, 0.0), params, F1)
    assert traj.fall_event is None
    fun = lambda t, y: rhs_linear(t, y, 9.81, 1.0,
                                  lambda s: 2.0 * math.cos(TWO_PI * s))
    for t in (0.25, 0.5, 0.75, 1.0):
        ref = rk4_integrate(fun, 0.0, t, [0.1, 0.0], h=1e-4)
        assert np.allclose(traj.dense_eval(t).flat(), ref, rtol=1e-7, atol=1e-8)


def test_semigroup_property():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    cfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11)
    z = PhaseState(0.1, 0.0)
    whole = evolve(0.0, 1.0, z, params, F1, cfg).end_state()
    mid = evolve(0.0, 0.5, z, params, F1, cfg).end_state()
    two_leg = evolve(0.5, 1.0, mid, params, F1, cfg).end_state()
    # both routes agree to ten times the local tolerance scale
    assert np.allclose(whole.flat(), two_leg.flat(), atol=1e-8)


def test_dense_eval_interpolates_nodes():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    traj = evolve(0.0, 1.0, PhaseState(0.05, 0.1), params, F1)
    for i in range(0, len(traj.t_nodes), 5):
        t = traj.t_nodes[i]
        assert np.allclose(traj.dense_eval(float(t)).flat(), traj.states[i],
                           rtol=1e-12, atol=1e-12)


def test_dense_array_matches_dense_eval():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    traj = evolve(0.0, 1.0, PhaseState(0.05, 0.1), params, F1)
    ts = np.linspace(0.0, 1.0, 37)
    block = traj.dense_array(ts)
    for i, t in enumerate(ts):
        assert np.allclose(block[i], traj.dense_eval(float(t)).flat(),
                           atol=1e-14)


def test_fall_event_is_localized_on_threshold():
    params = ModelParams(G=1.0, lam=0.0, dim=1)
    cfg = IntegratorConfig()
    traj = evolve(0.0, 20.0, PhaseState(0.1, 0.0), params, Z1, cfg)
    ev = traj.fall_event
    x_at_event = abs(traj.dense_eval(ev.time).x.item())
    # |x| sits on the threshold to localization accuracy
    assert x_at_event == pytest.approx(cfg.fall_threshold, abs=1e-9)
    assert ev.time == traj.t_nodes[-1]


def test_negative_fall_direction():
    params = ModelParams(G=1.0, lam=0.0, dim=1)
    traj = evolve(0.0, 20.0, PhaseState(-0.1, 0.0), params, Z1)
    assert traj.fall_event.kind is EventKind.FALL_NEGATIVE


def test_planar_fall_kind():
    Z2 = make_fourier_forcing(1.0, 2, [(0.0, 0.0)], [])
    params = ModelParams(G=1.0, lam=0.0, dim=2)
    s = PhaseState(np.array([0.1, 0.05]), np.zeros(2))
    traj = evolve(0.0, 20.0, s, params, Z2)
    assert traj.fall_event.kind is EventKind.FALL_PLANAR


def test_reversibility():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    fun = make_field(params, F1)
    y0 = np.array([0.1, 0.0])
    fwd = integrate_field(fun, 0.0, 1.0, y0, cfg)
    y1 = fwd.states[-1]

    def fun_rev(s, y):
        return -fun(1.0 - s, y)

    back = integrate_field(fun_rev, 0.0, 1.0, y1, cfg)
    assert np.allclose(back.states[-1], y0, atol=1e-8)


def test_step_budget_error():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    cfg = IntegratorConfig(max_steps=5)
    with pytest.raises(StepBudgetError):
        evolve(0.0, 10.0, PhaseState(0.1, 0.0), params, F1, cfg)


def test_initial_state_on_threshold_rejected():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    cfg = IntegratorConfig()
    with pytest.raises(ValueError):
        evolve(0.0, 1.0, PhaseState(cfg.fall_threshold, 0.0), params, F1, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(fall_threshold=1.5)


def test_shift_periodicity_autonomous_zero():
    params = ModelParams(G=9.81, lam=0.0, dim=1)
    d = shift_periodicity_check(PhaseState(0.0, 0.0), params, Z1)
    assert d == 0.0


def test_shift_periodicity_forced():
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    cfg = IntegratorConfig()
    z = PhaseState(0.05, 0.0)
    d = shift_periodicity_check(z, params, F1, cfg)
    assert d < 100.0 * cfg.rel_tol * (1.0 + float(np.linalg.norm(z.flat())))


def test_trajectory_csv_export(tmp_path):
    params = ModelParams(G=9.81, lam=1.0, dim=1)
    traj = evolve(0.0, 0.5, PhaseState(0.1, 0.0), params, F1)
    out = tmp_path / "traj.csv"
    traj.to_csv(out)
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "t,x1,p1,y"
    row = [float(v) for v in lines[1].split(",")]
    assert row[0] == 0.0 and row[1] == 0.1 and row[2] == 0.0
    assert row[3] == pytest.approx(math.sqrt(1.0 - 0.01), rel=1e-15)
    # every stored node appears
    assert len(lines) == 1 + len(traj.t_nodes)


def test_trajectory_csv_planar_header(tmp_path):
    F2 = make_fourier_forcing(1.0, 2, [(0.5, 0.0)], [])
    params = ModelParams(G=9.81, lam=1.0, dim=2)
    traj = evolve(0.0, 0.3, PhaseState(np.zeros(2), np.zeros(2)), params, F2)
    out = tmp_path / "traj2.csv"
    traj.to_csv(out)
    assert out.read_text().split("\n", 1)[0] == "t,x1,x2,p1,p2,y"


def test_integrate_field_tight_tolerance_error_decay():
    # smoke version of the order check on an exactly known flow: the
    # harmonic oscillator integrated one period
    def fun(t, y):
        return np.array([y[1], -y[0]])

    y0 = np.array([1.0, 0.0])
    errs = []
    for rtol in (1e-5, 1e-7):
        cfg = IntegratorConfig(rel_tol=rtol, abs_tol=rtol * 1e-3)
        traj = integrate_field(fun, 0.0, TWO_PI, y0, cfg)
        errs.append(float(np.linalg.norm(traj.states[-1] - y0)))
    assert errs[1] < errs[0] / 16.0
