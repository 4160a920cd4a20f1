"""Period maps, Newton refinement, and continuation in the forcing scale.

A T-periodic solution of the rod equations is a fixed point of the period
map ``P(z) = flow from time 0 to T started at z``.  At forcing scale
``lam = 0`` the upright rest state is such a fixed point; the
continuation driver walks ``lam`` from 0 to 1, carrying the fixed point
along by a predictor-corrector scheme, and returns the periodic orbit of
the fully driven equation together with its monodromy matrix.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelParams, PhaseState, jacobian, make_field
from .errors import (ContinuationStuckError, FallError, IllConditionedError,
                     NewtonConvergenceError)
from .forcing import PeriodicSignal
from .integrator import IntegratorConfig, Trajectory, evolve, integrate_field

__all__ = [
    "ContinuationConfig",
    "PeriodicOrbitResult",
    "poincare_map",
    "poincare_jacobian",
    "newton_correct",
    "continue_in_lambda",
    "result_to_dict",
    "save_result_json",
]


@dataclass(frozen=True)
class ContinuationConfig:
    """Settings for Newton refinement and the walk in ``lam``."""

    lambda_step_init: float = 0.1
    lambda_step_min: float = 1e-4
    newton_tol: float = 1e-10
    newton_max_iters: int = 25
    fd_step: float = 1e-7

    def __post_init__(self):
        if not (0 < self.lambda_step_min <= self.lambda_step_init <= 1):
            raise ValueError("need 0 < lambda_step_min <= lambda_step_init <= 1")
        if self.newton_tol <= 0 or self.fd_step <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class PeriodicOrbitResult:
    """A refined fixed point of the period map and its certificates."""

    fixed_point: PhaseState
    residual: float
    lambda_path: list
    orbit: Trajectory
    monodromy: np.ndarray
    containment: dict | None = None

    @property
    def floquet_multipliers(self) -> np.ndarray:
        return np.linalg.eigvals(self.monodromy)


def poincare_map(z: PhaseState, params: ModelParams, F: PeriodicSignal,
                 cfg: IntegratorConfig | None = None) -> PhaseState:
    """One application of the period map.  Raises ``FallError`` on a fall."""
    cfg = cfg or IntegratorConfig()
    traj = evolve(0.0, F.period, z, params, F, cfg)
    ev = traj.fall_event
    if ev is not None:
        raise FallError(f"rod fell at t={ev.time:.6g} during the period map",
                        time=ev.time, kind=ev.kind)
    return traj.end_state()


def _variational_matrix(z: PhaseState, params: ModelParams, F: PeriodicSignal,
                        cfg: IntegratorConfig) -> np.ndarray:
    n = 2 * params.dim
    fun = make_field(params, F)

    def fun_aug(t, Y):
        y = Y[:n]
        M = Y[n:].reshape(n, n)
        dy = fun(t, y)
        J = jacobian(t, PhaseState.from_flat(y), params, F)
        return np.concatenate([dy, (J @ M).ravel()])

    Y0 = np.concatenate([z.flat(), np.eye(n).ravel()])
    traj = integrate_field(fun_aug, 0.0, F.period, Y0, cfg)
    return traj.states[-1, n:].reshape(n, n)


def poincare_jacobian(z: PhaseState, params: ModelParams, F: PeriodicSignal,
                      cfg: IntegratorConfig | None = None,
                      mode: str = "finite_difference",
                      fd_step: float = 1e-7) -> np.ndarray:
    """Derivative of the period map at ``z``.

    ``finite_difference`` uses central differences of the map itself;
    ``variational`` integrates the linearized equations alongside the
    orbit.  The two agree to the step/tolerance error and the variational
    matrix at a fixed point is the monodromy matrix of the orbit.
    """
    cfg = cfg or IntegratorConfig()
    if mode == "variational":
        return _variational_matrix(z, params, F, cfg)
    if mode != "finite_difference":
        raise ValueError(f"unknown jacobian mode: {mode!r}")
    n = 2 * params.dim
    z0 = z.flat()
    J = np.empty((n, n))
    for j in range(n):
        h = fd_step * (1.0 + abs(float(z0[j])))
        zp = z0.copy()
        zm = z0.copy()
        zp[j] += h
        zm[j] -= h
        Pp = poincare_map(PhaseState.from_flat(zp), params, F, cfg).flat()
        Pm = poincare_map(PhaseState.from_flat(zm), params, F, cfg).flat()
        J[:, j] = (Pp - Pm) / (2.0 * h)
    return J


def _newton(z0: PhaseState, params: ModelParams, F: PeriodicSignal,
            cfg: IntegratorConfig, ccfg: ContinuationConfig):
    """Bare Newton iteration on ``P(z) - z``; returns ``(z, residual)``.

    Raises ``NewtonConvergenceError`` when the iteration budget runs out,
    ``IllConditionedError`` when ``DP - I`` is numerically singular (e.g.
    at a fold), and passes through ``FallError`` from the map itself.
    """
    z = z0.flat().copy()
    n = z.shape[0]
    eye = np.eye(n)
    residual = math.inf
    for _ in range(ccfg.newton_max_iters):
        Pz = poincare_map(PhaseState.from_flat(z), params, F, cfg).flat()
        res_vec = Pz - z
        residual = float(np.linalg.norm(res_vec))
        if residual <= ccfg.newton_tol:
            return PhaseState.from_flat(z), residual
        J = poincare_jacobian(PhaseState.from_flat(z), params, F, cfg,
                              fd_step=ccfg.fd_step)
        A = J - eye
        cond = float(np.linalg.cond(A))
        if not np.isfinite(cond) or cond > 1e12:
            raise IllConditionedError(
                f"period-map Jacobian minus identity has condition {cond:.3e}",
                condition=cond)
        dz = np.linalg.solve(A, -res_vec)
        # keep the iterate strictly inside the fall threshold
        for _ in range(60):
            x_new = z[:n // 2] + dz[:n // 2]
            if float(np.linalg.norm(x_new)) < cfg.fall_threshold:
                break
            dz *= 0.5
        z = z + dz
    raise NewtonConvergenceError(
        f"no fixed point after {ccfg.newton_max_iters} iterations "
        f"(residual {residual:.3e})", residual=residual,
        iterations=ccfg.newton_max_iters)


def _finish(z: PhaseState, residual: float, path: list, params: ModelParams,
            F: PeriodicSignal, cfg: IntegratorConfig) -> PeriodicOrbitResult:
    """Attach the orbit and variational monodromy to a converged point."""
    orbit = evolve(0.0, F.period, z, params, F, cfg)
    if orbit.fall_event is not None:
        raise FallError("refined fixed point fell during its own period",
                        time=orbit.fall_event.time, kind=orbit.fall_event.kind)
    Pz = orbit.end_state().flat()
    res = float(np.linalg.norm(Pz - z.flat()))
    monodromy = poincare_jacobian(z, params, F, cfg, mode="variational")
    return PeriodicOrbitResult(fixed_point=z, residual=res,
                               lambda_path=path, orbit=orbit,
                               monodromy=monodromy)


def newton_correct(z0: PhaseState, params: ModelParams, F: PeriodicSignal,
                   cfg: IntegratorConfig | None = None,
                   ccfg: ContinuationConfig | None = None) -> PeriodicOrbitResult:
    """Refine ``z0`` to a fixed point of the period map by Newton iteration.

    The converged point is re-integrated over one period to report an
    honest residual, and the variational monodromy is attached.  Raises
    ``NewtonConvergenceError`` / ``IllConditionedError`` / ``FallError``
    as in the bare iteration.
    """
    cfg = cfg or IntegratorConfig()
    ccfg = ccfg or ContinuationConfig()
    z, residual = _newton(z0, params, F, cfg, ccfg)
    path = [(params.lam, z.flat().copy(), residual)]
    return _finish(z, residual, path, params, F, cfg)


def continue_in_lambda(params_at_zero: ModelParams, F: PeriodicSignal,
                       cfg: IntegratorConfig | None = None,
                       ccfg: ContinuationConfig | None = None) -> PeriodicOrbitResult:
    """Carry the upright fixed point from ``lam = 0`` to ``lam = 1``.

    Pure predictor-corrector walk: the converged fixed point at the current
    ``lam`` seeds Newton at the next one; failures (falls, stalled Newton,
    near-singular corrections) halve the increment, successes grow it by
    half.  Raises ``ContinuationStuckError`` once the increment falls below
    ``ccfg.lambda_step_min``.
    """
    cfg = cfg or IntegratorConfig()
    ccfg = ccfg or ContinuationConfig()
    if params_at_zero.lam != 0.0:
        params_at_zero = params_at_zero.with_lam(0.0)

    from .bounds import degree_of_autonomous_field

    if degree_of_autonomous_field(params_at_zero.G, params_at_zero.dim) == 0:
        raise ContinuationStuckError(
            "the upright rest point is degenerate; no continuation anchor",
            last_lambda=0.0)

    d = params_at_zero.dim
    z = PhaseState(np.zeros(d), np.zeros(d))
    lam = 0.0
    path = [(0.0, z.flat().copy(), 0.0)]
    step = 1.0 if F.sup_norm == 0.0 else ccfg.lambda_step_init
    last_result = None

    while lam < 1.0:
        lam_try = min(lam + step, 1.0)
        params_try = params_at_zero.with_lam(lam_try)
        try:
            z_new, residual = _newton(z, params_try, F, cfg, ccfg)
        except (FallError, NewtonConvergenceError, IllConditionedError):
            step *= 0.5
            if step < ccfg.lambda_step_min:
                raise ContinuationStuckError(
                    f"continuation stalled at lam={lam:.6g} with step below "
                    f"{ccfg.lambda_step_min}", last_lambda=lam, last_result=last_result)
            continue
        lam = lam_try
        z = z_new
        path.append((lam, z.flat().copy(), residual))
        last_result = (lam, z)
        step = min(step * 1.5, max(1.0 - lam, step))

    return _finish(z, path[-1][2], path, params_at_zero.with_lam(1.0), F, cfg)


def result_to_dict(result: PeriodicOrbitResult) -> dict:
    mult = result.floquet_multipliers
    out = {
        "fixed_point": result.fixed_point.flat().tolist(),
        "residual": result.residual,
        "lambda_path": [
            {"lam": float(l), "state": s.tolist(), "residual": float(r)}
            for l, s, r in result.lambda_path
        ],
        "monodromy": result.monodromy.tolist(),
        "floquet_multipliers": [
            {"re": float(m.real), "im": float(m.imag)} for m in mult
        ],
    }
    if result.containment is not None:
        out["containment"] = result.containment
    return out


def save_result_json(result: PeriodicOrbitResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result_to_dict(result), fh, indent=2)
        fh.write("\n")
