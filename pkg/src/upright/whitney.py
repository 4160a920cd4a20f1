"""Finding a non-falling initial rod position for a finite journey.

Release the rod at rest at position ``x0``: if ``x0`` is far left the rod
falls to the left, far right it falls to the right, and the classification
is computable for any start.  Bisecting on the released position therefore
traps an initial condition whose trajectory survives the whole journey
window.  After ``k`` halvings the bracket has width ``2 * 0.999 * 2^-k``
and its midpoint survives for longer and longer, which is the constructive
shadow of the intermediate-value existence argument.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import ModelParams, PhaseState
from .errors import BracketError
from .forcing import PeriodicSignal
from .integrator import EventKind, IntegratorConfig, evolve

__all__ = [
    "FallClass",
    "JourneySpec",
    "BisectionStep",
    "SurvivorSearchResult",
    "classify",
    "bisect_survivor",
    "transcript_to_csv",
    "planar_survivor_grid",
]


class FallClass(str, Enum):
    FALLS_NEGATIVE = "falls_negative"
    FALLS_POSITIVE = "falls_positive"
    SURVIVES = "survives"


@dataclass(frozen=True)
class JourneySpec:
    """Forcing, horizon, and gravity ratio for one journey.

    The signal is only ever evaluated on ``[0, t_end]``; its periodic
    extension outside the window does not matter, so any signal whose
    period covers or tiles the window is acceptable.
    """

    F: PeriodicSignal
    t_end: float
    G: float

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.G <= 0:
            raise ValueError(f"G must be positive, got {self.G}")


@dataclass(frozen=True)
class BisectionStep:
    step: int
    left: float
    right: float
    mid: float
    outcome: FallClass
    fall_time: float  # nan when the midpoint survives


@dataclass
class SurvivorSearchResult:
    lower: float
    upper: float
    survivor: float | None
    transcript: list
    endpoint_classes: tuple

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def best(self) -> float:
        """The surviving start if one was found, else the bracket midpoint."""
        return self.survivor if self.survivor is not None else 0.5 * (self.lower + self.upper)


def _classify_with_time(x0: float, journey: JourneySpec,
                        cfg: IntegratorConfig) -> tuple[FallClass, float]:
    if not abs(x0) < 1.0:
        raise ValueError(f"|x0| must be < 1, got {x0}")
    params = ModelParams(G=journey.G, lam=1.0, dim=1)
    state = PhaseState(np.asarray([x0]), np.asarray([0.0]))
    traj = evolve(0.0, journey.t_end, state, params, journey.F, cfg)
    ev = traj.fall_event
    if ev is None:
        return FallClass.SURVIVES, math.nan
    if ev.kind is EventKind.FALL_POSITIVE:
        return FallClass.FALLS_POSITIVE, ev.time
    return FallClass.FALLS_NEGATIVE, ev.time


def classify(x0: float, journey: JourneySpec,
             cfg: IntegratorConfig | None = None) -> FallClass:
    """Fate of the rod released at rest from ``x0`` over the journey window."""
    cfg = cfg or IntegratorConfig()
    if journey.F.dim != 1:
        raise ValueError("classification by release position needs a 1-d journey")
    outcome, _ = _classify_with_time(float(x0), journey, cfg)
    return outcome


def bisect_survivor(journey: JourneySpec, cfg: IntegratorConfig | None = None,
                    depth: int = 60) -> SurvivorSearchResult:
    """Trap a non-falling release position by bisection.

    Starts from the bracket [-0.999, 0.999].  The invariant is that the
    left end falls negative and the right end falls positive; a midpoint
    that survives is returned immediately, otherwise it replaces the end
    it agrees with.  If an initial endpoint itself survives, that endpoint
    is the answer.  Raises ``BracketError`` when the initial bracket does
    not hold (then no sign change is available to bisect on).
    """
    cfg = cfg or IntegratorConfig()
    if journey.F.dim != 1:
        raise ValueError("bisection on release position needs a 1-d journey")
    left, right = -0.999, 0.999
    c_left, t_left = _classify_with_time(left, journey, cfg)
    c_right, t_right = _classify_with_time(right, journey, cfg)
    endpoints = (c_left, c_right)
    if c_left is FallClass.SURVIVES:
        return SurvivorSearchResult(left, left, left, [], endpoints)
    if c_right is FallClass.SURVIVES:
        return SurvivorSearchResult(right, right, right, [], endpoints)
    if c_left is not FallClass.FALLS_NEGATIVE or c_right is not FallClass.FALLS_POSITIVE:
        raise BracketError(
            f"no bracket: left endpoint {c_left.value}, right endpoint {c_right.value}",
            left_class=c_left, right_class=c_right)

    transcript: list[BisectionStep] = []
    for k in range(1, int(depth) + 1):
        mid = 0.5 * (left + right)
        outcome, fall_time = _classify_with_time(mid, journey, cfg)
        transcript.append(BisectionStep(k, left, right, mid, outcome, fall_time))
        if outcome is FallClass.SURVIVES:
            return SurvivorSearchResult(left, right, mid, transcript, endpoints)
        if outcome is FallClass.FALLS_NEGATIVE:
            left = mid
        else:
            right = mid
    return SurvivorSearchResult(left, right, None, transcript, endpoints)


def transcript_to_csv(result: SurvivorSearchResult, path) -> None:
    """Write the bisection log as ``step,l,r,mid,class,fall_time`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "l", "r", "mid", "class", "fall_time"])
        for s in result.transcript:
            writer.writerow([
                s.step,
                f"{s.left:.17g}",
                f"{s.right:.17g}",
                f"{s.mid:.17g}",
                s.outcome.value,
                f"{s.fall_time:.17g}",
            ])


def planar_survivor_grid(journey: JourneySpec, grid_radius: float = 0.9,
                         n: int = 21,
                         cfg: IntegratorConfig | None = None) -> dict:
    """Diagnostic sweep for the planar journey problem.

    There is no one-parameter bisection in the plane, so this simply
    classifies an n-by-n grid of rest starts and reports fall times (nan
    for survivors).  No convergence guarantee is attached; the longest
    survivor is a starting guess, not a certificate.
    """
    cfg = cfg or IntegratorConfig()
    if journey.F.dim != 2:
        raise ValueError("the survivor grid sweep needs a planar journey")
    params = ModelParams(G=journey.G, lam=1.0, dim=2)
    coords = np.linspace(-grid_radius, grid_radius, int(n))
    fall_times = np.full((n, n), math.nan)
    survived = np.zeros((n, n), dtype=bool)
    for i, x1 in enumerate(coords):
        for j, x2 in enumerate(coords):
            if math.hypot(x1, x2) >= 1.0:
                fall_times[i, j] = 0.0
                continue
            state = PhaseState(np.asarray([x1, x2]), np.zeros(2))
            traj = evolve(0.0, journey.t_end, state, params, journey.F, cfg)
            ev = traj.fall_event
            if ev is None:
                survived[i, j] = True
            else:
                fall_times[i, j] = ev.time
    return {"coords": coords, "fall_times": fall_times, "survived": survived}
