"""Run classification: bounded vs finite-time blow-up, plus quench diagnostics.

A run is classified by arming a rising-threshold event on the predator
component.  "Bounded" means surviving to the horizon below the
threshold; blow-up reports the event time T*.  Thresholds far beyond
1e8 are chased in two phases with a re-zeroed clock, because near the
singularity the accuracy-limited step size drops below the ulp of the
absolute time variable (the model is autonomous, so restarting the
clock is exact).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import (NotABlowupRun, ParameterDomainError, StepBudgetExceeded,
                     StepSizeUnderflow)
from .model import ModelParams, State, make_dde_rhs, make_ode_rhs
from .solve import (EventSpec, History, IntegratorConfig, integrate,
                    integrate_dde, integrate_dde_tail, integrate_ode)

_PHASE_SPLIT = 1.0e8


class OutcomeLabel(enum.Enum):
    BOUNDED = "Bounded"
    BLOWUP = "BlowUp"
    FAILURE = "Failure"


@dataclass(frozen=True)
class BlowupConfig:
    """Threshold, horizon, and quench settings for run classification."""

    theta: float = 1.0e8
    t_max: float = 50.0
    delta1: float = 0.1
    quench_derivative_floor: float = 1.0e10

    def __post_init__(self):
        if self.theta <= 1.0:
            raise ParameterDomainError("theta must exceed 1")
        if self.t_max <= 0.0:
            raise ParameterDomainError("t_max must be positive")


@dataclass(frozen=True)
class Outcome:
    label: OutcomeLabel
    t_star: float | None
    state_at_stop: State
    dxdt_at_stop: float
    dydt_at_stop: float
    lower_bound_1_over_DY0: float
    underflow: bool = False
    overflow: bool = False
    detail: str = ""

    def to_json_dict(self) -> dict:
        return {
            "label": self.label.value,
            "t_star": self.t_star,
            "state_at_stop": {"X": self.state_at_stop.X, "Y": self.state_at_stop.Y},
            "dxdt_at_stop": self.dxdt_at_stop,
            "dydt_at_stop": self.dydt_at_stop,
            "lower_bound_1_over_DY0": self.lower_bound_1_over_DY0,
            "underflow": self.underflow,
            "overflow": self.overflow,
            "detail": self.detail,
        }


def as_history(ic) -> History:
    """Coerce an initial state into the constant history it induces."""
    if isinstance(ic, History):
        return ic
    return History(float(ic[0]), float(ic[1]))


def as_state(ic) -> State:
    if isinstance(ic, History):
        return State(ic.phi1, ic.phi2)
    return State(float(ic[0]), float(ic[1]))


def classify(params: ModelParams, ic, config: BlowupConfig | None = None,
             integ: IntegratorConfig | None = None) -> Outcome:
    """Classify one run as Bounded, BlowUp (with T*), or Failure.

    `ic` is an initial State for the non-delayed kinds, or a History (a
    plain pair is promoted to a constant history) for the delayed ones.
    A step-size underflow maps to BlowUp at the last accepted time with
    the underflow flag set: for this model family the step collapses
    only inside the blow-up funnel.
    """
    out, _ = classify_with_trajectory(params, ic, config, integ)
    return out


def classify_with_trajectory(params: ModelParams, ic,
                             config: BlowupConfig | None = None,
                             integ: IntegratorConfig | None = None):
    """classify() that also returns the dense trajectory of the run.

    For deep thresholds (above 1e8) the returned trajectory covers the
    run up to the 1e8 crossing; the singular tail lives on its own
    restarted clock and contributes only to T* and the stop state.
    """
    cfg = config or BlowupConfig()
    icfg = integ or IntegratorConfig()
    state0 = as_state(ic)
    if not (state0.X >= 0.0 and state0.Y > 0.0):
        raise ParameterDomainError(f"initial data must be positive, got {state0}")
    y0 = state0.Y
    lower = 1.0 / (params.D * y0)
    delayed = params.is_delayed
    theta1 = min(cfg.theta, _PHASE_SPLIT)

    def outcome_from(label, t_star, state, deriv, **flags):
        return Outcome(label, t_star, state, deriv[0], deriv[1], lower, **flags)

    # Phase 1: integrate on the real clock up to theta1.
    ev1 = EventSpec("Y", theta1, "rising")
    try:
        if delayed:
            hist = as_history(ic)
            traj1, hit1 = integrate_dde(params, hist, (0.0, cfg.t_max), icfg, ev1)
        else:
            traj1, hit1 = integrate_ode(params, state0, (0.0, cfg.t_max), icfg, ev1)
    except StepSizeUnderflow as exc:
        traj = exc.trajectory
        return outcome_from(OutcomeLabel.BLOWUP, exc.time, traj.final_state(),
                            traj.final_derivative(), underflow=True,
                            detail="step underflow before threshold"), traj
    except StepBudgetExceeded as exc:
        traj = exc.trajectory
        return outcome_from(OutcomeLabel.FAILURE, None, traj.final_state(),
                            traj.final_derivative(), detail="step budget exceeded"), traj

    if hit1 is None:
        return outcome_from(OutcomeLabel.BOUNDED, None, traj1.final_state(),
                            traj1.final_derivative()), traj1

    if cfg.theta <= _PHASE_SPLIT:
        return outcome_from(OutcomeLabel.BLOWUP, hit1.time, hit1.state,
                            traj1.final_derivative(), overflow=hit1.overflow), traj1

    # Phase 2: chase the deep threshold on a re-zeroed clock.
    t1 = hit1.time
    ev2 = EventSpec("Y", cfg.theta, "rising")
    try:
        if delayed:
            budget = min(cfg.t_max - t1, 0.5 * params.tau)
            if budget <= 0.0:
                raise ParameterDomainError("no time budget left for the blow-up tail")
            traj2, hit2 = integrate_dde_tail(params, hist, traj1, (0.0, budget), icfg, ev2)
            fd = make_dde_rhs(params)

            def deriv_at(tloc, st):
                tq = t1 + tloc - params.tau
                if tq < 0.0:
                    xd, yd = hist.phi1, hist.phi2
                else:
                    xd, yd = traj1.evaluate(min(tq, traj1.t_end))
                return fd(tloc, st.X, st.Y, xd, yd)
        else:
            budget = cfg.t_max - t1
            f = make_ode_rhs(params)
            traj2, hit2 = integrate(f, hit1.state, (0.0, budget), icfg, ev2)

            def deriv_at(tloc, st):
                return f(tloc, st.X, st.Y)
    except StepSizeUnderflow as exc:
        traj = exc.trajectory
        st = traj.final_state()
        return outcome_from(OutcomeLabel.BLOWUP, t1 + exc.time, st,
                            traj.final_derivative(), underflow=True,
                            detail="step underflow in the blow-up tail"), traj1
    except StepBudgetExceeded as exc:
        traj = exc.trajectory
        return outcome_from(OutcomeLabel.FAILURE, None, traj.final_state(),
                            traj.final_derivative(), detail="step budget exceeded in tail"), traj1

    if hit2 is None:
        return outcome_from(
            OutcomeLabel.FAILURE, None, traj2.final_state(), traj2.final_derivative(),
            detail=f"crossed {theta1:g} but did not reach theta={cfg.theta:g} within the tail budget"), traj1
    st = hit2.state
    return outcome_from(OutcomeLabel.BLOWUP, t1 + hit2.time, st,
                        deriv_at(hit2.time, st), overflow=hit2.overflow), traj1


@dataclass(frozen=True)
class QuenchReport:
    t_star: float
    X_at: float
    Y_at: float
    dxdt: float
    dydt: float
    quenched: bool


def quench_report(params: ModelParams, ic, config: BlowupConfig | None = None,
                  integ: IntegratorConfig | None = None) -> QuenchReport:
    """Quench diagnostics at the blow-up stop state.

    quenched is true when |dX/dt| has reached the configured floor while
    X itself stays positive and moderate (below twice max(K, X0)): the
    finite-precision signature of the prey derivative diverging at the
    predator's blow-up time.
    """
    cfg = config or BlowupConfig()
    out = classify(params, ic, cfg, integ)
    if out.label is not OutcomeLabel.BLOWUP:
        raise NotABlowupRun(f"classification was {out.label.value}")
    x0 = as_state(ic).X
    x_at, y_at = out.state_at_stop
    quenched = (abs(out.dxdt_at_stop) >= cfg.quench_derivative_floor
                and 0.0 < x_at < 2.0 * max(params.K, x0))
    return QuenchReport(out.t_star, x_at, y_at, out.dxdt_at_stop,
                        out.dydt_at_stop, quenched)


def check_lower_bound(outcome: Outcome, params: ModelParams, ic) -> bool:
    """Strict comparison lower-bound test: 1/(D Y0) < T*."""
    if outcome.label is not OutcomeLabel.BLOWUP or outcome.t_star is None:
        raise NotABlowupRun("lower bound applies to blow-up outcomes only")
    y0 = as_state(ic).Y
    return 1.0 / (params.D * y0) < outcome.t_star


@dataclass(frozen=True)
class BoundedReport:
    max_Y: float
    bounded: bool


def check_bounded_delayed_predator(params: ModelParams, history,
                                   horizon: float = 50.0,
                                   integ: IntegratorConfig | None = None) -> BoundedReport:
    """Verify the predator-gestation variant stays bounded to the horizon."""
    from .model import ModelKind
    if params.kind is not ModelKind.DELAYED_PREDATOR:
        raise ParameterDomainError("requires kind=DelayedPredator")
    if params.tau <= 0.0:
        raise ParameterDomainError("requires tau > 0")
    hist = as_history(history)
    cfg = integ or IntegratorConfig()
    try:
        traj, hit = integrate_dde(params, hist, (0.0, horizon), cfg,
                                  EventSpec("Y", _PHASE_SPLIT, "rising"))
    except StepSizeUnderflow as exc:
        return BoundedReport(exc.trajectory.max_Y(), False)
    return BoundedReport(traj.max_Y(), hit is None)
