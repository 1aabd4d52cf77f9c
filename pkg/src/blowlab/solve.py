"""Adaptive Dormand-Prince 5(4) integration with dense output and events.

The stepper is the classic explicit 5(4) embedded pair with FSAL, the
Hairer PI step-size controller, and the standard quartic dense-output
interpolant.  Event localization bisects the dense output, so event
times are resolved far below step resolution.  A method-of-steps layer
handles the constant-delay variants: the integration mesh contains every
multiple of tau, and delayed states are read from the committed dense
output (or from the constant history for lookups before the start).

Everything here is a pure function of its inputs; a Trajectory is
immutable once returned.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from .errors import (OutOfSpan, ParameterDomainError, StepBudgetExceeded,
                     StepSizeUnderflow)
from .model import ModelParams, State, make_dde_rhs, make_ode_rhs

# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# Difference between the 5th- and embedded 4th-order weights.
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# Quartic dense-output weights (columns: theta, theta^2, theta^3, theta^4).
_P1 = (1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
       -12715105075.0 / 11282082432.0)
_P3 = (0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
       87487479700.0 / 32700410799.0)
_P4 = (0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
       -10690763975.0 / 1880347072.0)
_P5 = (0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
       701980252875.0 / 199316789632.0)
_P6 = (0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
       -1453857185.0 / 822651844.0)
_P7 = (0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
       69997945.0 / 29380423.0)

# Hairer PI controller constants.
_SAFETY = 0.9
_BETA = 0.04
_EXPO1 = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2   # strongest allowed shrink factor per step
_FAC_MAX = 10.0  # strongest allowed growth factor per step


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and budgets for one integration.

    `underflow_factor` sets the step floor relative to |t|; runs chasing
    the blow-up singularity very deep (thresholds near 1e16) restart the
    clock instead of lowering it (see blowup.classify).  `fixed_h`
    disables error control and steps at the given size (used by order
    measurements only).
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    h0: float | None = None
    hmax: float = math.inf
    max_steps: int = 10_000_000
    underflow_factor: float = 1e-14
    fixed_h: float | None = None

    def __post_init__(self):
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ParameterDomainError("rtol and atol must be positive")
        if self.hmax <= 0.0:
            raise ParameterDomainError("hmax must be positive")
        if self.max_steps < 1:
            raise ParameterDomainError("max_steps must be >= 1")


@dataclass(frozen=True)
class EventSpec:
    """Threshold crossing to watch for: one component, one direction."""

    component: str  # "X" or "Y"
    threshold: float
    direction: str = "rising"  # or "falling"

    def __post_init__(self):
        if self.component not in ("X", "Y"):
            raise ParameterDomainError(f"component must be X or Y, got {self.component!r}")
        if self.direction not in ("rising", "falling"):
            raise ParameterDomainError(f"direction must be rising/falling, got {self.direction!r}")
        if not math.isfinite(self.threshold):
            raise ParameterDomainError("threshold must be finite")


@dataclass(frozen=True)
class EventHit:
    time: float
    state: State
    component: str
    threshold: float
    overflow: bool = False

    def to_json_dict(self) -> dict:
        return {
            "time": self.time,
            "state": {"X": self.state.X, "Y": self.state.Y},
            "component": self.component,
            "threshold": self.threshold,
            "overflow": self.overflow,
        }


@dataclass(frozen=True)
class History:
    """Constant pre-start history (phi1, phi2) on [-tau, 0]."""

    phi1: float
    phi2: float

    def __post_init__(self):
        if not (self.phi1 > 0.0 and self.phi2 > 0.0):
            raise ParameterDomainError("history values must be strictly positive")


class Trajectory:
    """Dense numerical solution: accepted nodes plus per-step quartic coefficients.

    evaluate() reproduces stored states bitwise at the nodes and
    interpolates at interior times; evaluation outside the covered span
    raises OutOfSpan.
    """

    __slots__ = ("ts", "xs", "ys", "fxs", "fys", "_steps", "_frozen")

    def __init__(self, t0: float, x0: float, y0: float):
        self.ts = [t0]
        self.xs = [x0]
        self.ys = [y0]
        self.fxs = [math.nan]
        self.fys = [math.nan]
        self._steps = []  # (t0, h, x0, y0, qx 4-tuple, qy 4-tuple)
        self._frozen = False

    # -- construction (package internal) --------------------------------

    def _set_initial_deriv(self, fx: float, fy: float):
        self.fxs[0] = fx
        self.fys[0] = fy

    def _append_step(self, t0, h, x0, y0, qx, qy, t1, x1, y1, fx1, fy1):
        self._steps.append((t0, h, x0, y0, qx, qy))
        self.ts.append(t1)
        self.xs.append(x1)
        self.ys.append(y1)
        self.fxs.append(fx1)
        self.fys.append(fy1)

    def _truncate_last(self, te, xe, ye, fxe, fye):
        """Replace the last node with an event point inside the last step."""
        self.ts[-1] = te
        self.xs[-1] = xe
        self.ys[-1] = ye
        self.fxs[-1] = fxe
        self.fys[-1] = fye

    # -- read API --------------------------------------------------------

    @property
    def t_start(self) -> float:
        return self.ts[0]

    @property
    def t_end(self) -> float:
        return self.ts[-1]

    @property
    def n_steps(self) -> int:
        return len(self._steps)

    def final_state(self) -> State:
        return State(self.xs[-1], self.ys[-1])

    def final_derivative(self) -> State:
        return State(self.fxs[-1], self.fys[-1])

    def max_Y(self) -> float:
        return max(self.ys)

    def evaluate(self, t: float) -> State:
        """Dense-output state at time t within the covered span."""
        ts = self.ts
        if t < ts[0] or t > ts[-1]:
            raise OutOfSpan(f"t={t!r} outside [{ts[0]!r}, {ts[-1]!r}]")
        i = bisect_right(ts, t) - 1
        if i >= 0 and t == ts[i]:
            return State(self.xs[i], self.ys[i])
        if i >= len(self._steps):
            i = len(self._steps) - 1
        t0, h, x0, y0, qx, qy = self._steps[i]
        s = (t - t0) / h
        x = x0 + h * s * (qx[0] + s * (qx[1] + s * (qx[2] + s * qx[3])))
        y = y0 + h * s * (qy[0] + s * (qy[1] + s * (qy[2] + s * qy[3])))
        return State(x, y)

    def sample(self, times) -> list:
        return [self.evaluate(float(t)) for t in times]

    def to_csv(self, path, n_samples: int = 1001, times=None):
        """Write `t,X,Y` rows at the requested sampling cadence (17 significant digits)."""
        if times is None:
            a, b = self.t_start, self.t_end
            n = max(2, int(n_samples))
            times = [a + (b - a) * i / (n - 1) for i in range(n)]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,X,Y\n")
            for t in times:
                x, y = self.evaluate(float(t))
                fh.write(f"{t:.17g},{x:.17g},{y:.17g}\n")


def _initial_step(f, t0, x, y, fx, fy, rtol, atol, hmax, span):
    """Hairer-style starting step-size guess, probe clamped to the span."""
    scx = atol + rtol * abs(x)
    scy = atol + rtol * abs(y)
    d0 = math.sqrt(0.5 * ((x / scx) ** 2 + (y / scy) ** 2))
    d1 = math.sqrt(0.5 * ((fx / scx) ** 2 + (fy / scy) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, hmax, 0.5 * span)
    f1x, f1y = f(t0 + h0, x + h0 * fx, y + h0 * fy)
    if math.isfinite(f1x) and math.isfinite(f1y):
        d2 = math.sqrt(0.5 * (((f1x - fx) / scx) ** 2 + ((f1y - fy) / scy) ** 2)) / h0
    else:
        d2 = 1.0 / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, hmax)


def _dense_coeffs(k1, k3, k4, k5, k6, k7):
    """Quartic dense-output coefficients for one component."""
    return (
        _P1[0] * k1,
        _P1[1] * k1 + _P3[1] * k3 + _P4[1] * k4 + _P5[1] * k5 + _P6[1] * k6 + _P7[1] * k7,
        _P1[2] * k1 + _P3[2] * k3 + _P4[2] * k4 + _P5[2] * k5 + _P6[2] * k6 + _P7[2] * k7,
        _P1[3] * k1 + _P3[3] * k3 + _P4[3] * k4 + _P5[3] * k5 + _P6[3] * k6 + _P7[3] * k7,
    )


def _locate_event(step, event, g0_positive):
    """Bisect the dense output for the crossing; returns (theta, x, y)."""
    t0, h, x0, y0, qx, qy = step
    want_y = event.component == "Y"
    thr = event.threshold

    def g(s):
        if want_y:
            v = y0 + h * s * (qy[0] + s * (qy[1] + s * (qy[2] + s * qy[3])))
        else:
            v = x0 + h * s * (qx[0] + s * (qx[1] + s * (qx[2] + s * qx[3])))
        return v - thr

    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0.0) == g0_positive:
            lo = mid
        else:
            hi = mid
        if (hi - lo) * abs(h) <= 1e-13 * max(abs(t0), abs(t0 + h), 1e-30):
            break
    s = hi  # first point past the crossing, on the triggering side
    x = x0 + h * s * (qx[0] + s * (qx[1] + s * (qx[2] + s * qx[3])))
    y = y0 + h * s * (qy[0] + s * (qy[1] + s * (qy[2] + s * qy[3])))
    return s, x, y


def _integrate_core(f, traj, t_start, t_end, cfg, event):
    """Advance `traj` from t_start to t_end; return EventHit or None.

    Raises StepBudgetExceeded / StepSizeUnderflow with the partial
    trajectory attached.
    """
    x, y = traj.xs[-1], traj.ys[-1]
    t = t_start
    k1x, k1y = f(t, x, y)
    if not (math.isfinite(k1x) and math.isfinite(k1y)):
        raise ParameterDomainError(f"right-hand side not finite at start state ({x}, {y})")
    if math.isnan(traj.fxs[-1]):
        traj._set_initial_deriv(k1x, k1y)

    fixed = cfg.fixed_h
    if fixed is not None:
        h = min(fixed, t_end - t_start)
    elif cfg.h0 is not None:
        h = min(cfg.h0, cfg.hmax, t_end - t_start)
    else:
        h = _initial_step(f, t, x, y, k1x, k1y, cfg.rtol, cfg.atol, cfg.hmax,
                          t_end - t_start)

    rtol, atol = cfg.rtol, cfg.atol
    facold = 1e-4
    nsteps = 0
    just_rejected = False

    while t < t_end:
        if nsteps >= cfg.max_steps:
            raise StepBudgetExceeded(
                f"step budget {cfg.max_steps} exhausted at t={t!r}", traj, t)
        if h < cfg.underflow_factor * max(abs(t), 1e-12):
            raise StepSizeUnderflow(f"step size {h!r} underflowed at t={t!r}", traj, t)
        if t + h >= t_end:
            h = t_end - t
        nsteps += 1

        # Dormand-Prince stages (FSAL: k1 carried over from the last step).
        x2 = x + h * (_A21 * k1x)
        y2 = y + h * (_A21 * k1y)
        k2x, k2y = f(t + _C2 * h, x2, y2)
        x3 = x + h * (_A31 * k1x + _A32 * k2x)
        y3 = y + h * (_A31 * k1y + _A32 * k2y)
        k3x, k3y = f(t + _C3 * h, x3, y3)
        x4 = x + h * (_A41 * k1x + _A42 * k2x + _A43 * k3x)
        y4 = y + h * (_A41 * k1y + _A42 * k2y + _A43 * k3y)
        k4x, k4y = f(t + _C4 * h, x4, y4)
        x5 = x + h * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x)
        y5 = y + h * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y)
        k5x, k5y = f(t + _C5 * h, x5, y5)
        x6 = x + h * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x)
        y6 = y + h * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y)
        k6x, k6y = f(t + h, x6, y6)
        xn = x + h * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
        yn = y + h * (_B1 * k1y + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
        k7x, k7y = f(t + h, xn, yn)

        finite = (math.isfinite(xn) and math.isfinite(yn)
                  and math.isfinite(k7x) and math.isfinite(k7y))
        if finite and fixed is None:
            ex = h * (_E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
            ey = h * (_E1 * k1y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y)
            scx = atol + rtol * max(abs(x), abs(xn))
            scy = atol + rtol * max(abs(y), abs(yn))
            err = math.sqrt(0.5 * ((ex / scx) ** 2 + (ey / scy) ** 2))
        else:
            err = 0.0 if finite else math.inf

        if err <= 1.0:
            qx = _dense_coeffs(k1x, k3x, k4x, k5x, k6x, k7x)
            qy = _dense_coeffs(k1y, k3y, k4y, k5y, k6y, k7y)
            traj._append_step(t, h, x, y, qx, qy, t + h, xn, yn, k7x, k7y)

            if event is not None:
                g0 = (y if event.component == "Y" else x) - event.threshold
                g1 = (yn if event.component == "Y" else xn) - event.threshold
                crossed = ((event.direction == "rising" and g0 < 0.0 <= g1)
                           or (event.direction == "falling" and g0 > 0.0 >= g1))
                if crossed:
                    s, xe, ye = _locate_event(traj._steps[-1], event, g0 > 0.0)
                    te = t + s * h
                    fxe, fye = f(te, xe, ye)
                    traj._truncate_last(te, xe, ye, fxe, fye)
                    return EventHit(te, State(xe, ye), event.component, event.threshold)

            t += h
            x, y = xn, yn
            k1x, k1y = k7x, k7y
            if fixed is None:
                fac11 = err ** _EXPO1 if err > 0.0 else 1.0 / _FAC_MAX
                fac = fac11 / (facold ** _BETA)
                fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFETY))
                hnew = h / fac
                facold = max(err, 1e-4)
                if just_rejected:
                    hnew = min(hnew, h)
                    just_rejected = False
                h = min(hnew, cfg.hmax)
            else:
                h = fixed
        else:
            if fixed is not None:
                raise StepSizeUnderflow(
                    f"non-finite values in fixed-step mode at t={t!r}", traj, t)
            if math.isinf(err):
                h *= 0.25
            else:
                h = h / min(1.0 / _FAC_MIN, (err ** _EXPO1) / _SAFETY)
            just_rejected = True

    return None


def integrate(f, ic, t_span, config: IntegratorConfig | None = None,
              event: EventSpec | None = None):
    """Integrate a generic planar right-hand side f(t, x, y) -> (dx, dy).

    Returns (Trajectory, EventHit | None); the hit is None when t_end was
    reached without the event firing.
    """
    cfg = config or IntegratorConfig()
    t0, t_end = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t0) and math.isfinite(t_end) and t_end > t0):
        raise ParameterDomainError(f"bad t_span {t_span!r}")
    traj = Trajectory(t0, float(ic[0]), float(ic[1]))
    hit = _integrate_core(f, traj, t0, t_end, cfg, event)
    return traj, hit


def integrate_ode(params: ModelParams, ic, t_span,
                  config: IntegratorConfig | None = None,
                  event: EventSpec | None = None):
    """Integrate a non-delayed model variant from the initial state `ic`."""
    return integrate(make_ode_rhs(params), ic, t_span, config, event)


def integrate_dde(params: ModelParams, history: History, t_span,
                  config: IntegratorConfig | None = None,
                  event: EventSpec | None = None):
    """Integrate a delayed variant by the method of steps.

    The delayed state is read from the constant history for lookup times
    before the start and from the committed dense output afterwards.
    Integration restarts at every multiple of tau so derivative
    discontinuities always sit on mesh nodes.
    """
    if params.tau <= 0.0:
        raise ParameterDomainError("integrate_dde requires tau > 0")
    cfg = config or IntegratorConfig()
    t0, t_end = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t0) and math.isfinite(t_end) and t_end > t0):
        raise ParameterDomainError(f"bad t_span {t_span!r}")
    tau = params.tau
    fd = make_dde_rhs(params)
    traj = Trajectory(t0, history.phi1, history.phi2)

    def f(t, x, y):
        tq = t - tau
        if tq < t0:
            xd, yd = history.phi1, history.phi2
        else:
            # clamp to the committed frontier (rounding at segment joins
            # can land 1 ulp past it)
            xd, yd = traj.evaluate(min(tq, traj.ts[-1]))
        return fd(t, x, y, xd, yd)

    hit = None
    seg_start = t0
    k = 1
    while seg_start < t_end:
        seg_end = min(t0 + k * tau, t_end)
        if seg_end > seg_start:
            hit = _integrate_core(f, traj, seg_start, seg_end, cfg, event)
            if hit is not None:
                break
        seg_start = seg_end
        k += 1
    return traj, hit


def integrate_dde_tail(params: ModelParams, history: History, prefix: Trajectory,
                       t_span_local, config: IntegratorConfig | None = None,
                       event: EventSpec | None = None):
    """Continue a delayed run on a re-zeroed clock, starting from `prefix`'s end.

    The fresh trajectory lives on a local clock starting at 0; the
    absolute time of local t is prefix.t_end + t.  Delay lookups are
    resolved against the prefix (or the constant history before its
    start).  Used when chasing blow-up thresholds far beyond 1e8, where
    steps sized for the singularity would drown in the ulp of the
    absolute time variable.  Lookups landing inside the tail itself are
    not supported (the tail must be shorter than tau); classify()
    guarantees this before calling.
    """
    if params.tau <= 0.0:
        raise ParameterDomainError("integrate_dde_tail requires tau > 0")
    cfg = config or IntegratorConfig()
    t0, t_end = float(t_span_local[0]), float(t_span_local[1])
    if t0 != 0.0 or not (math.isfinite(t_end) and t_end > 0.0):
        raise ParameterDomainError(f"bad local t_span {t_span_local!r}")
    tau = params.tau
    offset = prefix.t_end
    if t_end > tau:
        raise ParameterDomainError("tail longer than tau: delayed lookups would self-reference")
    fd = make_dde_rhs(params)
    x0, y0 = prefix.final_state()
    traj = Trajectory(0.0, x0, y0)

    def f(t, x, y):
        tq = offset + t - tau
        if tq < prefix.t_start:
            xd, yd = history.phi1, history.phi2
        else:
            xd, yd = prefix.evaluate(min(tq, prefix.t_end))
        return fd(t, x, y, xd, yd)

    # Honour mesh restarts at absolute multiples of tau falling inside the tail.
    hit = None
    seg_start = 0.0
    while seg_start < t_end:
        k = math.floor((offset + seg_start) / tau) + 1
        seg_end = min(k * tau - offset, t_end)
        if seg_end <= seg_start:
            seg_end = t_end
        hit = _integrate_core(f, traj, seg_start, seg_end, cfg, event)
        if hit is not None:
            break
        seg_start = seg_end
    return traj, hit
