"""Model variants, equilibria, Jacobian, and parametric predicates.

The prey population X follows logistic growth with a generalized
(Holling II / IV / Cosner) functional response; the predator Y is a
generalist reproducing by a modified Leslie-Gower scheme, so its growth
term is (D - E/(X+A)) * Y**2.  Four variants share one right-hand side:

    NonDelayed        dX = R X (1 - X/K) - M X Y / (X^p + C)
                      dY = (D - E/(X+A)) Y^2
    DelayedPrey       logistic term uses X(t - tau)
    DelayedPredator   dY = D Y(t-tau)^2 - (E/(X+A)) Y^2
    Feedback          DelayedPrey terms (tau may be 0) with linear control
                      -u (X - X*), -u (Y - Y*) anchored at the u=0
                      interior equilibrium.

All operations are pure functions over immutable value objects and safe
to call concurrently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, NamedTuple

from .errors import NoInteriorEquilibrium, ParameterDomainError


class ModelKind(enum.Enum):
    NON_DELAYED = "NonDelayed"
    DELAYED_PREY = "DelayedPrey"
    DELAYED_PREDATOR = "DelayedPredator"
    FEEDBACK = "Feedback"


class State(NamedTuple):
    X: float
    Y: float


@dataclass(frozen=True)
class ModelParams:
    """All model constants plus the variant selector.

    R, K: prey intrinsic growth rate and carrying capacity.
    M:    maximum predation rate.
    p:    functional-response exponent (>= 1; p=1 Holling II, p=2 Holling IV).
    C:    environmental protection constant.
    D:    predator reproduction rate.
    E:    maximum predator death rate.
    A:    residual-loss constant.
    tau:  delay (>= 0), used by the delayed and feedback variants.
    u:    feedback gain (>= 0), used by the feedback variant.
    """

    R: float = 1.0
    K: float = 1.0
    M: float = 1.2
    p: float = 2.0
    C: float = 0.3
    D: float = 0.5
    E: float = 0.2
    A: float = 0.2
    tau: float = 0.0
    u: float = 0.0
    kind: ModelKind = ModelKind.NON_DELAYED

    def __post_init__(self):
        for name in ("R", "K", "M", "C", "D", "E", "A"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterDomainError(f"{name} must be strictly positive, got {v!r}")
        if not (math.isfinite(self.p) and self.p >= 1):
            raise ParameterDomainError(f"p must be >= 1, got {self.p!r}")
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise ParameterDomainError(f"tau must be >= 0, got {self.tau!r}")
        if not (math.isfinite(self.u) and self.u >= 0):
            raise ParameterDomainError(f"u must be >= 0, got {self.u!r}")
        if not isinstance(self.kind, ModelKind):
            raise ParameterDomainError(f"kind must be a ModelKind, got {self.kind!r}")

    def with_(self, **kw) -> "ModelParams":
        """Return a copy with the given fields replaced."""
        return replace(self, **kw)

    @property
    def is_delayed(self) -> bool:
        """True when the right-hand side actually reads the delayed state."""
        if self.kind is ModelKind.NON_DELAYED:
            return False
        if self.kind is ModelKind.FEEDBACK:
            return self.tau > 0
        return True


class EquilibriumKind(enum.Enum):
    EXTINCTION = "Extinction"
    PREDATOR_FREE = "PredatorFree"
    INTERIOR = "Interior"


class StabilityClass(enum.Enum):
    SADDLE = "Saddle"
    DEGENERATE = "Degenerate"
    STABLE_NODE = "StableNode"
    STABLE_SPIRAL = "StableSpiral"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_SPIRAL = "UnstableSpiral"
    CENTER_LIKE = "Center-like"


@dataclass(frozen=True)
class Equilibrium:
    kind: EquilibriumKind
    point: State
    det: float
    trace: float
    classification: StabilityClass


def _xp(x: float, p: float) -> float:
    """x**p with x clamped to 0 from below (adaptive steppers may probe x<0)."""
    if x < 0.0:
        return 0.0
    if p == 2.0:
        return x * x
    return math.pow(x, p)


@lru_cache(maxsize=4096)
def _interior_point(params: ModelParams) -> State:
    """Closed-form interior equilibrium; raises when it does not exist."""
    num = params.E - params.A * params.D
    if num <= 0.0:
        raise NoInteriorEquilibrium(
            f"E - A*D = {num:.6g} <= 0: no interior equilibrium")
    xs = num / params.D
    if xs >= params.K:
        raise NoInteriorEquilibrium(
            f"X* = {xs:.6g} >= K = {params.K:.6g}: predator nullcline outside prey range")
    ys = params.R * (1.0 - xs / params.K) * (_xp(xs, params.p) + params.C) / params.M
    if ys <= 0.0:
        raise NoInteriorEquilibrium(f"Y* = {ys:.6g} <= 0")
    return State(xs, ys)


def _feedback_anchor(params: ModelParams) -> State:
    """Control anchor (X*, Y*): interior equilibrium of the u=0 system."""
    return _interior_point(params.with_(u=0.0, kind=ModelKind.NON_DELAYED, tau=0.0))


def make_ode_rhs(params: ModelParams) -> Callable[[float, float, float], tuple]:
    """Compile the non-delayed right-hand side f(t, x, y) -> (dx, dy).

    Valid for NonDelayed and for Feedback with tau=0; delayed variants go
    through :func:`make_dde_rhs`.
    """
    if params.is_delayed:
        raise ParameterDomainError(
            f"kind {params.kind.value} with tau={params.tau} needs the DDE right-hand side")
    R, K, M, p, C, D, E, A = (params.R, params.K, params.M, params.p,
                              params.C, params.D, params.E, params.A)
    if params.kind is ModelKind.FEEDBACK:
        u = params.u
        xs, ys = _feedback_anchor(params)

        def f(t, x, y):
            if x < 0.0:
                x = 0.0
            xp = x * x if p == 2.0 else math.pow(x, p)
            dx = R * x * (1.0 - x / K) - M * x * y / (xp + C) - u * (x - xs)
            dy = (D - E / (x + A)) * y * y - u * (y - ys)
            return dx, dy
    else:

        def f(t, x, y):
            if x < 0.0:
                x = 0.0
            xp = x * x if p == 2.0 else math.pow(x, p)
            dx = R * x * (1.0 - x / K) - M * x * y / (xp + C)
            dy = (D - E / (x + A)) * y * y
            return dx, dy

    return f


def make_dde_rhs(params: ModelParams) -> Callable[[float, float, float, float, float], tuple]:
    """Compile the delayed right-hand side f(t, x, y, xdel, ydel) -> (dx, dy)."""
    R, K, M, p, C, D, E, A = (params.R, params.K, params.M, params.p,
                              params.C, params.D, params.E, params.A)
    kind = params.kind
    if kind is ModelKind.DELAYED_PREY:

        def f(t, x, y, xdel, ydel):
            if x < 0.0:
                x = 0.0
            xp = x * x if p == 2.0 else math.pow(x, p)
            dx = R * x * (1.0 - xdel / K) - M * x * y / (xp + C)
            dy = (D - E / (x + A)) * y * y
            return dx, dy
    elif kind is ModelKind.DELAYED_PREDATOR:

        def f(t, x, y, xdel, ydel):
            if x < 0.0:
                x = 0.0
            xp = x * x if p == 2.0 else math.pow(x, p)
            dx = R * x * (1.0 - x / K) - M * x * y / (xp + C)
            dy = D * ydel * ydel - (E / (x + A)) * y * y
            return dx, dy
    elif kind is ModelKind.FEEDBACK:
        u = params.u
        xs, ys = _feedback_anchor(params)

        def f(t, x, y, xdel, ydel):
            if x < 0.0:
                x = 0.0
            xp = x * x if p == 2.0 else math.pow(x, p)
            dx = R * x * (1.0 - xdel / K) - M * x * y / (xp + C) - u * (x - xs)
            dy = (D - E / (x + A)) * y * y - u * (y - ys)
            return dx, dy
    elif kind is ModelKind.NON_DELAYED:

        def f(t, x, y, xdel, ydel):
            if x < 0.0:
                x = 0.0
            xp = x * x if p == 2.0 else math.pow(x, p)
            dx = R * x * (1.0 - x / K) - M * x * y / (xp + C)
            dy = (D - E / (x + A)) * y * y
            return dx, dy
    else:  # pragma: no cover
        raise ParameterDomainError(f"unknown kind {kind!r}")
    return f


def rhs(params: ModelParams, state: State, delayed: State | None = None) -> State:
    """Evaluate the selected variant's right-hand side at one state.

    `delayed` supplies (X(t-tau), Y(t-tau)); it is ignored by the
    NonDelayed variant and defaults to `state` (the correct value at an
    equilibrium and for tau=0).
    """
    x, y = state
    if x + params.A <= 0.0 or _xp(x, params.p) + params.C <= 0.0:
        raise ParameterDomainError(f"state {state} outside the model domain")
    xd, yd = delayed if delayed is not None else state
    f = make_dde_rhs(params)
    dx, dy = f(0.0, x, y, xd, yd)
    return State(dx, dy)


def interior_equilibrium(params: ModelParams) -> Equilibrium:
    """Closed-form coexistence equilibrium E2, with local classification.

    X* = (E - A D)/D and Y* = R (1 - X*/K)((X*)^p + C)/M; both nullcline
    residuals are checked to below 1e-10.
    """
    pt = _interior_point(params)
    res_prey = params.R * (1.0 - pt.X / params.K) - params.M * pt.Y / (_xp(pt.X, params.p) + params.C)
    res_pred = params.D - params.E / (pt.X + params.A)
    if abs(res_prey) > 1e-10 or abs(res_pred) > 1e-10:  # pragma: no cover
        raise NoInteriorEquilibrium(
            f"nullcline residuals too large: {res_prey:.3g}, {res_pred:.3g}")
    j = jacobian(params, pt)
    det = j[0][0] * j[1][1] - j[0][1] * j[1][0]
    tr = j[0][0] + j[1][1]
    return Equilibrium(EquilibriumKind.INTERIOR, pt, det, tr, _classify_2d(det, tr))


def jacobian(params: ModelParams, state: State) -> tuple:
    """Closed-form Jacobian of the non-delayed vector field, as a 2x2 tuple.

    Delay and feedback-control terms are not part of this linearization;
    it is the one used for equilibrium and Hopf analysis.
    """
    x, y = state
    if x < 0.0:
        x = 0.0
    R, K, M, p, C, D, E, A = (params.R, params.K, params.M, params.p,
                              params.C, params.D, params.E, params.A)
    xp = _xp(x, p)
    denom = xp + C
    if denom <= 0.0 or x + A <= 0.0:
        raise ParameterDomainError(f"state {state} outside the model domain")
    j11 = M * y * ((p - 1.0) * xp - C) / (denom * denom) - 2.0 * R * x / K + R
    j12 = -M * x / denom
    j21 = E * y * y / ((A + x) * (A + x))
    j22 = 2.0 * y * (D - E / (A + x))
    return ((j11, j12), (j21, j22))


def _classify_2d(det: float, tr: float, tie_tol: float = 1e-12) -> StabilityClass:
    """Planar classification from determinant and trace."""
    if det < 0.0:
        return StabilityClass.SADDLE
    if abs(det) <= tie_tol:
        return StabilityClass.DEGENERATE
    if abs(tr) <= tie_tol:
        return StabilityClass.CENTER_LIKE
    disc = tr * tr - 4.0 * det
    if tr < 0.0:
        return StabilityClass.STABLE_NODE if disc > tie_tol else StabilityClass.STABLE_SPIRAL
    return StabilityClass.UNSTABLE_NODE if disc > tie_tol else StabilityClass.UNSTABLE_SPIRAL


def extinction_equilibrium(params: ModelParams) -> Equilibrium:
    """E0 = (0,0): det 0, trace R; a saddle (the prey axis repels, Y is neutral)."""
    pt = State(0.0, 0.0)
    j = jacobian(params, pt)
    det = j[0][0] * j[1][1] - j[0][1] * j[1][0]
    tr = j[0][0] + j[1][1]
    return Equilibrium(EquilibriumKind.EXTINCTION, pt, det, tr, StabilityClass.SADDLE)


def predator_free_equilibrium(params: ModelParams) -> Equilibrium:
    """E1 = (K,0): det 0, trace -R; degenerate (linearization is inconclusive)."""
    pt = State(params.K, 0.0)
    j = jacobian(params, pt)
    det = j[0][0] * j[1][1] - j[0][1] * j[1][0]
    tr = j[0][0] + j[1][1]
    return Equilibrium(EquilibriumKind.PREDATOR_FREE, pt, det, tr, StabilityClass.DEGENERATE)


@dataclass(frozen=True)
class BoundednessCheck:
    """Both inequalities of the claimed boundedness condition, with numbers."""

    holds: bool
    mu: float
    rhs1: float
    lhs2: float
    rhs2: float

    @property
    def inequality1(self) -> bool:
        return self.mu < self.rhs1

    @property
    def inequality2(self) -> bool:
        return self.lhs2 < self.rhs2


def boundedness_predicate(params: ModelParams) -> BoundednessCheck:
    """Evaluate the (disproved) sufficient-boundedness condition.

    mu = min(M, E) < D X* / ((X*)^p + C)   and
    D - E/(X* + A) < (D/M) (X*/Y*)^2.

    The model exhibits finite-time blow-up even when both inequalities
    hold, so this predicate exists to demonstrate the counterexample.
    """
    xs, ys = _interior_point(params)
    mu = min(params.M, params.E)
    rhs1 = params.D * xs / (_xp(xs, params.p) + params.C)
    lhs2 = params.D - params.E / (xs + params.A)
    rhs2 = (params.D / params.M) * (xs / ys) ** 2
    return BoundednessCheck(mu < rhs1 and lhs2 < rhs2, mu, rhs1, lhs2, rhs2)


def stability_threshold_C(params: ModelParams) -> float:
    """Critical protection constant C_H; E2 is stable exactly when C > C_H.

    C_H = ((E/D - A)^p (A D p + A D + D K p - E p - E)) / (E - A D).
    """
    num = params.E - params.A * params.D
    if num == 0.0:
        raise ParameterDomainError("E = A*D: stability threshold undefined")
    if num < 0.0:
        raise NoInteriorEquilibrium(f"E - A*D = {num:.6g} < 0")
    base = params.E / params.D - params.A
    poly = (params.A * params.D * params.p + params.A * params.D
            + params.D * params.K * params.p - params.E * params.p - params.E)
    return _xp(base, params.p) * poly / num


@dataclass(frozen=True)
class LargenessCheck:
    """Blow-up sufficiency condition on initial data, with the induced time bound."""

    holds: bool
    blowup_time_bound: float
    reason: str | None = None


def largeness_predicate(params: ModelParams, delta1: float, ic: State) -> LargenessCheck:
    """Check ln(|X0| / (E/(D-delta1) - A)) > 1/(delta1 |Y0|).

    The bound returned is 1/(delta1 |Y0|), an upper estimate for the
    blow-up time whenever the condition holds.
    """
    if delta1 <= 0.0:
        raise ParameterDomainError(f"delta1 must be > 0, got {delta1}")
    if params.D - delta1 <= 0.0:
        raise ParameterDomainError(f"D - delta1 = {params.D - delta1:.6g} <= 0")
    level = params.E / (params.D - delta1) - params.A
    if level <= 0.0:
        raise ParameterDomainError(f"E/(D-delta1) - A = {level:.6g} <= 0")
    x0, y0 = abs(ic.X), abs(ic.Y)
    bound = 1.0 / (delta1 * y0) if y0 > 0.0 else math.inf
    if x0 <= level:
        return LargenessCheck(False, bound, reason="log argument <= 1")
    return LargenessCheck(math.log(x0 / level) > bound, bound)


@dataclass(frozen=True)
class FeedbackStabilityCheck:
    """Both inequalities of the non-delayed feedback stability condition."""

    holds: bool
    A11: float
    A12: float
    A21: float
    cond1: bool
    cond2: bool


def feedback_linearization(params: ModelParams) -> tuple:
    """A11, A12, A21 of the feedback-control linearization at the u=0 equilibrium.

    A11 = M p Y* (X*)^p / ((X*)^p + C)^2,  A12 = M X* / ((X*)^p + C),
    A21 = D^2 (Y*)^2 / E.
    """
    xs, ys = _feedback_anchor(params)
    xp = _xp(xs, params.p)
    a11 = params.M * params.p * ys * xp / ((xp + params.C) ** 2)
    a12 = params.M * xs / (xp + params.C)
    a21 = params.D ** 2 * ys ** 2 / params.E
    return a11, a12, a21, xs, ys


def feedback_stability_nodelay(params: ModelParams) -> FeedbackStabilityCheck:
    """Claimed stability condition for the non-delayed feedback model.

    u > (A11 - X*)/2  and  u^2 - (A11 - X*) u + A12 A21 > 0.
    Like the boundedness predicate, satisfying it does not prevent
    blow-up; the claims suite demonstrates the counterexample.
    """
    a11, a12, a21, xs, _ = feedback_linearization(params)
    u = params.u
    cond1 = u > 0.5 * (a11 - xs)
    cond2 = u * u - (a11 - xs) * u + a12 * a21 > 0.0
    return FeedbackStabilityCheck(cond1 and cond2, a11, a12, a21, cond1, cond2)


def feedback_stability_delay_residual(params: ModelParams, omega0: float) -> tuple:
    """Characteristic-root residual and transversality for the delayed feedback model.

    Returns (residual, transversality) where

        residual = u^2 - A11 u + A12 A21 + X* u cos(w t) - w^2 + X* w sin(w t)
        transversality = (2u - A11) w + X* w cos(w t) - X* u sin(w t)

    with w = omega0 and t = tau.  The caller root-finds residual in omega0;
    a root with positive transversality realizes the claimed condition.
    """
    a11, a12, a21, xs, _ = feedback_linearization(params)
    u, tau = params.u, params.tau
    cwt = math.cos(omega0 * tau)
    swt = math.sin(omega0 * tau)
    residual = (u * u - a11 * u + a12 * a21 + xs * u * cwt
                - omega0 * omega0 + xs * omega0 * swt)
    transversality = (2.0 * u - a11) * omega0 + xs * omega0 * cwt - xs * u * swt
    return residual, transversality


def det_E2_closed_form(params: ModelParams) -> float:
    """det(J) at E2 from the closed form; strictly positive whenever E2 exists.

    det = R^2 (E - A D)(A D + D K - E)^2 ((E/D - A)^p + C) / (D E K^2 M).
    """
    _interior_point(params)  # existence guard
    R, K, M, D, E, A, C, p = (params.R, params.K, params.M, params.D,
                              params.E, params.A, params.C, params.p)
    base = E / D - A
    return (R * R * (E - A * D) * (A * D + D * K - E) ** 2 * (_xp(base, p) + C)
            / (D * E * K * K * M))


def params_to_dict(params: ModelParams) -> dict:
    """Flat serialization with the canonical key set."""
    return {
        "R": params.R, "K": params.K, "M": params.M, "p": params.p,
        "C": params.C, "D": params.D, "E": params.E, "A": params.A,
        "tau": params.tau, "u": params.u, "kind": params.kind.value,
    }


_KIND_BY_NAME = {k.value: k for k in ModelKind}
_PARAM_KEYS = ("R", "K", "M", "p", "C", "D", "E", "A", "tau", "u", "kind")


def params_from_dict(d: dict) -> ModelParams:
    """Inverse of :func:`params_to_dict`; unknown keys are rejected."""
    unknown = set(d) - set(_PARAM_KEYS)
    if unknown:
        raise ParameterDomainError(f"unknown parameter keys: {sorted(unknown)}")
    kw = {}
    for key, value in d.items():
        if key == "kind":
            if value not in _KIND_BY_NAME:
                raise ParameterDomainError(
                    f"unknown kind {value!r}; expected one of {sorted(_KIND_BY_NAME)}")
            kw[key] = _KIND_BY_NAME[value]
        else:
            kw[key] = float(value)
    return ModelParams(**kw)
