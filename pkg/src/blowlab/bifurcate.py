"""Equilibrium stability, Hopf loci, periodic orbits, and codim-2 points.

Periodic orbits are located by Newton shooting on the Poincare return
map of the section X = X* (upper branch: anchors with Y above the
equilibrium, crossed with dX/dt < 0).  One-parameter families are traced
by pseudo-arclength continuation of the return-map fixed-point equation;
folds of cycles (LPC) show up as parameter-direction reversals, and the
subcritical-Hopf end of a branch is reported as the point where the fold
test function (nontrivial multiplier minus one) vanishes with the cycle
amplitude, which is how continuation packages flag it.

The first Lyapunov coefficient uses the standard planar normal-form
formula with central finite-difference partials of the RHS transformed
to rotation coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ContinuationStalled, HopfLocusNotFound, NewtonDiverged,
                     NoInteriorEquilibrium, NoSignChange, NotOnHopfLocus,
                     ParameterDomainError, PrecisionLoss, SectionNotCrossed,
                     IntegrationError)
from .model import (Equilibrium, ModelParams, State, extinction_equilibrium,
                    interior_equilibrium, jacobian, make_ode_rhs,
                    predator_free_equilibrium, stability_threshold_C)
from .solve import EventSpec, IntegratorConfig, integrate_ode


def classify_equilibria(params: ModelParams) -> list:
    """E0, E1, and (when it exists) E2, each with its classification."""
    eqs = [extinction_equilibrium(params), predator_free_equilibrium(params)]
    try:
        eqs.append(interior_equilibrium(params))
    except NoInteriorEquilibrium:
        pass
    return eqs


# ----------------------------------------------------------------------
# First Lyapunov coefficient
# ----------------------------------------------------------------------

def planar_first_lyapunov(F, G, omega: float, h: float) -> float:
    """Normal-form cubic coefficient for u' = F(u,v), v' = G(u,v).

    The linear part must be the rotation [[0, -omega], [omega, 0]];
    negative sign means supercritical (a stable cycle emerges).
    """
    f, g = F, G
    f00 = f(0.0, 0.0)
    g00 = g(0.0, 0.0)
    fuu = (f(h, 0) - 2 * f00 + f(-h, 0)) / h ** 2
    fvv = (f(0, h) - 2 * f00 + f(0, -h)) / h ** 2
    fuv = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h ** 2)
    guu = (g(h, 0) - 2 * g00 + g(-h, 0)) / h ** 2
    gvv = (g(0, h) - 2 * g00 + g(0, -h)) / h ** 2
    guv = (g(h, h) - g(h, -h) - g(-h, h) + g(-h, -h)) / (4 * h ** 2)
    fuuu = (f(2 * h, 0) - 2 * f(h, 0) + 2 * f(-h, 0) - f(-2 * h, 0)) / (2 * h ** 3)
    fuvv = (f(h, h) - 2 * f(h, 0) + f(h, -h) - f(-h, h) + 2 * f(-h, 0) - f(-h, -h)) / (2 * h ** 3)
    guuv = (g(h, h) - 2 * g(0, h) + g(-h, h) - g(h, -h) + 2 * g(0, -h) - g(-h, -h)) / (2 * h ** 3)
    gvvv = (g(0, 2 * h) - 2 * g(0, h) + 2 * g(0, -h) - g(0, -2 * h)) / (2 * h ** 3)
    return ((fuuu + fuvv + guuv + gvvv)
            + (fuv * (fuu + fvv) - guv * (guu + gvv) - fuu * guu + fvv * gvv) / omega) / 16.0


def first_lyapunov(params: ModelParams, fd_step: float = 1e-4,
                   trace_tol: float = 1e-8) -> float:
    """First Lyapunov coefficient of E2 on the Hopf locus.

    Transforms E2 to rotation coordinates using the Jacobian's own
    columns, differentiates the transformed RHS by central differences
    at steps h and h/2, checks consistency, and returns the Richardson
    extrapolation.  The consistency check uses an absolute floor of 1e-3
    so evaluations near a Bautin zero are not spuriously rejected.
    """
    eq = interior_equilibrium(params)
    if abs(eq.trace) >= trace_tol:
        raise NotOnHopfLocus(f"|trace| = {abs(eq.trace):.3g} >= {trace_tol:g}")
    if eq.det <= 0.0:
        raise NotOnHopfLocus(f"det = {eq.det:.3g} <= 0")
    xs, ys = eq.point
    (j11, j12), (j21, j22) = jacobian(params, eq.point)
    omega = math.sqrt(eq.det)
    f = make_ode_rhs(params)

    def F(u, v):
        return f(0.0, xs + j12 * u, ys - omega * v)[0] / j12

    def G(u, v):
        return -f(0.0, xs + j12 * u, ys - omega * v)[1] / omega

    a1 = planar_first_lyapunov(F, G, omega, fd_step)
    a2 = planar_first_lyapunov(F, G, omega, fd_step / 2.0)
    # relative check with an absolute floor: the fd truncation scale is set
    # by the model's derivative magnitudes, not by l1 itself, which passes
    # through zero at Bautin points
    if abs(a1 - a2) > max(1e-3 * max(abs(a1), abs(a2)), 2e-4):
        raise PrecisionLoss(f"half-step estimates disagree: {a1:.6g} vs {a2:.6g}")
    return (4.0 * a2 - a1) / 3.0


@dataclass(frozen=True)
class HopfPoint:
    parameter: str
    value: float
    equilibrium: State
    omega: float
    l1: float

    def to_json_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "value": self.value,
            "equilibrium": {"X": self.equilibrium.X, "Y": self.equilibrium.Y},
            "omega": self.omega,
            "l1": self.l1,
        }


def hopf_in_C(params: ModelParams) -> HopfPoint:
    """Hopf point in the protection constant: C at the closed-form threshold."""
    ch = stability_threshold_C(params)
    at = params.with_(C=ch)
    eq = interior_equilibrium(at)
    omega = math.sqrt(eq.det)
    return HopfPoint("C", ch, eq.point, omega, first_lyapunov(at))


# ----------------------------------------------------------------------
# Poincare return map and periodic orbits
# ----------------------------------------------------------------------

_CYCLE_INTEG = IntegratorConfig(rtol=1e-10, atol=1e-12)


@dataclass(frozen=True)
class PeriodicOrbit:
    anchor: State          # (X*, y) on the section
    period: float
    floquet: float         # nontrivial multiplier
    stable: bool

    def to_json_dict(self) -> dict:
        return {
            "anchor": {"X": self.anchor.X, "Y": self.anchor.Y},
            "period": self.period,
            "floquet": self.floquet,
            "stable": self.stable,
        }


class _ReturnMap:
    """First return to the section X = section_x with dX/dt < 0."""

    def __init__(self, params: ModelParams, section_x: float | None = None,
                 integ: IntegratorConfig | None = None, t_cap: float | None = None):
        self.params = params
        eq = interior_equilibrium(params)
        self.equilibrium = eq
        self.section_x = eq.point.X if section_x is None else float(section_x)
        self.integ = integ or _CYCLE_INTEG
        omega = math.sqrt(max(eq.det, 1e-12))
        self.t_cap = t_cap if t_cap is not None else max(200.0, 50.0 * 2.0 * math.pi / omega)
        self._event = EventSpec("X", self.section_x, "falling")

    def __call__(self, y: float, want_traj: bool = False):
        try:
            traj, hit = integrate_ode(self.params, (self.section_x, y),
                                      (0.0, self.t_cap), self.integ, self._event)
        except IntegrationError as exc:
            raise SectionNotCrossed(f"integration failed before return: {exc}") from exc
        if hit is None:
            raise SectionNotCrossed(f"no return within t={self.t_cap:g} from y={y!r}")
        if want_traj:
            return hit.state.Y, hit.time, traj
        return hit.state.Y, hit.time

    def first_crossing(self, ic) -> tuple:
        """Ordinate and time of the first section crossing from a free state."""
        traj, hit = integrate_ode(self.params, ic, (0.0, self.t_cap),
                                  self.integ, self._event)
        if hit is None:
            raise SectionNotCrossed(f"trajectory from {ic} never crossed the section")
        return hit.state.Y, hit.time


def find_cycle(params: ModelParams, guess, section_value: float | None = None,
               integ: IntegratorConfig | None = None,
               max_iter: int = 50) -> PeriodicOrbit:
    """Newton shooting on the return map; residual below 1e-9.

    `guess` is the section ordinate (a State's Y component is used when
    a state is given).  Convergence onto the equilibrium itself (zero
    amplitude) is reported as NewtonDiverged: there is no cycle there.
    """
    pmap = _ReturnMap(params, section_value, integ)
    y = float(guess[1]) if isinstance(guess, (tuple, State)) else float(guess)
    ys_eq = pmap.equilibrium.point.Y
    if abs(y - ys_eq) < 1e-12:
        raise SectionNotCrossed("anchor is the equilibrium; it never returns to the section")
    if y < ys_eq:
        raise ParameterDomainError(
            f"anchor guess {y!r} must lie above the equilibrium ordinate {ys_eq!r}")
    period = mu = None
    for _ in range(max_iter):
        py, period = pmap(y)
        g = py - y
        eps = 1e-5 * max(abs(y), 0.1)
        pp, _ = pmap(y + eps)
        pm, _ = pmap(y - eps)
        mu = (pp - pm) / (2.0 * eps)
        denom = mu - 1.0
        if denom == 0.0:
            raise NewtonDiverged("return map derivative equals 1 (fold)")
        step = -g / denom
        y = y + step
        if abs(g) < 1e-9 and abs(step) < 1e-10 * max(1.0, abs(y)):
            break
    else:
        raise NewtonDiverged(f"no convergence in {max_iter} iterations (last residual {g:.3g})")
    py, period, traj = pmap(y, want_traj=True)
    if abs(py - y) > 1e-9:
        raise NewtonDiverged(f"residual {abs(py - y):.3g} above 1e-9 after convergence")
    amplitude = max(abs(xv - pmap.section_x) for xv in traj.xs)
    if amplitude < 1e-4:
        raise NewtonDiverged("converged to the equilibrium (no cycle at these parameters)")
    return PeriodicOrbit(State(pmap.section_x, y), period, mu, abs(mu) < 1.0)


def orbit_trajectory(params: ModelParams, orbit: PeriodicOrbit,
                     integ: IntegratorConfig | None = None):
    """One full period integrated from the anchor (for residual/Liouville checks)."""
    cfg = integ or _CYCLE_INTEG
    traj, _ = integrate_ode(params, orbit.anchor, (0.0, orbit.period), cfg)
    return traj

def liouville_multiplier(params: ModelParams, orbit: PeriodicOrbit,
                         n_samples: int = 4001) -> float:
    """exp of the divergence integral along the orbit: the product of multipliers."""
    traj = orbit_trajectory(params, orbit)
    ts = np.linspace(0.0, orbit.period, n_samples)
    div = np.empty(n_samples)
    for i, t in enumerate(ts):
        st = traj.evaluate(float(t))
        (j11, _), (_, j22) = jacobian(params, st)
        div[i] = j11 + j22
    from scipy.integrate import simpson
    return float(math.exp(simpson(div, x=ts)))


def two_cycle_certificate(params: ModelParams,
                          outer_seed_ic=(0.20, 0.192),
                          inner_seed_ic=(0.265, 0.24),
                          integ: IntegratorConfig | None = None) -> dict:
    """Locate the nested pair of cycles from inside/outside trajectory seeds.

    The outer seed's late section crossings converge onto the stable
    outer cycle; the inner seed's first crossing starts next to the
    unstable inner one.  Failures from find_cycle propagate (there may
    be no such pair at these parameters).
    """
    pmap = _ReturnMap(params, None, integ)
    y, _ = pmap.first_crossing(outer_seed_ic)
    for _ in range(12):
        y, _ = pmap(y)
    outer = find_cycle(params, y, integ=integ)
    y_in, _ = pmap.first_crossing(inner_seed_ic)
    inner = find_cycle(params, y_in, integ=integ)
    ys_eq = pmap.equilibrium.point.Y
    nested = ys_eq < inner.anchor.Y < outer.anchor.Y
    return {"inner": inner, "outer": outer, "nested": nested}


# ----------------------------------------------------------------------
# Pseudo-arclength continuation of cycles
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class FoldMarker:
    param: float
    coefficient: float  # quadratic coefficient of parameter vs arclength
    kind: str           # "fold" or "hopf_terminus"


@dataclass
class CycleBranch:
    vary: str
    points: list          # (param, PeriodicOrbit), ordered along the branch
    folds: list = field(default_factory=list)  # FoldMarker

    def fold_params(self) -> list:
        return sorted(m.param for m in self.folds)

    def to_csv(self, path):
        lpc_idx = set()
        for m in self.folds:
            if self.points:
                k = min(range(len(self.points)),
                        key=lambda i: abs(self.points[i][0] - m.param))
                lpc_idx.add(k)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("param,period,floquet,stable,is_lpc\n")
            for i, (p, orb) in enumerate(self.points):
                fh.write(f"{p:.17g},{orb.period:.17g},{orb.floquet:.17g},"
                         f"{str(orb.stable).lower()},{str(i in lpc_idx).lower()}\n")


def _quadratic_vertex(svals, pvals):
    """Fit p = c2 s^2 + c1 s + c0; return (vertex param value, c2)."""
    s = np.asarray(svals) - svals[-1]
    c2, c1, c0 = np.polyfit(s, np.asarray(pvals), 2)
    if c2 == 0.0:
        return pvals[-1], 0.0
    sv = -c1 / (2.0 * c2)
    return float(c0 - c1 * c1 / (4.0 * c2)), float(c2), float(sv)


def continue_cycles(params: ModelParams, vary: str = "D",
                    prange: tuple = (0.46, 0.47), step: float = 0.5,
                    seed: PeriodicOrbit | None = None,
                    integ: IntegratorConfig | None = None,
                    y_scale: float = 0.01, p_scale: float = 2e-4,
                    max_points: int = 300, amp_floor: float = 5e-4) -> CycleBranch:
    """Pseudo-arclength continuation of the cycle family in one parameter.

    Folds (LPC) are flagged where the parameter component of the branch
    tangent reverses; the fold coefficient is the quadratic coefficient
    of parameter against arclength through the reversal.  A branch end
    where the amplitude collapses onto the equilibrium is reported as a
    "hopf_terminus" marker at the extrapolated parameter (the fold test
    function mu-1 vanishes there together with the amplitude).
    """
    p0 = float(getattr(params, vary))
    if not (prange[0] <= p0 <= prange[1]):
        raise ParameterDomainError(f"starting {vary}={p0} outside range {prange}")
    icfg = integ or _CYCLE_INTEG

    maps: dict = {}

    def pmap_at(pv: float) -> _ReturnMap:
        if pv not in maps:
            maps[pv] = _ReturnMap(params.with_(**{vary: pv}), None, icfg)
        return maps[pv]

    def H(y, pv):
        py, T = pmap_at(pv)(y)
        return py - y, T

    def newton_fixed_param(y, pv, tol=1e-11):
        for _ in range(30):
            g, T = H(y, pv)
            eps = 1e-6 * max(abs(y), 0.1)
            gy = (H(y + eps, pv)[0] - H(y - eps, pv)[0]) / (2.0 * eps)
            if gy == 0.0:
                raise NewtonDiverged("flat return map")
            dy = -g / gy
            y += dy
            if abs(g) < tol and abs(dy) < 1e-12:
                return y, T, gy + 1.0
        raise NewtonDiverged("fixed-parameter correction failed")

    if seed is None:
        seed = two_cycle_certificate(params, integ=icfg)["outer"]
    y0 = seed.anchor.Y

    def orbit_at(y, pv, T, mu):
        return PeriodicOrbit(State(pmap_at(pv).section_x, y), T, mu, abs(mu) < 1.0)

    def equilibrium_y(pv):
        return interior_equilibrium(params.with_(**{vary: pv})).point.Y

    def trace_direction(sign: int):
        pts = [(y0, p0, seed.period, seed.floquet)]
        pv = p0 + sign * 0.25 * p_scale
        try:
            y1, T1, mu1 = newton_fixed_param(y0, pv)
        except (NewtonDiverged, SectionNotCrossed) as exc:
            raise ContinuationStalled(f"could not take the first step: {exc}") from exc
        pts.append((y1, pv, T1, mu1))
        svals = [0.0, math.hypot((y1 - y0) / y_scale, (pv - p0) / p_scale)]
        folds = []
        terminus = None
        ds = step
        prev_tp = None

        def amplitude(yq, pq):
            try:
                return abs(yq - equilibrium_y(pq))
            except NoInteriorEquilibrium:
                return math.inf

        while len(pts) < max_points:
            (ya, pa, _, _), (yb, pb, Tb, mub) = pts[-2], pts[-1]
            ty, tp = (yb - ya) / y_scale, (pb - pa) / p_scale
            norm = math.hypot(ty, tp)
            ty, tp = ty / norm, tp / norm
            if prev_tp is not None and prev_tp * tp < 0.0:
                i0 = max(0, len(pts) - 6)
                vertex_p, c2, _ = _quadratic_vertex(svals[i0:], [q[1] for q in pts[i0:]])
                # the sampled extremum bounds the true fold from inside
                local = [q[1] for q in pts[i0:]]
                vertex_p = max(vertex_p, max(local)) if c2 < 0.0 else min(vertex_p, min(local))
                folds.append(FoldMarker(vertex_p, c2, "fold"))
            prev_tp = tp
            ypred = yb + ds * ty * y_scale
            ppred = pb + ds * tp * p_scale
            yc, pc = ypred, ppred
            ok = False
            iters = 0
            for iters in range(1, 13):
                try:
                    g, Tc = H(yc, pc)
                except SectionNotCrossed:
                    break
                c2r = ty * (yc - ypred) / y_scale + tp * (pc - ppred) / p_scale
                if abs(g) < 1e-10 and abs(c2r) < 1e-10:
                    ok = True
                    break
                eps_y = 1e-6 * max(abs(yc), 0.1)
                eps_p = 1e-7 * max(abs(pc), 0.1)
                try:
                    gy = (H(yc + eps_y, pc)[0] - H(yc - eps_y, pc)[0]) / (2.0 * eps_y)
                    gp = (H(yc, pc + eps_p)[0] - H(yc, pc - eps_p)[0]) / (2.0 * eps_p)
                except SectionNotCrossed:
                    break
                det = gy * (tp / p_scale) - gp * (ty / y_scale)
                if det == 0.0:
                    break
                dy = (-g * (tp / p_scale) + gp * c2r) / det
                dp = (-gy * c2r + g * (ty / y_scale)) / det
                yc += dy
                pc += dp

            # safeguards: stay near the predictor and forbid amplitude
            # cliffs (both signatures of a jump onto the trivial branch)
            prev_amp = amplitude(yb, pb)
            if ok:
                dist = math.hypot((yc - ypred) / y_scale, (pc - ppred) / p_scale)
                amp_c = amplitude(yc, pc)
                if dist > 2.0 * ds or (amp_c < 0.5 * prev_amp and prev_amp > 4.0 * amp_floor):
                    ok = False
            if not ok:
                ds *= 0.5
                if ds < 1e-10:
                    if prev_amp < 8.0 * amp_floor:
                        break  # ran out of branch at the Hopf end
                    raise ContinuationStalled("arclength step underflowed")
                continue
            mu_c = gy + 1.0
            pts.append((yc, pc, Tc, mu_c))
            svals.append(svals[-1] + math.hypot((yc - yb) / y_scale, (pc - pb) / p_scale))
            if iters >= 6:
                ds = max(ds * 0.6, 1e-8)
            elif iters <= 2 and ds < step:
                ds = min(step, ds * 1.5)
            # branch end: amplitude collapsed onto the equilibrium (Hopf)
            if amplitude(yc, pc) < amp_floor:
                break
            if not (prange[0] <= pc <= prange[1]):
                break

        if amplitude(pts[-1][0], pts[-1][1]) < 8.0 * amp_floor:
            # the endpoint parameter IS the Hopf location up to O(amplitude^2);
            # the quadratic coefficient is kept as the local curvature record
            good = [(s, q[1]) for s, q in zip(svals, pts)
                    if amp_floor < amplitude(q[0], q[1]) < math.inf]
            if len(good) >= 4:
                _, c2, _ = _quadratic_vertex([s for s, _ in good[-6:]],
                                             [p for _, p in good[-6:]])
            else:
                c2 = 0.0
            terminus = FoldMarker(pts[-1][1], c2, "hopf_terminus")
        branch_pts = [(pq, orbit_at(yq, pq, Tq, muq)) for (yq, pq, Tq, muq) in pts]
        if terminus is not None:
            folds.append(terminus)
        return branch_pts, folds

    up_pts, up_folds = trace_direction(+1)
    down_pts, down_folds = trace_direction(-1)
    points = list(reversed(down_pts)) + up_pts[1:]
    return CycleBranch(vary, points, down_folds + up_folds)


# ----------------------------------------------------------------------
# Bautin (generalized Hopf) search
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class BautinPoint:
    p1: str
    v1: float
    p2: str
    v2: float
    hopf: HopfPoint

    def to_json_dict(self) -> dict:
        return {"p1": self.p1, "v1": self.v1, "p2": self.p2, "v2": self.v2,
                "hopf": self.hopf.to_json_dict()}


def _trace_or_none(params: ModelParams):
    try:
        return interior_equilibrium(params).trace
    except NoInteriorEquilibrium:
        return None


def hopf_locus_solve(params: ModelParams, p1: str, v1: float, p2: str,
                     lo: float, hi: float, n_scan: int = 80) -> float | None:
    """Solve trace(J at E2) = 0 for p2 in [lo, hi] at p1 = v1.

    Scan plus bisection, safeguarded against parameter regions where the
    interior equilibrium disappears.  Returns None when no admissible
    sign change exists.
    """
    base = params.with_(**{p1: v1})
    grid = np.linspace(lo, hi, n_scan)
    prev_v = prev_t = None
    for v in grid:
        tr = _trace_or_none(base.with_(**{p2: float(v)}))
        if tr is not None and prev_t is not None and tr * prev_t < 0.0:
            a, b, sa = prev_v, float(v), prev_t > 0.0
            for _ in range(80):
                m = 0.5 * (a + b)
                tm = _trace_or_none(base.with_(**{p2: m}))
                if tm is None:
                    break
                if (tm > 0.0) == sa:
                    a = m
                else:
                    b = m
            return 0.5 * (a + b)
        if tr is not None:
            prev_v, prev_t = float(v), tr
    return None


def find_bautin(params: ModelParams, p1: str, p2: str, box1: tuple, box2: tuple,
                n_scan: int = 41, p1_tol: float = 1e-5) -> BautinPoint:
    """Walk the Hopf locus over the box, bisect the sign change of l1.

    Raises HopfLocusNotFound when the locus never crosses the box and
    NoSignChange when l1 keeps one sign along it.
    """
    def locus_point(v1: float):
        v2 = hopf_locus_solve(params, p1, v1, p2, box2[0], box2[1])
        if v2 is None:
            return None, None
        at = params.with_(**{p1: v1, p2: v2})
        try:
            return v2, first_lyapunov(at, trace_tol=1e-6)
        except (NotOnHopfLocus, NoInteriorEquilibrium):
            return None, None

    samples = []
    for v1 in np.linspace(box1[0], box1[1], n_scan):
        v2, l1 = locus_point(float(v1))
        if v2 is not None:
            samples.append((float(v1), v2, l1))
    if not samples:
        raise HopfLocusNotFound(f"trace=0 locus missing from box {box1} x {box2}")
    bracket = None
    for a, b in zip(samples, samples[1:]):
        if a[2] * b[2] < 0.0:
            bracket = (a, b)
            break
    if bracket is None:
        raise NoSignChange("l1 keeps one sign along the Hopf locus in this box")
    (lo, _, l_lo), (hi, _, _) = bracket
    sa = l_lo > 0.0
    while hi - lo > p1_tol:
        mid = 0.5 * (lo + hi)
        _, lm = locus_point(mid)
        if lm is None:
            break
        if (lm > 0.0) == sa:
            lo = mid
        else:
            hi = mid
    v1 = 0.5 * (lo + hi)
    v2, l1 = locus_point(v1)
    at = params.with_(**{p1: v1, p2: v2})
    eq = interior_equilibrium(at)
    hp = HopfPoint(p1, v1, eq.point, math.sqrt(eq.det), l1)
    return BautinPoint(p1, v1, p2, v2, hp)
