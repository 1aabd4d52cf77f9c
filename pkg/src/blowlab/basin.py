"""Basin-of-attraction sweeps, blow-up boundary extraction, and boundary fits.

The sweep classifies every grid cell independently.  Cells are advanced
in lockstep by a vectorized replica of the scalar Dormand-Prince
stepper: each lane carries its own time, step size, and controller
state, so per-cell results are independent of how cells are grouped
into batches (or distributed over worker processes).  Precision paths
(boundary refinement, acceptance T* values) always go through the
scalar integrator in blowup.classify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blowup import BlowupConfig, OutcomeLabel, classify
from .errors import (DomainViolation, NoTransition, ParameterDomainError,
                     SingularJacobian)
from .model import ModelKind, ModelParams, State, largeness_predicate
from .solve import IntegratorConfig

LABEL_BOUNDED = 0
LABEL_BLOWUP = 1
LABEL_FAILURE = 2
_LABEL_NAMES = {LABEL_BOUNDED: "Bounded", LABEL_BLOWUP: "BlowUp", LABEL_FAILURE: "Failure"}


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid of initial conditions, endpoints included."""

    x_range: tuple = (0.0, 100.0)
    y_range: tuple = (0.0, 100.0)
    nx: int = 300
    ny: int = 300

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ParameterDomainError("nx and ny must be >= 2")
        if not (self.x_range[1] > self.x_range[0] and self.y_range[1] > self.y_range[0]):
            raise ParameterDomainError("degenerate grid ranges")

    def xs(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.y_range[0], self.y_range[1], self.ny)


@dataclass
class BasinGrid:
    """Labels (nx, ny) plus the blow-up time where applicable."""

    spec: GridSpec
    labels: np.ndarray          # int8, LABEL_* codes, shape (nx, ny)
    t_star: np.ndarray          # float, NaN unless BlowUp
    failures: list = field(default_factory=list)  # (i, j, cause)

    def label_at(self, i: int, j: int) -> str:
        return _LABEL_NAMES[int(self.labels[i, j])]

    def cell_index_nearest(self, x: float, y: float) -> tuple:
        i = int(np.argmin(np.abs(self.spec.xs() - x)))
        j = int(np.argmin(np.abs(self.spec.ys() - y)))
        return i, j

    def counts(self) -> dict:
        return {name: int(np.sum(self.labels == code))
                for code, name in _LABEL_NAMES.items()}

    def to_csv(self, path):
        xs, ys = self.spec.xs(), self.spec.ys()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x0,y0,label,t_star\n")
            for i, xv in enumerate(xs):
                for j, yv in enumerate(ys):
                    ts = self.t_star[i, j]
                    tss = f"{ts:.17g}" if math.isfinite(ts) else ""
                    fh.write(f"{xv:.17g},{yv:.17g},{_LABEL_NAMES[int(self.labels[i, j])]},{tss}\n")

    @staticmethod
    def from_csv(path) -> "BasinGrid":
        xs, ys, labs, tss = [], [], [], []
        code = {v: k for k, v in _LABEL_NAMES.items()}
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if header.strip() != "x0,y0,label,t_star":
                raise ParameterDomainError(f"unexpected basin CSV header: {header!r}")
            for line in fh:
                x, y, lab, ts = line.rstrip("\n").split(",")
                xs.append(float(x)); ys.append(float(y))
                labs.append(code[lab]); tss.append(float(ts) if ts else math.nan)
        ux = sorted(set(xs)); uy = sorted(set(ys))
        spec = GridSpec((ux[0], ux[-1]), (uy[0], uy[-1]), len(ux), len(uy))
        labels = np.array(labs, dtype=np.int8).reshape(len(ux), len(uy))
        t_star = np.array(tss, dtype=float).reshape(len(ux), len(uy))
        return BasinGrid(spec, labels, t_star)


# ----------------------------------------------------------------------
# Vectorized lockstep classification engine
# ----------------------------------------------------------------------

from .solve import (_A21, _A31, _A32, _A41, _A42, _A43, _A51, _A52, _A53,  # noqa: E402
                    _A54, _A61, _A62, _A63, _A64, _A65, _B1, _B3, _B4, _B5,
                    _B6, _C2, _C3, _C4, _C5, _E1, _E3, _E4, _E5, _E6, _E7,
                    _EXPO1, _BETA, _SAFETY, _FAC_MIN, _FAC_MAX, _P1, _P3,
                    _P4, _P5, _P6, _P7)


def _make_batch_rhs(params: ModelParams):
    R, K, M, p, C, D, E, A = (params.R, params.K, params.M, params.p,
                              params.C, params.D, params.E, params.A)
    if params.kind is ModelKind.FEEDBACK:
        from .model import _feedback_anchor
        u = params.u
        xs, ys = _feedback_anchor(params)

        def fb(x, y):
            xc = np.maximum(x, 0.0)
            xp = xc * xc if p == 2.0 else np.power(xc, p)
            dx = R * xc * (1.0 - xc / K) - M * xc * y / (xp + C) - u * (xc - xs)
            dy = (D - E / (xc + A)) * y * y - u * (y - ys)
            return dx, dy
    else:

        def fb(x, y):
            xc = np.maximum(x, 0.0)
            xp = xc * xc if p == 2.0 else np.power(xc, p)
            dx = R * xc * (1.0 - xc / K) - M * xc * y / (xp + C)
            dy = (D - E / (xc + A)) * y * y
            return dx, dy

    return fb


def _batch_classify(fb, x0, y0, theta, t_max, icfg: IntegratorConfig):
    """Classify many cells at once; returns (labels, t_star, underflow)."""
    n = x0.size
    rtol, atol = icfg.rtol, icfg.atol
    uf = icfg.underflow_factor
    max_steps = icfg.max_steps

    t = np.zeros(n)
    x = x0.astype(float).copy()
    y = y0.astype(float).copy()
    label = np.full(n, -1, dtype=np.int8)
    t_star = np.full(n, np.nan)
    underflow = np.zeros(n, dtype=bool)

    hit0 = y >= theta
    label[hit0] = LABEL_BLOWUP
    t_star[hit0] = 0.0

    k1x, k1y = fb(x, y)
    # Vectorized starting step: the scalar probe-based guess is overkill here.
    scx = atol + rtol * np.abs(x)
    scy = atol + rtol * np.abs(y)
    d0 = np.sqrt(0.5 * ((x / scx) ** 2 + (y / scy) ** 2))
    d1 = np.sqrt(0.5 * ((k1x / scx) ** 2 + (k1y / scy) ** 2))
    h = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    h = np.minimum(h, t_max)

    facold = np.full(n, 1e-4)
    just_rejected = np.zeros(n, dtype=bool)
    nsteps = np.zeros(n, dtype=np.int64)

    active = np.nonzero(label == -1)[0]
    while active.size:
        idx = active
        ti, xi, yi, hi = t[idx], x[idx], y[idx], h[idx]
        k1xi, k1yi = k1x[idx], k1y[idx]

        under = hi < uf * np.maximum(np.abs(ti), 1e-12)
        if under.any():
            g = idx[under]
            label[g] = LABEL_BLOWUP
            t_star[g] = t[g]
            underflow[g] = True
            keep = ~under
            idx, ti, xi, yi, hi = idx[keep], ti[keep], xi[keep], yi[keep], hi[keep]
            k1xi, k1yi = k1xi[keep], k1yi[keep]
            if idx.size == 0:
                active = np.nonzero(label == -1)[0]
                continue

        final = hi >= (t_max - ti)
        hi = np.where(final, t_max - ti, hi)
        nsteps[idx] += 1

        x2 = xi + hi * (_A21 * k1xi)
        y2 = yi + hi * (_A21 * k1yi)
        k2x, k2y = fb(x2, y2)
        x3 = xi + hi * (_A31 * k1xi + _A32 * k2x)
        y3 = yi + hi * (_A31 * k1yi + _A32 * k2y)
        k3x, k3y = fb(x3, y3)
        x4 = xi + hi * (_A41 * k1xi + _A42 * k2x + _A43 * k3x)
        y4 = yi + hi * (_A41 * k1yi + _A42 * k2y + _A43 * k3y)
        k4x, k4y = fb(x4, y4)
        x5 = xi + hi * (_A51 * k1xi + _A52 * k2x + _A53 * k3x + _A54 * k4x)
        y5 = yi + hi * (_A51 * k1yi + _A52 * k2y + _A53 * k3y + _A54 * k4y)
        k5x, k5y = fb(x5, y5)
        x6 = xi + hi * (_A61 * k1xi + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x)
        y6 = yi + hi * (_A61 * k1yi + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y)
        k6x, k6y = fb(x6, y6)
        xn = xi + hi * (_B1 * k1xi + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
        yn = yi + hi * (_B1 * k1yi + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
        k7x, k7y = fb(xn, yn)

        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            ex = hi * (_E1 * k1xi + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
            ey = hi * (_E1 * k1yi + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y)
            scx = atol + rtol * np.maximum(np.abs(xi), np.abs(xn))
            scy = atol + rtol * np.maximum(np.abs(yi), np.abs(yn))
            err = np.sqrt(0.5 * ((ex / scx) ** 2 + (ey / scy) ** 2))
        finite = np.isfinite(xn) & np.isfinite(yn) & np.isfinite(k7x) & np.isfinite(k7y)
        err = np.where(finite & np.isfinite(err), err, np.inf)
        acc = err <= 1.0

        # -- accepted lanes ------------------------------------------------
        if acc.any():
            ga = idx[acc]
            tn_a = ti[acc] + hi[acc]
            crossed = (yi[acc] < theta) & (yn[acc] >= theta)
            if crossed.any():
                sel = np.nonzero(crossed)[0]
                a_sel = np.nonzero(acc)[0][sel]
                # dense quartic coefficients for the crossing lanes only
                qy1 = _P1[0] * k1yi[a_sel]
                qy2 = (_P1[1] * k1yi[a_sel] + _P3[1] * k3y[a_sel] + _P4[1] * k4y[a_sel]
                       + _P5[1] * k5y[a_sel] + _P6[1] * k6y[a_sel] + _P7[1] * k7y[a_sel])
                qy3 = (_P1[2] * k1yi[a_sel] + _P3[2] * k3y[a_sel] + _P4[2] * k4y[a_sel]
                       + _P5[2] * k5y[a_sel] + _P6[2] * k6y[a_sel] + _P7[2] * k7y[a_sel])
                qy4 = (_P1[3] * k1yi[a_sel] + _P3[3] * k3y[a_sel] + _P4[3] * k4y[a_sel]
                       + _P5[3] * k5y[a_sel] + _P6[3] * k6y[a_sel] + _P7[3] * k7y[a_sel])
                yc, hc = yi[a_sel], hi[a_sel]
                lo = np.zeros(sel.size)
                hi_b = np.ones(sel.size)
                for _ in range(60):
                    mid = 0.5 * (lo + hi_b)
                    v = yc + hc * mid * (qy1 + mid * (qy2 + mid * (qy3 + mid * qy4)))
                    below = v < theta
                    lo = np.where(below, mid, lo)
                    hi_b = np.where(below, hi_b, mid)
                g = ga[sel]
                label[g] = LABEL_BLOWUP
                t_star[g] = ti[acc][sel] + hi_b * hc

            done = (~crossed) & (tn_a >= t_max)
            if done.any():
                label[ga[done]] = LABEL_BOUNDED

            run = ~(crossed | done)
            gr = ga[run]
            t[gr] = tn_a[run]
            x[gr] = xn[acc][run]
            y[gr] = yn[acc][run]
            k1x[gr] = k7x[acc][run]
            k1y[gr] = k7y[acc][run]
            erra = np.maximum(err[acc], 1e-16)
            fac11 = erra ** _EXPO1
            fac = fac11 / (facold[ga] ** _BETA)
            fac = np.maximum(1.0 / _FAC_MAX, np.minimum(1.0 / _FAC_MIN, fac / _SAFETY))
            hnew = hi[acc] / fac
            hnew = np.where(just_rejected[ga], np.minimum(hnew, hi[acc]), hnew)
            h[ga] = np.minimum(hnew, icfg.hmax)
            facold[ga] = np.maximum(err[acc], 1e-4)
            just_rejected[ga] = False

        # -- rejected lanes ------------------------------------------------
        rej = ~acc
        if rej.any():
            gr = idx[rej]
            errr = err[rej]
            shrink = np.where(np.isfinite(errr),
                              1.0 / np.minimum(1.0 / _FAC_MIN, (np.maximum(errr, 1e-16) ** _EXPO1) / _SAFETY),
                              0.25)
            h[gr] = hi[rej] * shrink
            just_rejected[gr] = True

        over = nsteps[idx] >= max_steps
        if over.any():
            g = idx[over & (label[idx] == -1)]
            label[g] = LABEL_FAILURE

        active = np.nonzero(label == -1)[0]

    return label, t_star, underflow


def _axis_labels_nondelayed(params: ModelParams, ys: np.ndarray, theta, t_max):
    """Analytic labels for the invariant X=0 column of the non-delayed model.

    On the prey axis dY/dt = (D - E/A) Y^2, a pure Riccati equation.
    """
    rate = params.D - params.E / params.A
    labels = np.full(ys.size, LABEL_BOUNDED, dtype=np.int8)
    tstar = np.full(ys.size, np.nan)
    if rate > 0.0:
        pos = ys > 0.0
        ts = np.full(ys.size, np.inf)
        ts[pos] = (1.0 / ys[pos] - 1.0 / theta) / rate
        blow = pos & (ts <= t_max)
        labels[blow] = LABEL_BLOWUP
        tstar[blow] = np.maximum(ts[blow], 0.0)
    hit0 = ys >= theta
    labels[hit0] = LABEL_BLOWUP
    tstar[hit0] = 0.0
    return labels, tstar


def _sweep_chunk(args):
    params, x0, y0, theta, t_max, icfg = args
    fb = _make_batch_rhs(params)
    return _batch_classify(fb, x0, y0, theta, t_max, icfg)


def sweep(params: ModelParams, spec: GridSpec | None = None,
          config: BlowupConfig | None = None,
          integ: IntegratorConfig | None = None,
          workers: int = 1) -> BasinGrid:
    """Classify every cell of the grid; deterministic for any worker count.

    Only the tau=0 kinds are swept (the basin figures use the non-delayed
    and feedback models); delayed sweeps would need a per-cell history
    and are out of scope.
    """
    spec = spec or GridSpec()
    cfg = config or BlowupConfig()
    icfg = integ or IntegratorConfig()
    if params.is_delayed:
        raise ParameterDomainError("sweep supports tau=0 kinds only")
    if params.kind is ModelKind.FEEDBACK:
        from .model import _feedback_anchor
        _feedback_anchor(params)  # existence guard

    xs, ys = spec.xs(), spec.ys()
    labels = np.empty((spec.nx, spec.ny), dtype=np.int8)
    t_star = np.full((spec.nx, spec.ny), np.nan)
    failures: list = []

    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    mask = np.ones_like(xg, dtype=bool)

    if params.kind is ModelKind.NON_DELAYED:
        # X=0 column is invariant (analytic Riccati); Y=0 row never grows.
        zero_cols = np.nonzero(xs == 0.0)[0]
        for i in zero_cols:
            labels[i, :], t_star[i, :] = _axis_labels_nondelayed(params, ys, cfg.theta, cfg.t_max)
            mask[i, :] = False
        zero_rows = np.nonzero(ys == 0.0)[0]
        for j in zero_rows:
            labels[mask[:, j], j] = LABEL_BOUNDED
            mask[:, j] = False

    flat_idx = np.nonzero(mask.ravel())[0]
    x0 = xg.ravel()[flat_idx]
    y0 = yg.ravel()[flat_idx]

    nw = max(1, int(workers))
    if nw == 1 or flat_idx.size < 2 * nw:
        fb = _make_batch_rhs(params)
        lab, ts, unf = _batch_classify(fb, x0, y0, cfg.theta, cfg.t_max, icfg)
    else:
        import multiprocessing as mp
        chunks = np.array_split(np.arange(flat_idx.size), nw)
        jobs = [(params, x0[c], y0[c], cfg.theta, cfg.t_max, icfg) for c in chunks]
        with mp.get_context("fork").Pool(nw) as pool:
            parts = pool.map(_sweep_chunk, jobs)
        lab = np.concatenate([p[0] for p in parts])
        ts = np.concatenate([p[1] for p in parts])
        unf = np.concatenate([p[2] for p in parts])

    lr = labels.ravel()
    tr = t_star.ravel()
    lr[flat_idx] = lab
    tr[flat_idx] = ts
    for k in np.nonzero(lab == LABEL_FAILURE)[0]:
        i, j = divmod(int(flat_idx[k]), spec.ny)
        failures.append((i, j, "step budget exceeded"))
    return BasinGrid(spec, labels, t_star, failures)


# ----------------------------------------------------------------------
# Boundary extraction
# ----------------------------------------------------------------------

@dataclass
class BoundaryCurve:
    """Lowest-Y blow-up onset per x-column, refined by bisection."""

    x: np.ndarray
    y: np.ndarray
    dy_tol: float
    skipped_columns: list = field(default_factory=list)  # (i, reason)

    def interpolant(self):
        """Monotone shape-preserving piecewise-cubic interpolant (PCHIP)."""
        from scipy.interpolate import PchipInterpolator
        return PchipInterpolator(self.x, self.y)

    def monotone_decreasing_report(self) -> dict:
        """Diagnostic only: is the boundary monotone decreasing in x?"""
        dy = np.diff(self.y)
        rising = np.nonzero(dy > 0)[0]
        return {
            "monotone_decreasing": bool(rising.size == 0),
            "n_rising_segments": int(rising.size),
            "rising_at_x": [float(self.x[i]) for i in rising[:20]],
        }

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x,y\n")
            for xv, yv in zip(self.x, self.y):
                fh.write(f"{xv:.17g},{yv:.17g}\n")


def extract_boundary(grid: BasinGrid, params: ModelParams,
                     config: BlowupConfig | None = None,
                     dy_tol: float = 0.05,
                     integ: IntegratorConfig | None = None) -> BoundaryCurve:
    """Per x-column, bracket the lowest Bounded->BlowUp transition and bisect it.

    Bisection re-classifies fresh initial conditions through the scalar
    path (labels are categorical; interpolating them is meaningless).
    Failure cells are bridged over; columns without a transition are
    skipped and recorded.
    """
    cfg = config or BlowupConfig()
    xs, ys = grid.spec.xs(), grid.spec.ys()
    bx, by, skipped = [], [], []
    for i, xv in enumerate(xs):
        col = grid.labels[i, :]
        y_lo = y_hi = None
        last_bounded_y = None
        for j in range(grid.spec.ny):
            lab = int(col[j])
            if lab == LABEL_FAILURE:
                continue
            if lab == LABEL_BOUNDED:
                last_bounded_y = ys[j]
            elif lab == LABEL_BLOWUP and last_bounded_y is not None:
                y_lo, y_hi = last_bounded_y, ys[j]
                break
        if y_lo is None:
            skipped.append((i, "NoTransition"))
            continue
        while y_hi - y_lo > dy_tol:
            mid = 0.5 * (y_lo + y_hi)
            out = classify(params, State(xv, mid), cfg, integ)
            if out.label is OutcomeLabel.BLOWUP:
                y_hi = mid
            elif out.label is OutcomeLabel.BOUNDED:
                y_lo = mid
            else:
                skipped.append((i, "Failure during refinement"))
                break
        else:
            bx.append(float(xv))
            by.append(0.5 * (y_lo + y_hi))
    if not bx:
        raise NoTransition("no column contains a Bounded->BlowUp transition")
    return BoundaryCurve(np.asarray(bx), np.asarray(by), dy_tol, skipped)


# ----------------------------------------------------------------------
# Boundary-model fitting (Levenberg-Marquardt)
# ----------------------------------------------------------------------

RATIONAL = "rational"        # phi(x) = a x / (b x - c)
INVERSE_LOG = "inverse_log"  # phi(x) = 1 / (b ln(c x))


@dataclass
class BoundaryFit:
    family: str
    params: tuple
    rmse: float
    converged: bool
    iterations: int
    history: list  # (iteration, rmse, damping)

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == RATIONAL:
            a, b, c = self.params
            return a * x / (b * x - c)
        b, c = self.params
        return 1.0 / (b * np.log(c * x))

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "params": list(self.params),
            "rmse": self.rmse,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _rational_residual_jac(p, x, y):
    a, b, c = p
    den = b * x - c
    if np.any(den <= 0.0):
        return None, None
    r = a * x / den - y
    j = np.empty((x.size, 3))
    j[:, 0] = x / den
    j[:, 1] = -a * x * x / den ** 2
    j[:, 2] = a * x / den ** 2
    return r, j


def _invlog_residual_jac(p, x, y):
    b, c = p
    if c <= 0.0 or np.any(c * x <= 1.0):
        return None, None
    L = np.log(c * x)
    r = 1.0 / (b * L) - y
    j = np.empty((x.size, 2))
    j[:, 0] = -1.0 / (b * b * L)
    j[:, 1] = -1.0 / (b * L * L * c)
    return r, j


def _init_rational(x, y):
    """Exact three-point interpolation: a x - b x y + c y = 0 (homogeneous)."""
    ii = [0, len(x) // 2, len(x) - 1]
    rows = np.array([[x[i], -x[i] * y[i], y[i]] for i in ii])
    _, _, vt = np.linalg.svd(rows)
    p = vt[-1]
    # orient so the denominator is positive over the data
    if np.median(p[1] * x - p[2]) < 0:
        p = -p
    return p


def _init_invlog(x, y):
    """Log-linear regression of 1/y against ln x."""
    lx = np.log(x)
    b, q = np.polyfit(lx, 1.0 / y, 1)
    if b == 0.0:
        raise DomainViolation("degenerate inverse-log initialization (zero slope)")
    c = math.exp(q / b)
    return np.array([b, c])


def fit_boundary(curve: BoundaryCurve, family: str = RATIONAL,
                 max_iter: int = 200, rel_tol: float = 1e-10,
                 lam0: float = 1e-3) -> BoundaryFit:
    """Levenberg-Marquardt least squares of the chosen boundary family.

    Damping starts at 1e-3 and is divided/multiplied by 10 on
    accept/reject; convergence is declared on relative parameter change
    below 1e-10 (or the iteration cap).  Steps leaving the family's
    domain (non-positive denominator, c x <= 1) are rejected like any
    uphill step.
    """
    x, y = np.asarray(curve.x, dtype=float), np.asarray(curve.y, dtype=float)
    if x.size < 5:
        raise ParameterDomainError("need at least 5 boundary points to fit")
    if family == RATIONAL:
        p = _init_rational(x, y)
        resjac = _rational_residual_jac
    elif family == INVERSE_LOG:
        p = _init_invlog(x, y)
        resjac = _invlog_residual_jac
    else:
        raise ParameterDomainError(f"unknown family {family!r}")

    r, j = resjac(p, x, y)
    if r is None:
        raise DomainViolation(f"{family} initialization outside its domain")
    sse = float(r @ r)
    lam = lam0
    history = [(0, math.sqrt(sse / x.size), lam)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jtj = j.T @ j
        g = j.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0.0] = 1e-300
        try:
            step = np.linalg.solve(jtj + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc), tuple(p)) from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("non-finite LM step", tuple(p))
        p_try = p + step
        r_try, j_try = resjac(p_try, x, y)
        if r_try is not None:
            sse_try = float(r_try @ r_try)
        else:
            sse_try = math.inf
        if sse_try <= sse:
            rel_change = float(np.max(np.abs(step) / (np.abs(p) + 1e-300)))
            p, r, j, sse = p_try, r_try, j_try, sse_try
            lam = max(lam / 10.0, 1e-14)
            history.append((it, math.sqrt(sse / x.size), lam))
            if rel_change < rel_tol:
                converged = True
                break
        else:
            lam *= 10.0
            history.append((it, math.sqrt(sse / x.size), lam))
            if lam > 1e14:
                converged = True  # damping saturated: stationary to machine noise
                break
    return BoundaryFit(family, tuple(float(v) for v in p),
                       math.sqrt(sse / x.size), converged, it, history)


def constant_fit_rmse(curve: BoundaryCurve) -> float:
    """RMSE of the best constant model, the baseline any family must beat."""
    y = np.asarray(curve.y, dtype=float)
    return float(np.sqrt(np.mean((y - y.mean()) ** 2)))


# ----------------------------------------------------------------------
# Conjectured blow-up region check
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ConjectureRegionReport:
    sufficient_holds: bool
    violations: int
    predicate_cells: int
    vacuous: bool = False
    sample_violations: tuple = ()


def conjecture_region_check(grid: BasinGrid, params: ModelParams,
                            delta1: float) -> ConjectureRegionReport:
    """Test the conjectured sufficiency: largeness predicate => BlowUp label.

    Counts cells where the predicate holds but the sweep label is not
    BlowUp.  The converse direction is intentionally not checked (the
    condition claims sufficiency, not necessity).  An inadmissible
    delta1 makes the predicate vacuous.
    """
    try:
        largeness_predicate(params, delta1, State(1.0, 1.0))
    except ParameterDomainError:
        return ConjectureRegionReport(True, 0, 0, vacuous=True)
    level = params.E / (params.D - delta1) - params.A
    xs, ys = grid.spec.xs(), grid.spec.ys()
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.log(np.abs(xg) / level)
        bound = np.where(np.abs(yg) > 0.0, 1.0 / (delta1 * np.abs(yg)), np.inf)
    holds = (np.abs(xg) > level) & (lhs > bound)
    viol = holds & (grid.labels != LABEL_BLOWUP)
    n_viol = int(np.sum(viol))
    sample = []
    if n_viol:
        vi, vj = np.nonzero(viol)
        for i, j in list(zip(vi, vj))[:20]:
            sample.append((float(xs[i]), float(ys[j]), grid.label_at(i, j)))
    return ConjectureRegionReport(n_viol == 0, n_viol, int(np.sum(holds)),
                                  sample_violations=tuple(sample))
