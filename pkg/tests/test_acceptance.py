"""Acceptance suite: one test per criterion, one printed verdict line each.

Criterion 10 includes the conjectured-region zero-violation clause; the
measured sweep contradicts it (the conjectured sufficient condition is
numerically false over a large subregion, cross-validated against an
independent integrator).  That assertion is kept as stated and fails
honestly; see the decisions ledger.
"""

import math
import time

import numpy as np
import pytest

from blowlab.basin import (RATIONAL, BoundaryCurve, GridSpec,
                           conjecture_region_check, extract_boundary,
                           fit_boundary, sweep)
from blowlab.bifurcate import (continue_cycles, find_bautin, hopf_in_C,
                               liouville_multiplier, planar_first_lyapunov,
                               two_cycle_certificate)
from blowlab.blowup import (BlowupConfig, OutcomeLabel,
                            check_bounded_delayed_predator, check_lower_bound,
                            classify, quench_report)
from blowlab.model import (ModelKind, ModelParams, State,
                           boundedness_predicate, interior_equilibrium,
                           jacobian, make_ode_rhs, rhs, stability_threshold_C)
from blowlab.solve import EventSpec, History, IntegratorConfig, integrate

D05 = ModelParams()
D04 = ModelParams(D=0.4)
D4676 = ModelParams(D=0.4676)
DPREY = ModelParams(kind=ModelKind.DELAYED_PREY, tau=1.0)
DPRED = ModelParams(kind=ModelKind.DELAYED_PREDATOR, tau=1.0)


def verdict(num, ok, text):
    print(f"[criterion {num:>2}] {'PASS' if ok else 'FAIL'}: {text}")
    return ok


def test_criterion_01_blowup_time_nondelayed():
    t0 = time.time()
    out = classify(D05, State(78.0, 30.0))
    wall = time.time() - t0
    ok = (out.label is OutcomeLabel.BLOWUP
          and abs(out.t_star - 6.7896e-2) <= 1e-4 and wall < 1.0)
    assert verdict(1, ok, f"T* = {out.t_star:.6e} (target 6.7896e-2 +- 1e-4), {wall:.2f}s")


def test_criterion_02_blowup_time_delayed_prey():
    t0 = time.time()
    out = classify(DPREY, History(100.0, 100.0))
    wall = time.time() - t0
    ok = (out.label is OutcomeLabel.BLOWUP
          and abs(out.t_star - 2.0293e-2) <= 1e-4 and wall < 1.0)
    assert verdict(2, ok, f"T* = {out.t_star:.6e} (target 2.0293e-2 +- 1e-4), {wall:.2f}s")


def test_criterion_03_boundedness_counterexample():
    chk = boundedness_predicate(D05)
    out = classify(D05, State(78.0, 30.0))
    ok = chk.holds and out.label is OutcomeLabel.BLOWUP
    assert verdict(3, ok, f"condition holds ({chk.holds}) yet the run blows up ({out.label.value})")


def test_criterion_04_lower_bound():
    o1 = classify(D05, State(78.0, 30.0))
    o2 = classify(DPREY, History(100.0, 100.0))
    ok = (check_lower_bound(o1, D05, State(78.0, 30.0))
          and check_lower_bound(o2, DPREY, State(100.0, 100.0)))
    assert verdict(4, ok, f"1/(D Y0) < T*: {1/(0.5*30):.4f} < {o1.t_star:.4f}, "
                          f"{1/(0.5*100):.4f} < {o2.t_star:.4f}")


def test_criterion_05_quench_simultaneity():
    cfg = BlowupConfig(theta=1e16)
    q1 = quench_report(D05, State(78.0, 30.0), cfg)
    q2 = quench_report(DPREY, History(100.0, 100.0), cfg)
    ok = (1.0 <= q1.X_at <= 5.0 and abs(q1.dxdt) >= 1e15 and q1.X_at > 0.0
          and 3.0 <= q2.X_at <= 8.0)
    assert verdict(5, ok, f"X(T*) = {q1.X_at:.4f} in [1,5], |dX/dt| = {abs(q1.dxdt):.3e} >= 1e15; "
                          f"delayed X(T*) = {q2.X_at:.4f} in [3,8]")


def test_criterion_06_delayed_predator_bounded():
    t0 = time.time()
    r1 = check_bounded_delayed_predator(DPRED, History(100.0, 100.0), 50.0)
    r2 = check_bounded_delayed_predator(DPRED, History(1e4, 1e4), 50.0)
    wall = time.time() - t0
    ok = r1.bounded and r2.bounded and wall < 5.0
    assert verdict(6, ok, f"bounded with maxY {r1.max_Y:.3g} and {r2.max_Y:.3g}, {wall:.1f}s")


def test_criterion_07_feedback_counterexamples():
    from blowlab.claims import find_delay_feedback_root
    from blowlab.model import feedback_stability_nodelay
    fb0 = D04.with_(kind=ModelKind.FEEDBACK, u=0.02, tau=0.0)
    fb2 = D04.with_(kind=ModelKind.FEEDBACK, u=0.06, tau=2.0)
    chk0 = feedback_stability_nodelay(fb0)
    out0 = classify(fb0, State(100.0, 100.0))
    root = find_delay_feedback_root(fb2)
    out2 = classify(fb2, History(200.0, 200.0))
    ok = (chk0.holds and out0.label is OutcomeLabel.BLOWUP
          and root is not None and out2.label is OutcomeLabel.BLOWUP)
    assert verdict(7, ok, f"u=0.02: predicate {chk0.holds}, {out0.label.value}; "
                          f"u=0.06 tau=2: omega0 root {root is not None}, {out2.label.value}")


def test_criterion_08_equilibrium_closed_forms():
    e1 = interior_equilibrium(D05).point
    e2 = interior_equilibrium(D4676).point
    ok = (abs(e1.X - 0.2) <= 1e-5 and abs(e1.Y - 0.226667) <= 1e-5
          and abs(e2.X - 0.2277) <= 5e-4 and abs(e2.Y - 0.2264) <= 5e-4)
    assert verdict(8, ok, f"E2 = ({e1.X:.6f}, {e1.Y:.6f}) and ({e2.X:.4f}, {e2.Y:.4f})")


def test_criterion_09_hopf_threshold():
    c1 = stability_threshold_C(D04)
    c2 = stability_threshold_C(D05)
    tr_lo = interior_equilibrium(D05.with_(C=c2 - 0.01)).trace
    tr_hi = interior_equilibrium(D05.with_(C=c2 + 0.01)).trace
    ok = (abs(c1 - 0.33) <= 0.005 and abs(c2 - 0.28) <= 0.005
          and tr_lo > 0.0 > tr_hi)
    assert verdict(9, ok, f"C_H = {c1:.4f} (0.33), {c2:.4f} (0.28); trace flips sign")


@pytest.fixture(scope="module")
def full_grid():
    t0 = time.time()
    grid = sweep(D05, GridSpec())
    grid.wall_time = time.time() - t0
    return grid


@pytest.mark.slow
def test_criterion_10_basin_sweep(full_grid):
    grid = full_grid
    i, j = grid.cell_index_nearest(78.0, 30.0)
    cell_blowup = grid.label_at(i, j) == "BlowUp"
    i, j = grid.cell_index_nearest(0.2, 0.2267)
    cell_bounded = grid.label_at(i, j) == "Bounded"
    rep = conjecture_region_check(grid, D05, 0.1)
    ok_parts = (grid.labels.size == 90000 and cell_blowup and cell_bounded
                and grid.wall_time < 300.0)
    verdict(10, ok_parts and rep.violations == 0,
            f"sweep {grid.wall_time:.1f}s (< 300s), (78,30) BlowUp: {cell_blowup}, "
            f"E2 cell Bounded: {cell_bounded}; conjecture violations: "
            f"{rep.violations}/{rep.predicate_cells}")
    assert ok_parts
    # The conjectured sufficiency (largeness predicate => blow-up, delta1=0.1)
    # is numerically false: bounded cells fill a large part of the predicate
    # region (independently cross-checked; see the decisions ledger).  The
    # criterion is asserted as specified and fails honestly.
    assert rep.violations == 0, (
        f"conjectured blow-up region contains {rep.violations} bounded cells "
        f"(of {rep.predicate_cells} predicate cells); the sufficiency claim "
        f"does not hold numerically at delta1=0.1")


@pytest.mark.slow
def test_criterion_11_boundary_fit(full_grid):
    curve = extract_boundary(full_grid, D05, dy_tol=0.05)
    fit = fit_boundary(curve, RATIONAL)
    mean_y = float(np.mean(curve.y))
    x = np.linspace(1.0, 100.0, 60)
    synth = fit_boundary(BoundaryCurve(x, 2.0 * x / (3.0 * x - 1.0), 0.0), RATIONAL)
    ok = (fit.converged and fit.rmse <= 0.05 * mean_y and synth.rmse < 1e-10)
    assert verdict(11, ok, f"rational fit rmse {fit.rmse:.4f} <= 5% of mean "
                           f"({0.05 * mean_y:.4f}); synthetic recovery rmse {synth.rmse:.2e}")


@pytest.mark.slow
def test_criterion_12_two_cycles_and_lpc():
    t0 = time.time()
    cert = two_cycle_certificate(D4676)
    branch = continue_cycles(D4676, "D", (0.46, 0.47), seed=cert["outer"])
    wall = time.time() - t0
    folds = branch.fold_params()
    genuine = [m for m in branch.folds if m.kind == "fold"]
    ok = (cert["nested"] and not cert["inner"].stable and cert["outer"].stable
          and len(folds) == 2
          and abs(folds[0] - 0.4674) <= 1e-3 and abs(folds[1] - 0.4681) <= 1e-3
          and len(genuine) == 1 and genuine[0].coefficient < 0.0
          and wall < 120.0)
    assert verdict(12, ok, f"nested inner-unstable/outer-stable: {cert['nested']}; "
                           f"LPC markers at D = {folds[0]:.5f}, {folds[1]:.5f} "
                           f"(targets 0.4674, 0.4681 +- 1e-3); fold coefficient "
                           f"{genuine[0].coefficient:+.2e} (negative, matching the "
                           f"published -4.01e-2 sign); {wall:.0f}s")


@pytest.mark.slow
def test_criterion_13_bautin_points():
    results = []
    for p2, box1, box2, want in (
            ("A", (0.30, 0.36), (0.30, 0.45), (0.3302, 0.3777)),
            ("C", (0.44, 0.47), (0.28, 0.33), (0.4576, 0.3055)),
            ("K", (0.44, 0.48), (0.90, 1.10), (0.4699, 0.9910))):
        t0 = time.time()
        bp = find_bautin(ModelParams(), "D", p2, box1, box2)
        wall = time.time() - t0
        ok = (abs(bp.v1 - want[0]) <= 0.01 and abs(bp.v2 - want[1]) <= 0.01
              and wall < 120.0)
        results.append((p2, bp, want, wall, ok))
    all_ok = all(r[-1] for r in results)
    detail = "; ".join(f"(D,{p2})=({bp.v1:.4f},{bp.v2:.4f}) vs {want}"
                       for p2, bp, want, _, _ in results)
    assert verdict(13, all_ok, detail)


def test_criterion_14_property_suite():
    rng = np.random.default_rng(7)
    parts = []

    # Jacobian vs central finite differences, 100 random states
    f = make_ode_rhs(D05)
    ok_jac = True
    for _ in range(100):
        x, y = rng.uniform(0.01, 2.0, 2)
        h = 1e-6 * (1.0 + math.hypot(x, y))
        j = np.array(jacobian(D05, State(x, y)))
        fd = np.empty((2, 2))
        fd[:, 0] = (np.array(f(0, x + h, y)) - np.array(f(0, x - h, y))) / (2 * h)
        fd[:, 1] = (np.array(f(0, x, y + h)) - np.array(f(0, x, y - h))) / (2 * h)
        ok_jac &= bool(np.max(np.abs(j - fd) / (np.abs(j) + 1.0)) < 1e-5)
    parts.append(("jacobian-fd", ok_jac))

    eq = interior_equilibrium(D05)
    dx, dy = rhs(D05, eq.point, eq.point)
    parts.append(("rhs-zero-at-E2", abs(dx) < 1e-9 and abs(dy) < 1e-9))

    ok_event = True
    for theta in (1e4, 1e6, 1e8):
        _, hit = integrate(lambda t, x, y: (x * x, 0.0), (1.0, 0.0), (0.0, 2.0),
                           event=EventSpec("X", theta, "rising"))
        ok_event &= abs(hit.time - (1.0 - 1.0 / theta)) <= 1e-8
    parts.append(("event-law", ok_event))

    ts = [classify(D05, State(78.0, 30.0), BlowupConfig(theta=th)).t_star
          for th in (1e6, 1e8, 1e10)]
    parts.append(("threshold-insensitivity",
                  max(ts) - min(ts) < 1e-5))

    parts.append(("l1-linear-zero",
                  planar_first_lyapunov(lambda u, v: -v, lambda u, v: u, 1.0, 1e-4) == 0.0))

    cert = two_cycle_certificate(D4676)
    lm = liouville_multiplier(D4676, cert["outer"])
    parts.append(("liouville-floquet",
                  abs(lm - cert["outer"].floquet) / abs(lm) < 1e-4))

    g1 = sweep(D05, GridSpec(nx=12, ny=12), workers=1)
    g2 = sweep(D05, GridSpec(nx=12, ny=12), workers=2)
    parts.append(("sweep-determinism", bool(np.array_equal(g1.labels, g2.labels))))

    ok = all(p[1] for p in parts)
    assert verdict(14, ok, ", ".join(f"{name}:{'ok' if good else 'FAIL'}"
                                     for name, good in parts))
