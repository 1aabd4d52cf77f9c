import math

import numpy as np
import pytest

from blowlab.errors import OutOfSpan, StepBudgetExceeded, StepSizeUnderflow
from blowlab.model import ModelKind, ModelParams
from blowlab.solve import (EventSpec, History, IntegratorConfig, integrate,
                           integrate_dde, integrate_ode)


def exp_rhs(t, x, y):
    return x, 0.0


def riccati_rhs(t, x, y):
    return x * x, 0.0


class TestBasicAccuracy:
    def test_exponential(self):
        traj, hit = integrate(exp_rhs, (1.0, 0.0), (0.0, 1.0))
        assert hit is None
        assert abs(traj.final_state().X - math.e) < 10 * 1e-8

    def test_rotation_with_decay_matches_matrix_exponential(self):
        # y' = A y with A = [[-0.1, 1], [-1, -0.1]]: closed form
        # e^{-t/10} (cos t, -sin t) from (1, 0)
        def f(t, x, y):
            return -0.1 * x + y, -x - 0.1 * y

        traj, _ = integrate(f, (1.0, 0.0), (0.0, 5.0))
        for t in (0.31, 1.7, 2.5, 3.7, 4.9):
            st = traj.evaluate(t)
            assert st.X == pytest.approx(math.exp(-0.1 * t) * math.cos(t), abs=100 * 1e-8)
            assert st.Y == pytest.approx(-math.exp(-0.1 * t) * math.sin(t), abs=100 * 1e-8)

    def test_rtol_ladder_monotone(self):
        # halving the tolerance by decades must not increase the error
        errs = []
        for rtol in (1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12):
            cfg = IntegratorConfig(rtol=rtol, atol=rtol * 1e-3)
            traj, _ = integrate(lambda t, x, y: (-x, 0.0), (1.0, 0.0), (0.0, 10.0), cfg)
            errs.append(abs(traj.final_state().X - math.exp(-10.0)))
        assert all(b <= a for a, b in zip(errs, errs[1:]))

    def test_fixed_step_convergence_order(self):
        errs = []
        for h in (0.2, 0.1, 0.05, 0.025):
            cfg = IntegratorConfig(fixed_h=h)
            traj, _ = integrate(lambda t, x, y: (-x, 0.0), (1.0, 0.0), (0.0, 10.0), cfg)
            errs.append(abs(traj.final_state().X - math.exp(-10.0)))
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 4.5


class TestEvents:
    def test_riccati_event_law(self):
        # y' = y^2 from 1 blows up at t=1; y reaches Theta at exactly 1 - 1/Theta
        for theta in (1e4, 1e6, 1e8):
            traj, hit = integrate(riccati_rhs, (1.0, 0.0), (0.0, 2.0),
                                  event=EventSpec("X", theta, "rising"))
            assert hit is not None
            assert hit.time == pytest.approx(1.0 - 1.0 / theta, abs=1e-8)
            assert traj.t_end == hit.time

    def test_published_blowup_event(self, d05):
        traj, hit = integrate_ode(d05, (78.0, 30.0), (0.0, 50.0),
                                  event=EventSpec("Y", 1e8, "rising"))
        assert hit is not None
        assert hit.time == pytest.approx(6.789603e-2, abs=1e-4)

    def test_falling_event(self):
        def f(t, x, y):
            return -x, 0.0

        traj, hit = integrate(f, (1.0, 0.0), (0.0, 10.0),
                              event=EventSpec("X", 0.5, "falling"))
        assert hit is not None
        assert hit.time == pytest.approx(math.log(2.0), abs=1e-8)

    def test_event_not_triggered_from_wrong_side(self):
        traj, hit = integrate(exp_rhs, (1.0, 0.0), (0.0, 1.0),
                              event=EventSpec("X", 0.5, "rising"))
        assert hit is None  # starts above the threshold, stays above


class TestTrajectory:
    def test_nodes_reproduced_bitwise(self):
        traj, _ = integrate(exp_rhs, (1.0, 0.0), (0.0, 1.0))
        for i, t in enumerate(traj.ts):
            st = traj.evaluate(t)
            assert st.X == traj.xs[i] and st.Y == traj.ys[i]

    def test_out_of_span(self):
        traj, _ = integrate(exp_rhs, (1.0, 0.0), (0.0, 1.0))
        with pytest.raises(OutOfSpan):
            traj.evaluate(-0.1)
        with pytest.raises(OutOfSpan):
            traj.evaluate(1.0 + 1e-9)

    def test_monotone_segment_interpolation(self):
        # logistic growth: solution is monotone; dense output must stay
        # between the bracketing node values
        def f(t, x, y):
            return x * (1.0 - x), 0.0

        traj, _ = integrate(f, (0.01, 0.0), (0.0, 12.0))
        for i in range(traj.n_steps):
            a, b = traj.ts[i], traj.ts[i + 1]
            lo, hi = sorted((traj.xs[i], traj.xs[i + 1]))
            for frac in (0.25, 0.5, 0.75):
                st = traj.evaluate(a + frac * (b - a))
                assert lo - 1e-12 <= st.X <= hi + 1e-12

    def test_determinism(self, d05):
        r1, _ = integrate_ode(d05, (7.0, 3.0), (0.0, 20.0))
        r2, _ = integrate_ode(d05, (7.0, 3.0), (0.0, 20.0))
        assert r1.ts == r2.ts and r1.xs == r2.xs and r1.ys == r2.ys

    def test_csv_export(self, d05, tmp_path):
        traj, _ = integrate_ode(d05, (1.0, 1.0), (0.0, 5.0))
        path = tmp_path / "traj.csv"
        traj.to_csv(path, n_samples=11)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,X,Y"
        assert len(lines) == 12
        t0, x0, y0 = map(float, lines[1].split(","))
        assert (t0, x0, y0) == (0.0, 1.0, 1.0)


class TestBudgetsAndUnderflow:
    def test_step_budget(self, d05):
        with pytest.raises(StepBudgetExceeded):
            integrate_ode(d05, (78.0, 30.0), (0.0, 50.0),
                          IntegratorConfig(max_steps=10))

    def test_underflow_near_blowup_without_event(self, d05):
        # without an event the run dives into the singularity until the
        # step drowns; the partial trajectory is attached
        with pytest.raises(StepSizeUnderflow) as exc_info:
            integrate_ode(d05, (78.0, 30.0), (0.0, 50.0),
                          IntegratorConfig(max_steps=200000))
        exc = exc_info.value
        assert exc.trajectory is not None
        assert exc.trajectory.max_Y() > 1e10


class TestDDE:
    def test_linear_test_equation(self):
        # y'(t) = -y(t-1), constant history 1: y(1) = 0, y(2) = -1/2 exactly
        p = ModelParams(kind=ModelKind.DELAYED_PREY, tau=1.0)  # tau carrier only
        from blowlab.solve import Trajectory, _integrate_core

        hist = History(1.0, 1.0)

        def fd(t, x, y, xd, yd):
            return -xd, 0.0

        # emulate integrate_dde with a custom right-hand side
        traj = Trajectory(0.0, 1.0, 1.0)

        def f(t, x, y):
            tq = t - 1.0
            xd, yd = (1.0, 1.0) if tq < 0.0 else traj.evaluate(min(tq, traj.ts[-1]))
            return fd(t, x, y, xd, yd)

        cfg = IntegratorConfig()
        for k in (1.0, 2.0):
            _integrate_core(f, traj, k - 1.0, k, cfg, None)
        assert traj.evaluate(1.0).X == pytest.approx(0.0, abs=1e-10)
        assert traj.evaluate(2.0).X == pytest.approx(-0.5, abs=1e-10)

    def test_published_delayed_blowup_time(self, delayed_prey):
        traj, hit = integrate_dde(delayed_prey, History(100.0, 100.0), (0.0, 50.0),
                                  event=EventSpec("Y", 1e8, "rising"))
        assert hit is not None
        assert hit.time == pytest.approx(2.029316e-2, abs=1e-4)

    def test_frozen_delay_crosscheck(self, delayed_prey):
        # while t < tau the delayed state equals the constant history, so the
        # run must match the ODE with the logistic term frozen at phi1
        from blowlab.solve import integrate

        phi1, phi2 = 100.0, 100.0
        p = delayed_prey

        def frozen(t, x, y):
            xc = max(x, 0.0)
            dx = p.R * xc * (1.0 - phi1 / p.K) - p.M * xc * y / (xc ** p.p + p.C)
            dy = (p.D - p.E / (xc + p.A)) * y * y
            return dx, dy

        t_end = 0.015  # inside the first delay interval
        tr_dde, _ = integrate_dde(p, History(phi1, phi2), (0.0, t_end))
        tr_ode, _ = integrate(frozen, (phi1, phi2), (0.0, t_end))
        a = tr_dde.final_state()
        b = tr_ode.final_state()
        assert a.X == pytest.approx(b.X, rel=1e-7)
        assert a.Y == pytest.approx(b.Y, rel=1e-7)

    def test_mesh_contains_delay_multiples(self, delayed_prey):
        p = delayed_prey.with_(tau=0.7)
        traj, _ = integrate_dde(p, History(0.8, 0.3), (0.0, 5.0))
        ts = traj.ts
        multiples = [k * 0.7 for k in range(1, 8)]
        for m in multiples:
            assert any(abs(t - m) < 1e-12 for t in ts), f"mesh missing {m}"
        # no accepted interval straddles a multiple of tau
        for a, b in zip(ts, ts[1:]):
            for m in multiples:
                assert not (a + 1e-12 < m < b - 1e-12)

    def test_history_must_be_positive(self):
        with pytest.raises(Exception):
            History(-1.0, 1.0)
