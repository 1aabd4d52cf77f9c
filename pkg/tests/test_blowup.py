import math

import pytest

from blowlab.blowup import (BlowupConfig, OutcomeLabel,
                            check_bounded_delayed_predator, check_lower_bound,
                            classify, quench_report)
from blowlab.errors import NotABlowupRun, ParameterDomainError
from blowlab.model import ModelKind, ModelParams, State, interior_equilibrium, rhs
from blowlab.solve import History, IntegratorConfig


class TestClassify:
    def test_published_nondelayed(self, d05):
        out = classify(d05, State(78.0, 30.0))
        assert out.label is OutcomeLabel.BLOWUP
        assert out.t_star == pytest.approx(6.789603e-2, abs=1e-4)
        assert out.state_at_stop.Y >= 1e8

    def test_equilibrium_ic_is_bounded(self, d05):
        eq = interior_equilibrium(d05)
        out = classify(d05, eq.point)
        assert out.label is OutcomeLabel.BOUNDED
        assert out.t_star is None

    def test_published_delayed(self, delayed_prey):
        out = classify(delayed_prey, History(100.0, 100.0))
        assert out.label is OutcomeLabel.BLOWUP
        assert out.t_star == pytest.approx(2.029316e-2, abs=1e-4)

    def test_failure_on_starved_budget(self, d05):
        out = classify(d05, State(78.0, 30.0), integ=IntegratorConfig(max_steps=10))
        assert out.label is OutcomeLabel.FAILURE

    def test_threshold_insensitivity(self, d05):
        ts = [classify(d05, State(78.0, 30.0), BlowupConfig(theta=th)).t_star
              for th in (1e6, 1e8, 1e10)]
        for a in ts:
            for b in ts:
                assert abs(a - b) < 1e-5

    def test_monotone_in_predator_data(self, d05):
        # doubling Y0 can only hasten the blow-up
        for x0 in (20.0, 35.0, 50.0, 65.0, 78.0, 90.0, 100.0, 45.0, 60.0, 85.0):
            o1 = classify(d05, State(x0, 30.0))
            o2 = classify(d05, State(x0, 60.0))
            assert o1.label is OutcomeLabel.BLOWUP
            assert o2.label is OutcomeLabel.BLOWUP
            assert o2.t_star <= o1.t_star

    def test_rejects_nonpositive_ic(self, d05):
        with pytest.raises(ParameterDomainError):
            classify(d05, State(1.0, 0.0))


class TestQuench:
    def test_published_values_nondelayed(self, d05):
        q = quench_report(d05, State(78.0, 30.0), BlowupConfig(theta=1e16))
        # reference values: X(T*)=2.2434, dX/dt=-6.7078e15, dY/dt=7.3834e31 at Y=1.328e16;
        # our event stops at Y=1e16, a factor ~1.3 earlier along the funnel
        assert 1.0 <= q.X_at <= 5.0
        assert abs(q.X_at - 2.2434) < 2.2434  # within factor 2
        assert abs(q.dxdt) >= 1e15
        assert abs(q.dxdt / -6.7078e15) > 0.5 and abs(q.dxdt / -6.7078e15) < 2.0
        assert abs(q.dydt / 7.3834e31) > 0.5 and abs(q.dydt / 7.3834e31) < 2.0
        assert q.quenched
        assert q.t_star == pytest.approx(6.789603e-2, abs=1e-4)

    def test_published_values_delayed(self, delayed_prey):
        q = quench_report(delayed_prey, History(100.0, 100.0), BlowupConfig(theta=1e16))
        # reference values: X(T*)=5.4949, dX/dt=-1.532e15 at Y=7.086e15
        assert 3.0 <= q.X_at <= 8.0
        assert abs(q.X_at - 5.4949) < 0.01
        assert 0.5 < abs(q.dxdt / -1.532e15) < 2.0
        assert q.quenched

    def test_dxdt_consistent_with_rhs_at_stop(self, d05):
        out = classify(d05, State(78.0, 30.0))
        dx, dy = rhs(d05, out.state_at_stop)
        assert out.dxdt_at_stop == pytest.approx(dx, rel=1e-9)
        assert out.dydt_at_stop == pytest.approx(dy, rel=1e-9)

    def test_predation_term_dominates_at_stop(self, d05):
        # at the stop state the prey derivative is the predation term up to
        # the (tiny) logistic contribution
        out = classify(d05, State(78.0, 30.0))
        x, y = out.state_at_stop
        predation = -d05.M * x * y / (x ** d05.p + d05.C)
        assert out.dxdt_at_stop == pytest.approx(predation, rel=1e-4)

    def test_not_a_blowup_run(self, d05):
        eq = interior_equilibrium(d05)
        with pytest.raises(NotABlowupRun):
            quench_report(d05, eq.point)

    def test_quench_blowup_simultaneity(self, d05, delayed_prey):
        # |dX/dt| at the stop dwarfs its initial value while X stays positive
        cases = [(d05, State(78.0, 30.0)), (delayed_prey, History(100.0, 100.0))]
        for params, ic in cases:
            q = quench_report(params, ic, BlowupConfig(theta=1e16))
            st0 = State(78.0, 30.0) if params is d05 else State(100.0, 100.0)
            if params.is_delayed:
                dx0, _ = rhs(params, st0, st0)
            else:
                dx0, _ = rhs(params, st0)
            assert q.X_at > 0.0
            assert abs(q.dxdt) >= 1e6 * abs(dx0)


class TestLowerBound:
    def test_published_runs(self, d05, delayed_prey):
        out = classify(d05, State(78.0, 30.0))
        assert check_lower_bound(out, d05, State(78.0, 30.0))
        outd = classify(delayed_prey, History(100.0, 100.0))
        assert check_lower_bound(outd, delayed_prey, State(100.0, 100.0))

    def test_strict_boundary(self, d05):
        from blowlab.blowup import Outcome
        y0 = 30.0
        t_eq = 1.0 / (d05.D * y0)
        fake = Outcome(OutcomeLabel.BLOWUP, t_eq, State(1.0, 1e8), 0.0, 0.0, t_eq)
        assert not check_lower_bound(fake, d05, State(78.0, y0))

    def test_holds_for_feedback_runs_too(self):
        # the control term only slows predator growth, so the comparison
        # bound survives; these runs sit close to it
        fb0 = ModelParams(D=0.4, u=0.02, kind=ModelKind.FEEDBACK)
        out = classify(fb0, State(100.0, 100.0))
        assert check_lower_bound(out, fb0, State(100.0, 100.0))
        fb2 = ModelParams(D=0.4, u=0.06, tau=2.0, kind=ModelKind.FEEDBACK)
        out2 = classify(fb2, History(200.0, 200.0))
        assert check_lower_bound(out2, fb2, State(200.0, 200.0))

    def test_requires_blowup(self, d05):
        out = classify(d05, State(0.5, 0.5))
        with pytest.raises(NotABlowupRun):
            check_lower_bound(out, d05, State(0.5, 0.5))


class TestDelayedPredatorBoundedness:
    def test_history_100(self, delayed_predator):
        rep = check_bounded_delayed_predator(delayed_predator, History(100.0, 100.0), 50.0)
        assert rep.bounded
        assert rep.max_Y < 1e8

    def test_history_1e4(self, delayed_predator):
        rep = check_bounded_delayed_predator(delayed_predator, History(1e4, 1e4), 50.0)
        assert rep.bounded
        assert rep.max_Y < 1e8

    def test_contrast_delayed_prey_blows_up(self, delayed_prey):
        out = classify(delayed_prey, History(100.0, 100.0))
        assert out.label is OutcomeLabel.BLOWUP

    def test_kind_guard(self, d05):
        with pytest.raises(ParameterDomainError):
            check_bounded_delayed_predator(d05, History(1.0, 1.0))
