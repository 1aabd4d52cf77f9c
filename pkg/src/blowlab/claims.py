"""Desk-scale reproduction suite: every numerical claim as a pass/fail row.

Each claim pins a published number (or a stated qualitative outcome),
recomputes it from scratch, and records expected vs observed with its
tolerance.  Individual failures never abort the suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .blowup import (BlowupConfig, OutcomeLabel, check_bounded_delayed_predator,
                     check_lower_bound, classify, quench_report)
from .model import (ModelKind, ModelParams, State, boundedness_predicate,
                    feedback_stability_delay_residual, feedback_stability_nodelay,
                    interior_equilibrium, largeness_predicate,
                    stability_threshold_C)
from .solve import History, IntegratorConfig


@dataclass(frozen=True)
class Claim:
    claim_id: str
    locus: str
    expected: str
    observed: str
    tolerance: str
    passed: bool


@dataclass
class ClaimReport:
    claims: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def to_json_dict(self) -> dict:
        return {"all_passed": self.all_passed,
                "claims": [c.__dict__ for c in self.claims]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def format_table(self) -> str:
        wid = max(len(c.claim_id) for c in self.claims) + 1
        lines = [f"{'claim':{wid}} {'expected':>24} {'observed':>24} {'tol':>10}  result"]
        lines.append("-" * (wid + 70))
        for c in self.claims:
            lines.append(f"{c.claim_id:{wid}} {c.expected:>24} {c.observed:>24} "
                         f"{c.tolerance:>10}  {'PASS' if c.passed else 'FAIL'}")
        n_fail = sum(not c.passed for c in self.claims)
        lines.append("-" * (wid + 70))
        lines.append(f"{len(self.claims) - n_fail}/{len(self.claims)} claims passed")
        return "\n".join(lines)


_D05 = ModelParams()                      # R=K=1, M=1.2, p=2, D=0.5, E=0.2, A=0.2, C=0.3
_D04 = _D05.with_(D=0.4)
_DPREY = _D05.with_(kind=ModelKind.DELAYED_PREY, tau=1.0)
_DPRED = _D05.with_(kind=ModelKind.DELAYED_PREDATOR, tau=1.0)
_FB0 = _D04.with_(kind=ModelKind.FEEDBACK, u=0.02, tau=0.0)
_FB2 = _D04.with_(kind=ModelKind.FEEDBACK, u=0.06, tau=2.0)


def find_delay_feedback_root(params: ModelParams, omega_max: float = 10.0,
                             scan_step: float = 1e-4):
    """First root of the delayed-feedback characteristic residual with
    positive transversality; None when the scan finds none."""
    w = scan_step
    prev, _ = feedback_stability_delay_residual(params, w)
    while w < omega_max:
        w2 = w + scan_step
        r2, _ = feedback_stability_delay_residual(params, w2)
        if prev * r2 < 0.0:
            a, b, sa = w, w2, prev > 0.0
            for _ in range(60):
                m = 0.5 * (a + b)
                rm, _ = feedback_stability_delay_residual(params, m)
                if (rm > 0.0) == sa:
                    a = m
                else:
                    b = m
            w0 = 0.5 * (a + b)
            res, tv = feedback_stability_delay_residual(params, w0)
            if tv > 0.0:
                return w0, res, tv
        prev, w = r2, w2
    return None


def run_claims(theta: float | None = None, max_steps: int | None = None) -> ClaimReport:
    """Run the full desk-scale suite; overrides exercise robustness modes."""
    th = 1e8 if theta is None else float(theta)
    icfg = IntegratorConfig() if max_steps is None else IntegratorConfig(max_steps=max_steps)
    cfg = BlowupConfig(theta=th)
    cfg16 = BlowupConfig(theta=1e16)
    claims: list = []

    def add(claim_id, locus, expected, observed, tolerance, passed):
        claims.append(Claim(claim_id, locus, expected, str(observed), tolerance, bool(passed)))

    def guarded(claim_id, locus, expected, tolerance, fn):
        try:
            observed, passed = fn()
        except Exception as exc:  # claim failures must not abort the suite
            observed, passed = f"error: {type(exc).__name__}", False
        add(claim_id, locus, expected, observed, tolerance, passed)

    # -- equilibria ------------------------------------------------------
    def eq_d05():
        pt = interior_equilibrium(_D05).point
        ok = abs(pt.X - 0.2) < 1e-5 and abs(pt.Y - 0.226667) < 1e-5
        return f"({pt.X:.6f},{pt.Y:.6f})", ok
    guarded("equilibrium-d05", "interior equilibrium, D=0.5 set",
            "(0.2, 0.226667)", "1e-5", eq_d05)

    def eq_d4676():
        pt = interior_equilibrium(_D05.with_(D=0.4676)).point
        ok = abs(pt.X - 0.2277) < 5e-4 and abs(pt.Y - 0.2264) < 5e-4
        return f"({pt.X:.4f},{pt.Y:.4f})", ok
    guarded("equilibrium-d4676", "two-cycle parameter set",
            "(0.2277, 0.2264)", "5e-4", eq_d4676)

    # -- disproved boundedness condition ---------------------------------
    def bdd():
        chk = boundedness_predicate(_D05)
        ok = (chk.holds and abs(chk.rhs1 - 0.294118) < 5e-4
              and abs(chk.rhs2 - 0.324585) < 5e-4 and chk.lhs2 == 0.0)
        return f"holds, rhs=({chk.rhs1:.6f},{chk.rhs2:.6f})", ok
    guarded("boundedness-sides", "claimed sufficient boundedness condition",
            "holds, (0.294118, 0.324585)", "5e-4", bdd)

    # -- blow-up times ----------------------------------------------------
    state_nd = {}

    def tstar_nd():
        out = classify(_D05, State(78.0, 30.0), cfg, icfg)
        state_nd["out"] = out
        ok = (out.label is OutcomeLabel.BLOWUP and out.t_star is not None
              and abs(out.t_star - 6.789603e-2) < 1e-4)
        return f"{out.t_star:.6e}" if out.t_star else out.label.value, ok
    guarded("tstar-nondelayed", "blow-up time, ic (78,30)",
            "6.789603e-02", "1e-4", tstar_nd)

    state_dp = {}

    def tstar_dp():
        out = classify(_DPREY, History(100.0, 100.0), cfg, icfg)
        state_dp["out"] = out
        ok = (out.label is OutcomeLabel.BLOWUP and out.t_star is not None
              and abs(out.t_star - 2.029316e-2) < 1e-4)
        return f"{out.t_star:.6e}" if out.t_star else out.label.value, ok
    guarded("tstar-delayed-prey", "blow-up time, tau=1, history (100,100)",
            "2.029316e-02", "1e-4", tstar_dp)

    def counterexample():
        chk = boundedness_predicate(_D05)
        out = state_nd.get("out")
        ok = chk.holds and out is not None and out.label is OutcomeLabel.BLOWUP
        return f"predicate {chk.holds}, run {out.label.value if out else 'missing'}", ok
    guarded("boundedness-counterexample", "condition holds yet the run blows up",
            "holds and BlowUp", "exact", counterexample)

    def lower_nd():
        out = state_nd["out"]
        ok = check_lower_bound(out, _D05, State(78.0, 30.0))
        return f"1/(D*Y0)={1/(_D05.D*30):.6f} < {out.t_star:.6f}", ok
    guarded("lower-bound-nondelayed", "comparison lower bound", "true", "strict", lower_nd)

    def lower_dp():
        out = state_dp["out"]
        ok = check_lower_bound(out, _DPREY, State(100.0, 100.0))
        return f"1/(D*Y0)={1/(_D05.D*100):.6f} < {out.t_star:.6f}", ok
    guarded("lower-bound-delayed", "comparison lower bound", "true", "strict", lower_dp)

    # -- quenching at the deep threshold ----------------------------------
    def quench_nd():
        q = quench_report(_D05, State(78.0, 30.0), cfg16, icfg)
        ok = (1.0 <= q.X_at <= 5.0 and abs(q.dxdt) >= 1e15 and q.X_at > 0.0
              and q.quenched)
        return f"X={q.X_at:.4f}, dX/dt={q.dxdt:.3e}", ok
    guarded("quench-nondelayed", "prey quenches as the predator blows up",
            "X in [1,5], |dX/dt|>=1e15", "factor 2", quench_nd)

    def quench_dp():
        q = quench_report(_DPREY, History(100.0, 100.0), cfg16, icfg)
        ok = 3.0 <= q.X_at <= 8.0 and abs(q.dxdt) >= 7.6e14 and q.quenched
        return f"X={q.X_at:.4f}, dX/dt={q.dxdt:.3e}", ok
    guarded("quench-delayed", "delayed run quench state",
            "X in [3,8] (reference 5.4949)", "factor 2", quench_dp)

    # -- delayed predator boundedness -------------------------------------
    for tag, hist in (("100", History(100.0, 100.0)), ("1e4", History(1e4, 1e4))):
        def bounded_pred(h=hist):
            rep = check_bounded_delayed_predator(_DPRED, h, 50.0, icfg)
            return f"bounded={rep.bounded}, maxY={rep.max_Y:.3g}", rep.bounded
        guarded(f"delayed-predator-bounded-{tag}",
                "gestation delay keeps the predator bounded",
                "bounded to t=50", "exact", bounded_pred)

    # -- feedback control counterexamples ----------------------------------
    def feed_nodelay():
        chk = feedback_stability_nodelay(_FB0)
        out = classify(_FB0, State(100.0, 100.0), cfg, icfg)
        ok = chk.holds and out.label is OutcomeLabel.BLOWUP
        return f"predicate {chk.holds}, run {out.label.value}", ok
    guarded("feedback-nodelay-counterexample", "u=0.02 stability condition vs blow-up",
            "holds and BlowUp", "exact", feed_nodelay)

    def feed_delay():
        root = find_delay_feedback_root(_FB2)
        out = classify(_FB2, History(200.0, 200.0), cfg, icfg)
        ok = root is not None and out.label is OutcomeLabel.BLOWUP
        w0 = f"{root[0]:.4f}" if root else "none"
        return f"omega0={w0}, run {out.label.value}", ok
    guarded("feedback-delay-counterexample", "u=0.06, tau=2 condition vs blow-up",
            "root with transversality>0 and BlowUp", "exact", feed_delay)

    # -- Hopf thresholds ----------------------------------------------------
    def hopf1():
        ch = stability_threshold_C(_D04)
        return f"{ch:.4f}", abs(ch - 0.33) < 0.005
    guarded("hopf-threshold-d04", "critical protection constant, D=0.4 set",
            "0.33", "0.005", hopf1)

    def hopf2():
        ch = stability_threshold_C(_D05)
        return f"{ch:.4f}", abs(ch - 0.28) < 0.005
    guarded("hopf-threshold-d05", "critical protection constant, D=0.5 set",
            "0.28", "0.005", hopf2)

    def traceflip():
        ch = stability_threshold_C(_D05)
        t_lo = interior_equilibrium(_D05.with_(C=ch - 0.01)).trace
        t_hi = interior_equilibrium(_D05.with_(C=ch + 0.01)).trace
        return f"trace({ch - 0.01:.3f})={t_lo:+.4f}, trace({ch + 0.01:.3f})={t_hi:+.4f}", \
            t_lo > 0.0 > t_hi
    guarded("hopf-trace-flip", "stability flips across the threshold",
            "+,-", "sign", traceflip)

    def stab_d05():
        eq = interior_equilibrium(_D05)
        ok = eq.trace < 0.0
        return f"trace={eq.trace:+.5f} ({eq.classification.value})", ok
    guarded("stability-d05", "interior equilibrium stable at C=0.3 > 0.28",
            "stable", "sign", stab_d05)

    # -- largeness condition at the reference point -------------------------
    def largeness():
        chk = largeness_predicate(_D05, 0.1, State(78.0, 30.0))
        out = state_nd.get("out")
        ok = (chk.holds and abs(chk.blowup_time_bound - 1.0 / 3.0) < 1e-12
              and out is not None and out.label is OutcomeLabel.BLOWUP)
        return f"holds={chk.holds}, bound={chk.blowup_time_bound:.4f}", ok
    guarded("largeness-78-30", "sufficiency condition at the blow-up reference point",
            "holds, bound 1/3, BlowUp", "exact", largeness)

    return ClaimReport(claims)
