"""blowlab: numerical laboratory for a modified Leslie-Gower predator-prey model.

Finite-time blow-up detection with quench diagnostics, basin-of-attraction
sweeps with blow-up boundary fitting, and one/two-parameter bifurcation
analysis (Hopf, fold of cycles, Bautin).
"""

from .blowup import (BlowupConfig, BoundedReport, Outcome, OutcomeLabel,
                     QuenchReport, check_bounded_delayed_predator,
                     check_lower_bound, classify, classify_with_trajectory,
                     quench_report)
from .model import (Equilibrium, EquilibriumKind, ModelKind, ModelParams,
                    StabilityClass, State, boundedness_predicate,
                    feedback_stability_delay_residual,
                    feedback_stability_nodelay, interior_equilibrium,
                    jacobian, largeness_predicate, rhs, stability_threshold_C)
from .solve import (EventHit, EventSpec, History, IntegratorConfig, Trajectory,
                    integrate, integrate_dde, integrate_ode)

__version__ = "0.1.0"

__all__ = [
    "BlowupConfig", "BoundedReport", "Equilibrium", "EquilibriumKind",
    "EventHit", "EventSpec", "History", "IntegratorConfig", "ModelKind",
    "ModelParams", "Outcome", "OutcomeLabel", "QuenchReport",
    "StabilityClass", "State", "Trajectory", "boundedness_predicate",
    "check_bounded_delayed_predator", "check_lower_bound", "classify",
    "classify_with_trajectory", "feedback_stability_delay_residual",
    "feedback_stability_nodelay", "integrate", "integrate_dde",
    "integrate_ode", "interior_equilibrium", "jacobian",
    "largeness_predicate", "quench_report", "rhs", "stability_threshold_C",
]
