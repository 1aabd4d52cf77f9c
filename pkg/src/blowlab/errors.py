"""Exception types shared across blowlab modules."""


class BlowlabError(Exception):
    """Base class for all blowlab-specific errors."""


class ParameterDomainError(BlowlabError, ValueError):
    """A parameter or state value is outside the model's valid domain."""


class NoInteriorEquilibrium(BlowlabError):
    """The interior (coexistence) equilibrium does not exist for these parameters."""


class IntegrationError(BlowlabError):
    """Base class for integrator failures. Carries the partial trajectory."""

    def __init__(self, message, trajectory=None, time=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.time = time


class StepBudgetExceeded(IntegrationError):
    """The step budget ran out before reaching the end of the time span."""


class StepSizeUnderflow(IntegrationError):
    """The step size fell below the representable floor.

    For this model family this happens only in the blow-up funnel (or for
    genuinely stiff inputs, which the model does not produce in practice).
    """


class OutOfSpan(BlowlabError, ValueError):
    """Dense-output evaluation was requested outside the covered time span."""


class NotABlowupRun(BlowlabError):
    """A quench diagnostic was requested for a run that did not blow up."""


class NoTransition(BlowlabError):
    """A basin grid (or grid column) contains no Bounded-to-BlowUp transition."""


class SingularJacobian(BlowlabError):
    """The least-squares normal equations became singular."""

    def __init__(self, message, last_params=None):
        super().__init__(message)
        self.last_params = last_params


class DomainViolation(BlowlabError):
    """A fit family was evaluated outside its domain (e.g. log of non-positive)."""


class NotOnHopfLocus(BlowlabError):
    """First-Lyapunov evaluation requested away from the Hopf locus."""


class NewtonDiverged(BlowlabError):
    """Newton iteration on the return map failed to converge to a cycle."""


class SectionNotCrossed(BlowlabError):
    """The trajectory never returned to the Poincare section."""


class ContinuationStalled(BlowlabError):
    """Pseudo-arclength step shrank below the useful floor."""


class NoSignChange(BlowlabError):
    """No sign change of the first Lyapunov coefficient along the Hopf locus."""


class HopfLocusNotFound(BlowlabError):
    """The Hopf locus does not cross the requested parameter box."""


class PrecisionLoss(BlowlabError):
    """A finite-difference consistency check failed (half-step disagreement)."""
