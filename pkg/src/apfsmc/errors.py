"""Exception hierarchy.

``ValidationError`` subclasses signal bad inputs or infeasible designs (CLI
exit code 1); ``RunFault`` subclasses signal a failure during a closed-loop
run (CLI exit code 2).
"""

from __future__ import annotations


class ApfSmcError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ApfSmcError, ValueError):
    """Configuration or design input rejected before anything is simulated."""


class AntiparallelAxes(ValidationError):
    """Shortest rotation between two opposite unit vectors has no defined axis."""


class SingularPerturbation(ValidationError):
    """An inertia perturbation corner makes ``I + I*^-1 dI`` singular."""


class DegenerateGeometry(ValidationError):
    """Wheel spin axes do not span a 3-D envelope (zero facet normal)."""


class InfeasibleActuation(ValidationError):
    """Disturbance momentum leaves no margin inside the momentum sphere."""


class InfeasibleSpacing(ValidationError):
    """Too many forbidden zones for the requested half-apex angle."""


class InfeasibleTorque(ValidationError):
    """The available torque cannot dominate the worst-case sliding dynamics."""


class InvalidMargin(ValidationError):
    """Gain margin factor outside its admissible open interval."""


class RejectionExhausted(ValidationError):
    """Could not draw an admissible random sample within the retry budget."""


class RunFault(ApfSmcError, RuntimeError):
    """A closed-loop run could not continue.

    Attributes:
        t: simulation time (s) at which the fault was detected, if known.
    """

    def __init__(self, message: str, t: float | None = None):
        if t is not None:
            message = f"{message} (t = {t:.2f} s)"
        super().__init__(message)
        self.t = t


class BoresightOnForbiddenAxis(RunFault):
    """Boresight aligned with a forbidden direction; repulsion is undefined."""
