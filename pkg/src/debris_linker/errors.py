"""Exception hierarchy for orbit linkage failures.

Every failure mode the library can produce is a subclass of LinkageError,
so callers can blanket-catch domain failures without masking bugs.
"""


class LinkageError(Exception):
    """Base class for all domain errors raised by this package."""


# --- frames / elements ---

class PolarSingularity(LinkageError):
    """Direction too close to a celestial pole for a well-defined frame."""


class HyperbolicOrbit(LinkageError):
    """State or root has non-negative two-body energy; no elliptic elements."""


class DegenerateAngularMomentum(LinkageError):
    """Position and velocity are (nearly) parallel; orbit plane undefined."""


class NonConvergence(LinkageError):
    """Kepler equation solver exhausted its iteration budget."""


# --- simulation / tracks ---

class BelowHorizon(LinkageError):
    """Simulated object is below the station horizon at some epoch."""


class TooFewObservations(LinkageError):
    """A track needs at least three observations to fit range derivatives."""


# --- two-body integrals ---

class NegativeEtaSquared(LinkageError):
    """Line-of-sight acceleration balance gives a negative proper-motion
    rate squared; the attributable cannot sit on a bound orbit at this range."""


# --- time-of-flight geometry ---

class InfeasibleGeometry(LinkageError):
    """Endpoint radii / chord incompatible with an ellipse of the given size."""


class AmbiguousRegion(LinkageError):
    """Arc-chord region degenerate (focus on the chord, or null/full arc)."""


class ClampDiagnostic(UserWarning):
    """A half-angle sine-squared left [0, 1) and was clamped; near-parabolic
    geometry is being probed and derivative quality may degrade."""


# --- linkage systems ---

class SingularGeometry(LinkageError):
    """Linkage system matrix is numerically singular."""


class NoRealRoot(LinkageError):
    """Range-rate quadratic has no real root."""


class DegenerateQuadratic(LinkageError):
    """Range-rate quadratic degenerates (both leading coefficients ~ 0)."""


class NoConvergence(LinkageError):
    """Newton iteration on the reduced linkage system failed to converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class JacobianSingular(LinkageError):
    """Newton step impossible: reduced-system Jacobian is singular."""


# --- classical methods ---

class DegenerateTimes(LinkageError):
    """Velocity-from-three-positions formula received coincident epochs."""


# --- coplanarity correction ---

class CollinearPositions(LinkageError):
    """Positions do not determine a unique orbital plane."""


class InfeasibleCorrection(LinkageError):
    """Range sphere does not reach the fitted orbital plane."""


class ParallelToNormal(LinkageError):
    """Line of sight parallel to the plane normal; rotation undefined."""


# --- CLI ---

class ScenarioError(LinkageError):
    """Scenario configuration file is malformed."""
