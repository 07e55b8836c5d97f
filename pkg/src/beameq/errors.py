"""Exception hierarchy for the beam-equilibrium library."""


class BeamError(Exception):
    """Base class for all library errors."""


class QuadratureFailure(BeamError):
    """Momentum quadrature could not reach the requested tolerance."""


class DegenerateCoupling(BeamError):
    """Coupling matrix is singular (equal drift speeds)."""


class NoPositiveSolution(BeamError):
    """No admissible positive line densities exist for the request."""


class BlowUp(BeamError):
    """Radial integration diverged before reaching the outer radius."""


class TailNotAsymptotic(BeamError):
    """Outer window of a profile does not show an integrable power-law tail."""


class JacobianSingular(BeamError):
    """Newton Jacobian on the central data is (numerically) singular."""


class NoConvergence(BeamError):
    """Iteration failed to converge; ``trace`` holds the iteration history."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class NotConformal(BeamError):
    """Configuration does not satisfy the conformal condition."""


class InnerSolveFailure(BeamError):
    """Linear Poisson sub-solve failed."""


class NonIntegrable(BeamError):
    """A normalising integral is infinite or non-positive."""


class NonIntegrableTail(NonIntegrable):
    """Primitive tail decays too slowly for a finite mass."""


class WrongModel(BeamError):
    """Operation is defined only for the other density model."""


class ZeroMass(BeamError):
    """Field has no positive mass."""


class ParseError(BeamError):
    """Malformed configuration text."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(BeamError):
    """Configuration parsed but violates a physical constraint."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IoError(BeamError, OSError):
    """Result emission failed (unwritable path or invalid report)."""
