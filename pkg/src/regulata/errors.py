"""Exception hierarchy for the toolkit.

Grouped by the stage that raises them: algebra (construction and solves),
simulation (integration), and the scenario layer (configuration and
verification). The CLI maps configuration errors to exit code 2, any
simulation-stage failure to 3, and verification failures to 4.
"""


class RegulataError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(RegulataError):
    """Operands have incompatible or invalid dimensions."""


class HurwitzViolation(RegulataError):
    """A matrix required to be Hurwitz has an eigenvalue at or above the margin."""


class SingularXi(RegulataError):
    """The polynomial filter matrix is numerically singular."""


class NoUniqueSolution(RegulataError):
    """The vectorized Sylvester system is singular (overlapping spectra)."""


class ConvergenceFailure(RegulataError):
    """The eigenvalue iteration did not converge."""


class ComplexPairingFailure(RegulataError):
    """Eigenvalues of a real matrix are not conjugate consistent."""


class SingularSystem(RegulataError):
    """The assembled feedforward system has no unique solution."""


class SimulationError(RegulataError):
    """A closed-loop integration could not be completed."""


class StepUnderflow(SimulationError):
    """The adaptive step controller pushed dt below dt_min."""


class NonFiniteState(SimulationError):
    """The integrated state left the finite range."""


class WindowTooShort(RegulataError):
    """A metric window contains too few samples to fit."""


class ConfigError(RegulataError):
    """A scenario configuration is malformed or inconsistent."""


class VerificationFailure(RegulataError):
    """One or more algebraic self-checks failed."""
