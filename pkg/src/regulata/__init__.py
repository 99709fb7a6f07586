"""Numerical toolkit for output regulation with a learning internal model.

matcore holds the companion/Hankel/Sylvester algebra, imodel the filter
and the coefficient-learning flow, regulator the stabilizing laws,
feedforward the gradient-flow regulator-equation solver, plants the
example systems, simkit the loop composers and integrators, scenarios the
config layer, and reporting the artifact renderers. The HTTP app lives in
regulata.service and the command line in regulata.cli; both are imported
lazily so the numerical core stays dependency-light.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    feedforward,
    imodel,
    matcore,
    plants,
    regulator,
    reporting,
    scenarios,
    simkit,
)
from .errors import (  # noqa: F401
    ComplexPairingFailure,
    ConfigError,
    ConvergenceFailure,
    HurwitzViolation,
    NonFiniteState,
    NoUniqueSolution,
    RegulataError,
    ShapeMismatch,
    SimulationError,
    SingularSystem,
    SingularXi,
    StepUnderflow,
    VerificationFailure,
    WindowTooShort,
)
