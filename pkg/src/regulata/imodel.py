"""Internal models and the nonparametric coefficient-learning flow.

An internal model here is a stable filter eta' = M eta + N u of dimension
2n driven by a scalar. Once the loop settles, successive filter states obey
the same length-n recurrence as the signal they were driven by, and that
recurrence is what everything in this module extracts: a gradient learning
flow for the coefficient estimate a_hat, a one-shot Hankel-inversion
estimate, the nonlinear read-out chi recovering the steady-state input, a
compactly supported variant of chi, and frequency extraction from any
coefficient estimate.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import ComplexPairingFailure, ConfigError, ShapeMismatch


@dataclass(frozen=True, eq=False)
class InternalModelSpec:
    """Filter pair (M, N) with its read-out row and optional settle map.

    n is the generator order; M is the 2n x 2n companion matrix of the
    filter coefficients, N the last basis vector, Gamma the first-coordinate
    read-out row. Q maps generator states to settled filter states and is
    present only when the generator coefficients were supplied at build
    time.
    """

    n: int
    m_coeffs: np.ndarray
    M: np.ndarray
    N: np.ndarray
    Gamma: np.ndarray
    Q: np.ndarray = None

    @classmethod
    def build(cls, m_coeffs, a=None, hurwitz_margin=1e-9):
        """Construct the filter pair; with generator coefficients a, also
        solve for the settle map Q."""
        m = np.asarray(m_coeffs, dtype=float).reshape(-1)
        M, N = matcore.internal_model_matrices(m, hurwitz_margin)
        n = m.size // 2
        Gamma = np.zeros((1, n))
        Gamma[0, 0] = 1.0
        Q = None
        if a is not None:
            a = np.asarray(a, dtype=float).reshape(-1)
            if a.size != n:
                raise ShapeMismatch(
                    f"generator order {a.size} does not match filter length {m.size}"
                )
            Q = matcore.solve_generalized_sylvester(
                M, matcore.companion(a), N, Gamma[0]
            )
        return cls(n=n, m_coeffs=m, M=M, N=N, Gamma=Gamma, Q=Q)


@dataclass
class EstimatorState:
    """Learning state owned by a simulation loop: filter state, current
    coefficient estimate, and the learning gain."""

    eta: np.ndarray
    a_hat: np.ndarray
    k1: float = 1.0

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float).reshape(-1)
        self.a_hat = np.asarray(self.a_hat, dtype=float).reshape(-1)
        if self.eta.size != 2 * self.a_hat.size:
            raise ShapeMismatch("filter state must be twice the estimate length")
        if self.k1 <= 0:
            raise ConfigError("learning gain k1 must be positive")


@dataclass(frozen=True)
class SaturationConfig:
    """Support radius (squared) for the gated read-out.

    The default is large enough that the gate never closes at desk scale;
    it exists so the gated law stays globally bounded for analysis-style
    runs with large excursions.
    """

    delta: float = 1e6

    def __post_init__(self):
        if self.delta <= 0:
            raise ConfigError("saturation radius delta must be positive")


@dataclass(frozen=True, eq=False)
class FrequencyEstimate:
    """Frequencies encoded by a coefficient estimate, sorted ascending."""

    omegas: np.ndarray
    bias_present: bool
    raw_spectrum: matcore.Spectrum = field(repr=False, default=None)


def internal_model_rhs(spec, eta, u):
    """Filter derivative M eta + N u."""
    return spec.M @ eta + spec.N * float(u)


def chi(spec, eta, a_hat):
    """Steady-state input read out of the filter head.

    Evaluates Gamma Xi(a_hat) (eta_1, ..., eta_n): exact when the filter
    has settled and a_hat matches the generator; defined and smooth for any
    estimate with a nonsingular response matrix.
    """
    eta = np.asarray(eta, dtype=float).reshape(-1)
    Xi = matcore.xi_matrix(a_hat, spec.m_coeffs)
    return float(spec.Gamma[0] @ (Xi @ eta[: spec.n]))


def reconstruct_output(spec, eta, a_hat):
    """Observer read-out of the signal driving the filter; same map as chi."""
    return chi(spec, eta, a_hat)


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, strictly monotone between."""
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    p = math.exp(-1.0 / s)
    q = math.exp(-1.0 / (1.0 - s))
    return p / (p + q)


def chi_saturated(spec, eta, a_hat, sat):
    """chi gated by a smooth bump in the squared norm of (eta, a_hat).

    Coincides with chi exactly while ||(eta, a_hat)||^2 <= delta, vanishes
    identically beyond delta + 1, and blends smoothly in the unit shell
    between. The early-out at a closed gate also avoids evaluating the
    response matrix far outside its intended domain.
    """
    eta = np.asarray(eta, dtype=float).reshape(-1)
    a_hat = np.asarray(a_hat, dtype=float).reshape(-1)
    r2 = float(eta @ eta + a_hat @ a_hat)
    gate = smooth_step(sat.delta + 1.0 - r2)
    if gate == 0.0:
        return 0.0
    return chi(spec, eta, a_hat) * gate


def learning_residual(spec, eta, a_hat):
    """Recurrence residual Theta(eta) a_hat + (eta_{n+1}, ..., eta_{2n})."""
    eta = np.asarray(eta, dtype=float).reshape(-1)
    Theta = matcore.hankel(eta)
    return Theta, Theta @ np.asarray(a_hat, dtype=float).reshape(-1) + eta[spec.n :]


def learning_rhs(spec, state):
    """Gradient flow for the coefficient estimate.

    Steepest descent, scaled by the learning gain, on half the squared
    recurrence residual: -k1 Theta(eta)^T (Theta(eta) a_hat + tail(eta)).
    Zero exactly when the estimate is consistent with the current window,
    so any settled filter state makes the true coefficients an equilibrium.
    """
    Theta, resid = learning_residual(spec, state.eta, state.a_hat)
    return -state.k1 * (Theta.T @ resid)


def direct_a_estimate(spec, eta, cond_cap=1e8):
    """One-shot estimate from the current window: solve Theta(eta) a = -tail.

    Returns None while the window is not exciting enough, i.e. whenever
    cond(Theta(eta)) exceeds cond_cap; callers treat None as "not yet
    available" rather than an error. The estimate is invariant under
    positive scaling of eta.
    """
    eta = np.asarray(eta, dtype=float).reshape(-1)
    Theta = matcore.hankel(eta)
    c = np.linalg.cond(Theta)
    if not np.isfinite(c) or c > cond_cap:
        return None
    return np.linalg.solve(Theta, -eta[spec.n :])


def frequencies_from_a(a_hat, dedup_tol=1e-6, bias_tol=1e-6):
    """Frequencies encoded by a coefficient estimate.

    Takes the companion spectrum of the estimate; the positive imaginary
    parts, deduplicated within dedup_tol and sorted ascending, are the
    frequency estimates. Any eigenvalue within bias_tol of the origin flags
    a constant (bias) component.
    """
    a_hat = np.asarray(a_hat, dtype=float).reshape(-1)
    spectrum = matcore.eigenvalues(matcore.companion(a_hat))
    ims = sorted(im for _, im in spectrum.eigenvalues)
    scale = max(1.0, max(abs(x) for x in ims))
    for lo, hi in zip(ims, reversed(ims)):
        if abs(lo + hi) > 1e-8 * scale:
            raise ComplexPairingFailure(
                "spectrum of a real companion matrix is not conjugate symmetric"
            )
    bias = any(abs(complex(re, im)) < bias_tol for re, im in spectrum.eigenvalues)
    omegas = []
    for w in sorted(im for _, im in spectrum.eigenvalues if im > dedup_tol):
        if not omegas or w - omegas[-1] > dedup_tol:
            omegas.append(w)
    return FrequencyEstimate(
        omegas=np.array(omegas), bias_present=bias, raw_spectrum=spectrum
    )


def two_tone_frequencies(a):
    """Closed-form frequencies for a fourth-order two-tone pattern
    (a_2 = a_4 = 0): sqrt((a_3 +/- sqrt(a_3^2 - 4 a_1)) / 2).

    Returns None when the pattern or discriminant does not apply; used as a
    cross-check of the spectral route.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size != 4 or a[1] != 0.0 or a[3] != 0.0:
        return None
    disc = a[2] * a[2] - 4.0 * a[0]
    if disc <= 0.0:
        return None
    lo = (a[2] - math.sqrt(disc)) / 2.0
    hi = (a[2] + math.sqrt(disc)) / 2.0
    if lo <= 0.0:
        return None
    return np.array([math.sqrt(lo), math.sqrt(hi)])
