"""Concrete plants and reference generators used by the bundled scenarios."""

from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import ConfigError, ShapeMismatch


def unit_input_gain(v, w):
    """Default input gain: identically 1 regardless of reference and
    uncertainty."""
    return 1.0


@dataclass(eq=False)
class LorenzPlant:
    """Controlled Lorenz-type plant with a scalar measured output.

    States are the internal pair z = (z_1, z_2) and the output y; the
    control enters y' through the positive input gain b_fun(v, w). The
    effective coefficients are L_bar + w, with L_1 > 0 and L_3 < 0 required
    so the internal dynamics stay dissipative. sigma is the rate of the
    rotation reference this plant is meant to track; the matching
    fourth-order generator has coefficient vector
    (9 sigma^4, 0, 10 sigma^2, 0), with tones at sigma and 3 sigma.

    Defaults are declared scenario choices: L_bar = (10, 8/3, -28), w = 0,
    b identically 1 and sigma = 1/3. The default rate is deliberately slow:
    the bundled stability filter for this scenario passes frequencies near
    the unit circle, so sigma = 1/3 places both generator tones in its
    passband. Faster rates push the upper tone far into the stopband, which
    starves the coefficient learning of excitation (see the scenario notes
    in the README).
    """

    L_bar: tuple = (10.0, 8.0 / 3.0, -28.0)
    w: tuple = (0.0, 0.0, 0.0)
    sigma: float = 1.0 / 3.0
    b_fun: object = unit_input_gain

    def __post_init__(self):
        self.L_bar = tuple(float(x) for x in self.L_bar)
        self.w = tuple(float(x) for x in self.w)
        if len(self.L_bar) != 3 or len(self.w) != 3:
            raise ShapeMismatch("L_bar and w must each have three entries")
        L1, _, L3 = self.L
        if L1 <= 0.0 or L3 >= 0.0:
            raise ConfigError(
                "effective coefficients need L_1 > 0 and L_3 < 0, got "
                f"L_1 = {L1:g}, L_3 = {L3:g}"
            )
        if self.sigma <= 0.0:
            raise ConfigError("reference rate sigma must be positive")

    @property
    def L(self):
        """Effective coefficients L_bar + w."""
        return tuple(lb + wi for lb, wi in zip(self.L_bar, self.w))

    def generator_coeffs(self):
        """Coefficient vector of the fourth-order generator that carries the
        ideal steady-state input for the rotation reference at rate sigma."""
        s2 = self.sigma * self.sigma
        return np.array([9.0 * s2 * s2, 0.0, 10.0 * s2, 0.0])


def lorenz_rhs(p, z, y, v, u):
    """Plant vector field; returns (z', y').

    z_1' = -L_1 z_1 + L_1 y, z_2' = y z_1 - L_2 z_2, and
    y' = z_1 (L_3 - z_2) - y + b u. The tracked output error is y - v_1.
    """
    L1, L2, L3 = p.L
    b = p.b_fun(v, p.w)
    z1, z2 = float(z[0]), float(z[1])
    y = float(y)
    z_dot = np.array([-L1 * z1 + L1 * y, y * z1 - L2 * z2])
    y_dot = z1 * (L3 - z2) - y + b * float(u)
    return z_dot, y_dot


@dataclass(eq=False)
class QuarterCarPlant:
    """Quarter-car suspension: sprung and unsprung masses with an active
    force actuator between them.

    Units are kg, N s/m and N/m. The state is (suspension deflection,
    sprung-mass velocity, tire deflection, unsprung-mass velocity); the
    road enters through its vertical velocity.
    """

    m_s: float = 2.40
    m_u: float = 0.36
    b_s: float = 9.8
    k_s: float = 160.0
    k_t: float = 1600.0
    b_t: float = 0.0

    def __post_init__(self):
        if min(self.m_s, self.m_u, self.k_s, self.k_t) <= 0.0:
            raise ConfigError("masses and stiffnesses must be positive")
        if min(self.b_s, self.b_t) < 0.0:
            raise ConfigError("damping coefficients must be nonnegative")


def quarter_car_matrices(p):
    """State-space triple (A, B, B_d) with x' = A x + B u + B_d r, where r
    is the road vertical velocity."""
    A = np.array(
        [
            [0.0, 1.0, 0.0, -1.0],
            [-p.k_s / p.m_s, -p.b_s / p.m_s, 0.0, p.b_s / p.m_s],
            [0.0, 0.0, 0.0, 1.0],
            [p.k_s / p.m_u, p.b_s / p.m_u, -p.k_t / p.m_u, -(p.b_s + p.b_t) / p.m_u],
        ]
    )
    B = np.array([0.0, 1.0 / p.m_s, 0.0, -1.0 / p.m_s])
    B_d = np.array([0.0, 0.0, -1.0, p.b_t / p.m_u])
    return A, B, B_d


@dataclass(eq=False)
class Exosystem:
    """Marginally stable oscillator bank v' = companion(a) v.

    The coefficient vector must place all companion modes on the imaginary
    axis, pairwise distinct, so every mode is a sustained tone (plus at
    most one constant). Modal energies are conserved along trajectories.
    """

    a: np.ndarray
    v0: np.ndarray
    mode_tol: float = field(default=1e-8, repr=False)
    # a defective double mode scatters like sqrt(machine eps) ~ 1.5e-8 under
    # the eigensolver, so the separation test must sit well above that
    sep_tol: float = field(default=1e-6, repr=False)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(-1)
        self.v0 = np.asarray(self.v0, dtype=float).reshape(-1)
        if self.v0.size != self.a.size:
            raise ShapeMismatch("initial state must match the coefficient order")
        lam = matcore.eigenvalues(matcore.companion(self.a)).as_complex()
        scale = max(1.0, float(np.max(np.abs(lam))))
        if np.max(np.abs(lam.real)) > self.mode_tol * scale:
            raise ConfigError("generator modes must sit on the imaginary axis")
        for i in range(lam.size):
            for j in range(i + 1, lam.size):
                if abs(lam[i] - lam[j]) <= self.sep_tol * scale:
                    raise ConfigError("generator modes must be pairwise distinct")
        self.Phi = matcore.companion(self.a)

    @property
    def n(self):
        return self.a.size


def exosystem_rhs(exo, v):
    """Generator derivative companion(a) v."""
    return exo.Phi @ np.asarray(v, dtype=float).reshape(-1)
