"""Feedforward regulation for linear plants driven by a harmonic generator.

The ideal feedforward law solves two coupled matrix equations in a state
map X and an input row U:

    X Phi(a) = A X + B U + P        0 = C X + D U + F

This module assembles their single Kronecker form G zeta = b over the
column-stacked unknown zeta = vec(col(X; U)), solves it directly as an
oracle, integrates the same system as a gradient flow when only an
estimate of a is available, and evaluates the resulting control law.
"""

from dataclasses import dataclass

import numpy as np

from . import matcore
from .errors import ConfigError, HurwitzViolation, ShapeMismatch, SingularSystem


@dataclass(eq=False)
class LinearPlant:
    """Single-input linear plant x' = A x + B u + P v with regulated output
    e = C x + D u + F v and a stabilizing state-feedback row K_x.

    B, C, F and K_x are stored as flat vectors (B a column, the others
    rows); D is scalar. Construction fails unless A + B K_x is Hurwitz,
    since every law built here assumes the stabilized plant.
    """

    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    C: np.ndarray
    D: float
    F: np.ndarray
    K_x: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n_x = self.A.shape[0]
        if self.A.shape != (n_x, n_x):
            raise ShapeMismatch(f"A must be square, got {self.A.shape}")
        self.B = np.asarray(self.B, dtype=float).reshape(-1)
        self.C = np.asarray(self.C, dtype=float).reshape(-1)
        self.K_x = np.asarray(self.K_x, dtype=float).reshape(-1)
        if self.B.size != n_x or self.C.size != n_x or self.K_x.size != n_x:
            raise ShapeMismatch("B, C and K_x must all have the state dimension")
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        if self.P.shape[0] != n_x:
            raise ShapeMismatch(f"P must have {n_x} rows, got {self.P.shape}")
        self.F = np.asarray(self.F, dtype=float).reshape(-1)
        if self.F.size != self.P.shape[1]:
            raise ShapeMismatch("F must match the generator dimension of P")
        self.D = float(self.D)
        worst = matcore.eigenvalues(self.A + np.outer(self.B, self.K_x)).max_real()
        if worst >= 0.0:
            raise HurwitzViolation(
                f"A + B K_x must be Hurwitz: max Re(lambda) = {worst:.6e}"
            )

    @property
    def n_x(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.P.shape[1]


@dataclass
class RegulatorSolution:
    """Column-stacked solution vector of the feedforward equations plus the
    flow gain that integrates it. X_hat and U_hat are views of zeta_hat, so
    the unstacking invariant holds by construction."""

    zeta_hat: np.ndarray
    n_x: int
    n: int
    k2: float = 1.0

    def __post_init__(self):
        self.zeta_hat = np.asarray(self.zeta_hat, dtype=float).reshape(-1)
        if self.zeta_hat.size != (self.n_x + 1) * self.n:
            raise ShapeMismatch(
                f"solution vector needs {(self.n_x + 1) * self.n} entries"
            )
        if self.k2 <= 0:
            raise ConfigError("flow gain k2 must be positive")

    def _blocks(self):
        return self.zeta_hat.reshape((self.n_x + 1, self.n), order="F")

    @property
    def X_hat(self):
        """State-map block of the current solution."""
        return self._blocks()[: self.n_x, :]

    @property
    def U_hat(self):
        """Input-map row of the current solution."""
        return self._blocks()[self.n_x, :]


def stack_solution(X, U):
    """Column-stack a state map and input row into one solution vector."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.asarray(U, dtype=float).reshape(1, -1)
    if U.shape[1] != X.shape[1]:
        raise ShapeMismatch("X and U must have the same number of columns")
    return matcore.vec(np.vstack([X, U]))


def assemble_regulator_system(plant, a_hat):
    """Kronecker form (G, b) of the two feedforward equations.

    G is square of size n (n_x + 1), built from the current coefficient
    estimate, and acts on the column-stacked unknown col(X; U); b stacks
    the forcing vec(col(P; F)). b does not depend on a_hat.
    """
    a_hat = np.asarray(a_hat, dtype=float).reshape(-1)
    if a_hat.size != plant.n:
        raise ShapeMismatch(
            f"estimate order {a_hat.size} does not match the plant forcing {plant.n}"
        )
    n_x = plant.n_x
    Phi = matcore.companion(a_hat)
    E = np.zeros((n_x + 1, n_x + 1))
    E[:n_x, :n_x] = np.eye(n_x)
    S = np.zeros((n_x + 1, n_x + 1))
    S[:n_x, :n_x] = plant.A
    S[:n_x, n_x] = plant.B
    S[n_x, :n_x] = plant.C
    S[n_x, n_x] = plant.D
    G = np.kron(Phi.T, E) - np.kron(np.eye(plant.n), S)
    b = matcore.vec(np.vstack([plant.P, plant.F.reshape(1, -1)]))
    return G, b


def solve_regulator_static(G, b, n_x, n, k2=1.0):
    """Direct dense solve of the assembled system; the oracle the gradient
    flow is measured against.

    Raises SingularSystem when no unique solution exists, which happens
    exactly when a transmission zero of the plant coincides with a
    generator mode.
    """
    G = np.asarray(G, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    try:
        zeta = np.linalg.solve(G, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("feedforward system is singular") from exc
    resid = np.linalg.norm(G @ zeta - b)
    if not np.isfinite(resid) or resid > 1e-9 * (1.0 + np.linalg.norm(b)):
        raise SingularSystem(
            f"feedforward solve residual {resid:.3e}; system is near singular"
        )
    return RegulatorSolution(zeta_hat=zeta, n_x=n_x, n=n, k2=k2)


def gradient_flow_rhs(sol, G_t, b):
    """Time-varying gradient flow -k2 G(t)^T (G(t) zeta_hat - b): steepest
    descent on half the squared equation residual at the current estimate."""
    return -sol.k2 * (G_t.T @ (G_t @ sol.zeta_hat - b))


def feedforward_control(plant, sol, spec, eta, a_hat, x):
    """Certainty-equivalence feedforward law.

    u = K_x x + (U_hat - K_x X_hat) Xi(a_hat) (eta_1, ..., eta_n): the
    filter head is mapped back to generator coordinates through the
    response matrix and fed through the solved input map.
    """
    eta = np.asarray(eta, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    Xi = matcore.xi_matrix(a_hat, spec.m_coeffs)
    v_hat = Xi @ eta[: spec.n]
    gain_row = sol.U_hat - plant.K_x @ sol.X_hat
    return float(plant.K_x @ x + gain_row @ v_hat)
