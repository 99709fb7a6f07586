"""Dense real-matrix algebra for companion-form generators and stable filters.

Everything operates on small numpy float arrays (dimension capped at desk
scale). The coefficient convention used across the package: a vector
a = (a_1, ..., a_n) holds the coefficients of the monic polynomial

    p(s) = s^n + a_n s^(n-1) + ... + a_2 s + a_1

so a_1 is the constant term and companion(a) has p as its characteristic
polynomial. All functions are pure and never mutate their inputs.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    HurwitzViolation,
    NoUniqueSolution,
    ShapeMismatch,
    SingularXi,
)

# Hard cap on eigenvalue problems; everything in this package is tiny and a
# cap catches accidentally transposed shapes early.
EIG_DIM_CAP = 32


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues as (real, imag) pairs, conjugate-paired for real input."""

    eigenvalues: tuple

    def max_real(self):
        return max(re for re, _ in self.eigenvalues)

    def as_complex(self):
        return np.array([complex(re, im) for re, im in self.eigenvalues])


def _coeffs(a, name="coefficient vector"):
    a = np.asarray(a, dtype=float)
    if a.ndim > 1:
        raise ShapeMismatch(f"{name} must be one-dimensional, got shape {a.shape}")
    a = a.reshape(-1)
    if a.size < 1:
        raise ShapeMismatch(f"{name} must have at least one entry")
    if not np.all(np.isfinite(a)):
        raise ShapeMismatch(f"{name} must be finite")
    return a


def _square(A, name="matrix"):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got shape {A.shape}")
    return A


def companion(a):
    """Companion matrix of the monic polynomial with coefficient vector a.

    The result is n x n with the identity block on the superdiagonal and
    last row (-a_1, ..., -a_n). Total on any finite vector.
    """
    a = _coeffs(a)
    n = a.size
    P = np.zeros((n, n))
    if n > 1:
        P[: n - 1, 1:] = np.eye(n - 1)
    P[-1, :] = -a
    return P


def eigenvalues(A):
    """Full spectrum of a small square real matrix.

    Delegates to the LAPACK Hessenberg-plus-shifted-QR path, which returns
    exact conjugate pairs for real input. Pairs are sorted by real part,
    then imaginary part, for deterministic output.
    """
    A = _square(A)
    if A.shape[0] > EIG_DIM_CAP:
        raise ShapeMismatch(
            f"dimension {A.shape[0]} is above the desk-scale cap {EIG_DIM_CAP}"
        )
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigenvalue iteration failed: {exc}") from exc
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    return Spectrum(tuple((float(z.real), float(z.imag)) for z in lam))


def internal_model_matrices(m, hurwitz_margin=1e-9):
    """Stable filter pair (M, N) from 2n filter coefficients.

    M is the 2n x 2n companion matrix of m and N the last standard basis
    vector, so (M, N) is controllable by construction. Raises
    HurwitzViolation unless every eigenvalue of M has real part below
    -hurwitz_margin.
    """
    m = _coeffs(m, "filter coefficient vector")
    if m.size % 2 != 0:
        raise ShapeMismatch("filter coefficient vector must have even length 2n")
    M = companion(m)
    N = np.zeros(m.size)
    N[-1] = 1.0
    worst = eigenvalues(M).max_real()
    if worst >= -hurwitz_margin:
        raise HurwitzViolation(
            f"filter companion matrix is not Hurwitz: max Re(lambda) = {worst:.6e}"
        )
    return M, N


def _has_distinct_imaginary_spectrum(Phi, tol=1e-6):
    lam = np.linalg.eigvals(Phi)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.max(np.abs(lam.real)) > tol * scale:
        return False
    for i in range(lam.size):
        for j in range(i + 1, lam.size):
            if abs(lam[i] - lam[j]) <= tol * scale:
                return False
    return True


def xi_matrix(a, m, cond_cap=1e12, check_spectrum=False):
    """Filter response matrix Phi(a)^(2n) + sum_j m_j Phi(a)^(j-1).

    This n x n matrix maps the head of a settled filter state back onto
    generator coordinates; it is invertible whenever companion(a) has
    distinct eigenvalues on the imaginary axis and m is a stable filter.
    Raises SingularXi when the condition number exceeds cond_cap. With
    check_spectrum=True the distinctness precondition is tested numerically
    and a warning is emitted when it fails (invertibility is then not
    guaranteed).
    """
    a = _coeffs(a)
    m = _coeffs(m, "filter coefficient vector")
    n = a.size
    if m.size != 2 * n:
        raise ShapeMismatch(
            f"filter length {m.size} does not match generator order {n} (need 2n)"
        )
    Phi = companion(a)
    if check_spectrum and not _has_distinct_imaginary_spectrum(Phi):
        warnings.warn(
            "generator modes are not distinct imaginary-axis eigenvalues; "
            "the filter response matrix may be singular",
            RuntimeWarning,
            stacklevel=2,
        )
    X = np.linalg.matrix_power(Phi, 2 * n)
    Pk = np.eye(n)
    for mj in m:
        X = X + mj * Pk
        Pk = Pk @ Phi
    c = np.linalg.cond(X)
    if not np.isfinite(c) or c > cond_cap:
        raise SingularXi(
            f"filter response matrix condition number {c:.3e} exceeds cap {cond_cap:.1e}"
        )
    return X


def hankel(theta):
    """Square Hankel window of an even-length sample vector.

    For a 2n-vector, entry (i, j) is theta[i + j] (zero-based), so rows are
    successive length-n windows. Only the first 2n-1 samples enter the
    matrix; the final sample is consumed separately by the learning
    residual, and the overlap between the two is intentional.
    """
    theta = _coeffs(theta, "sample vector")
    if theta.size % 2 != 0:
        raise ShapeMismatch("hankel window needs an even-length sample vector")
    n = theta.size // 2
    return np.stack([theta[i : i + n] for i in range(n)])


def kron(A, B):
    """Kronecker product of two matrices (vectors are promoted to rows)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return np.kron(A, B)


def vec(A):
    """Column-stacking vectorization: vec([[1,2],[3,4]]) = (1,3,2,4)."""
    return np.asarray(A, dtype=float).flatten(order="F")


def unvec(v, rows, cols):
    """Inverse of vec; raises ShapeMismatch unless v has rows*cols entries."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != rows * cols:
        raise ShapeMismatch(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def solve_generalized_sylvester(M, Phi, N, Gamma):
    """Solve M Q = Q Phi - N Gamma for Q by one dense Kronecker-form solve.

    M is p x p, Phi is q x q, N a p-vector and Gamma a q-row; the solution
    is the unique p x q matrix whenever the spectra of M and Phi are
    disjoint. Raises NoUniqueSolution when the vectorized system is
    singular or the solution fails its own residual bound.
    """
    M = _square(M, "left matrix")
    Phi = _square(Phi, "right matrix")
    p = M.shape[0]
    q = Phi.shape[0]
    N = np.asarray(N, dtype=float).reshape(-1)
    Gamma = np.asarray(Gamma, dtype=float).reshape(-1)
    if N.size != p or Gamma.size != q:
        raise ShapeMismatch(
            f"forcing shapes ({N.size}, {Gamma.size}) do not match ({p}, {q})"
        )
    A = np.kron(np.eye(q), M) - np.kron(Phi.T, np.eye(p))
    rhs = -vec(np.outer(N, Gamma))
    try:
        qvec = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NoUniqueSolution(
            "vectorized Sylvester system is singular; the two spectra overlap"
        ) from exc
    Q = unvec(qvec, p, q)
    resid = np.linalg.norm(M @ Q - Q @ Phi + np.outer(N, Gamma))
    if not np.isfinite(resid) or resid > 1e-10 * (1.0 + np.linalg.norm(Q)):
        raise NoUniqueSolution(
            f"Sylvester residual {resid:.3e} too large; system is near singular"
        )
    return Q
