"""Companion/Hankel/Sylvester algebra against hand-worked oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regulata import matcore
from regulata.errors import (
    ConvergenceFailure,
    HurwitzViolation,
    NoUniqueSolution,
    ShapeMismatch,
    SingularXi,
)

from conftest import random_filter, random_generator


def test_companion_layout():
    A = matcore.companion((1.0, 2.0, 3.0))
    assert np.array_equal(
        A, np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -2.0, -3.0]])
    )


def test_companion_characteristic_convention():
    # coefficients are ascending: a[0] is the constant term
    A = matcore.companion((4.0, 0.0))
    eigs = matcore.eigenvalues(A).as_complex()
    assert np.allclose(sorted(z.imag for z in eigs), [-2.0, 2.0], atol=1e-12)
    assert np.allclose([z.real for z in eigs], 0.0, atol=1e-12)


@settings(deadline=None, max_examples=30)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_companion_matches_polynomial_roots(coeffs):
    a = np.asarray(coeffs, dtype=float)
    A = matcore.companion(a)
    got = np.sort_complex(np.array(matcore.eigenvalues(A).as_complex()))
    want = np.sort_complex(np.roots(np.concatenate([[1.0], a[::-1]])))
    if want.size == 0:
        want = np.zeros(0, dtype=complex)
    assert np.allclose(got, want, atol=1e-6)


def test_companion_rejects_bad_input():
    with pytest.raises(ShapeMismatch):
        matcore.companion(())
    with pytest.raises(ShapeMismatch):
        matcore.companion((1.0, float("nan")))
    with pytest.raises(ShapeMismatch):
        matcore.companion(np.ones((2, 2)))


def test_eigenvalues_deterministic_order():
    A = np.array([[0.0, 1.0], [-4.0, 0.0]])
    s1 = matcore.eigenvalues(A)
    s2 = matcore.eigenvalues(A.copy())
    assert s1.eigenvalues == s2.eigenvalues
    assert s1.max_real() == pytest.approx(0.0, abs=1e-12)


def test_eigenvalues_dimension_cap():
    with pytest.raises(ShapeMismatch):
        matcore.eigenvalues(np.eye(matcore.EIG_DIM_CAP + 1))


def test_internal_model_matrices_layout():
    M, N = matcore.internal_model_matrices((2.0, 3.0))
    assert np.array_equal(M, np.array([[0.0, 1.0], [-2.0, -3.0]]))
    assert np.array_equal(N, np.array([0.0, 1.0]))


def test_internal_model_matrices_rejects_unstable():
    # s^2 - 1 has a root at +1
    with pytest.raises(HurwitzViolation):
        matcore.internal_model_matrices((-1.0, 0.0))
    # odd length cannot be a full-order filter
    with pytest.raises(ShapeMismatch):
        matcore.internal_model_matrices((1.0, 2.0, 3.0))


def test_xi_matrix_scalar_oracle():
    # n = 1: Xi = Phi^2 + m1 I + m2 Phi with Phi = [[-a1]]
    # a1 = 2, m = (3, 1): 4 + 3 - 2 = 5
    Xi = matcore.xi_matrix((2.0,), (3.0, 1.0))
    assert Xi.shape == (1, 1)
    assert Xi[0, 0] == pytest.approx(5.0, abs=1e-14)


def test_xi_matrix_singular_raises():
    # a1 = 1, m = (0, 1): 1 + 0 - 1 = 0
    with pytest.raises(SingularXi):
        matcore.xi_matrix((1.0,), (0.0, 1.0))


def test_xi_matrix_warns_on_repeated_modes():
    # (s^2 + 1)^2 has a repeated imaginary pair
    a = (1.0, 0.0, 2.0, 0.0)
    m = tuple(random_filter(np.random.default_rng(3), 8))
    with pytest.warns(RuntimeWarning):
        matcore.xi_matrix(a, m, check_spectrum=True)


def test_hankel_layout_and_window():
    H = matcore.hankel((1.0, 2.0, 3.0, 4.0))
    assert np.array_equal(H, np.array([[1.0, 2.0], [2.0, 3.0]]))
    with pytest.raises(ShapeMismatch):
        matcore.hankel((1.0, 2.0, 3.0))


@settings(deadline=None, max_examples=30)
@given(st.integers(1, 4), st.integers(1, 4))
def test_vec_unvec_round_trip(rows, cols):
    rng = np.random.default_rng(rows * 7 + cols)
    A = rng.standard_normal((rows, cols))
    v = matcore.vec(A)
    assert v.shape == (rows * cols,)
    assert np.array_equal(matcore.unvec(v, rows, cols), A)


def test_vec_is_column_major():
    assert np.array_equal(
        matcore.vec(np.array([[1.0, 2.0], [3.0, 4.0]])),
        np.array([1.0, 3.0, 2.0, 4.0]),
    )
    with pytest.raises(ShapeMismatch):
        matcore.unvec(np.arange(5.0), 2, 2)


def test_kron_matches_hand_block():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    B = np.array([[0.0, 1.0], [1.0, 0.0]])
    K = matcore.kron(A, B)
    assert np.array_equal(K[:2, 2:], 2.0 * B)
    assert np.array_equal(K[2:, :2], 0.0 * B)


def test_sylvester_scalar_oracle():
    # n = 1, a = (0), m = (2, 3): M Q = -N Gamma so Q = -M^{-1} N = (1/2, 0)
    M, N = matcore.internal_model_matrices((2.0, 3.0))
    Q = matcore.solve_generalized_sylvester(
        M, matcore.companion((0.0,)), N.reshape(-1, 1), np.array([[1.0]])
    )
    assert np.allclose(Q, np.array([[0.5], [0.0]]), atol=1e-14)


def test_sylvester_residual_property():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3, 4):
        a = random_generator(rng, n)
        m = random_filter(rng, 2 * n)
        M, N = matcore.internal_model_matrices(m)
        Phi = matcore.companion(a)
        Gamma = np.zeros((1, n))
        Gamma[0, 0] = 1.0
        Q = matcore.solve_generalized_sylvester(M, Phi, N.reshape(-1, 1), Gamma)
        resid = M @ Q - Q @ Phi + N.reshape(-1, 1) @ Gamma
        assert np.linalg.norm(resid) <= 1e-10 * (1.0 + np.linalg.norm(Q))


def test_sylvester_detects_shared_modes():
    # M and Phi share the spectrum {+i, -i}; no unique solution exists
    Phi = matcore.companion((1.0, 0.0))
    N = np.array([[0.0], [1.0]])
    Gamma = np.array([[1.0, 0.0]])
    with pytest.raises(NoUniqueSolution):
        matcore.solve_generalized_sylvester(Phi, Phi, N, Gamma)


def test_hankel_factorization_identity():
    # Theta(Q xi) equals Xi^{-1} [xi, Phi xi, ..., Phi^{n-1} xi] pointwise
    rng = np.random.default_rng(23)
    for n in (1, 2, 3, 4):
        a = random_generator(rng, n)
        m = random_filter(rng, 2 * n)
        M, N = matcore.internal_model_matrices(m)
        Phi = matcore.companion(a)
        Gamma = np.zeros((1, n))
        Gamma[0, 0] = 1.0
        Q = matcore.solve_generalized_sylvester(M, Phi, N.reshape(-1, 1), Gamma)
        Xi = matcore.xi_matrix(a, m)
        for _ in range(5):
            xi = rng.standard_normal(n)
            K = np.column_stack(
                [np.linalg.matrix_power(Phi, j) @ xi for j in range(n)]
            )
            ref = np.linalg.solve(Xi, K)
            got = matcore.hankel(Q @ xi)
            assert np.linalg.norm(got - ref) <= 1e-8 * (1.0 + np.linalg.norm(ref))
