import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from randevolve.core import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    ConvergenceError,
    DensityMatrix,
    DimensionError,
    HermitianOperator,
    InvariantError,
    Tolerances,
    check_density,
    commutator,
    double_commutator_apply,
    eigendecompose,
    expm_hermitian_generator,
    louisell_conjugate,
    random_density,
    random_hermitian,
    superoperator_matrix,
    unvec,
    vec,
)
from randevolve.lindblad import LindbladModel, generator_apply

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 6)


def test_hermitian_operator_accepts_and_rejects():
    op = HermitianOperator(PAULI_Y)
    assert op.dim == 2
    assert np.array_equal(np.asarray(op), PAULI_Y)
    with pytest.raises(InvariantError):
        HermitianOperator([[0, 1], [0, 0]])


def test_density_matrix_checks():
    DensityMatrix(np.eye(3) / 3)
    with pytest.raises(InvariantError, match="trace"):
        DensityMatrix(np.eye(2))
    with pytest.raises(InvariantError, match="negative"):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(InvariantError, match="Hermitian"):
        DensityMatrix([[0.5, 0.1], [0.3, 0.5]])


def test_invariant_error_carries_step():
    with pytest.raises(InvariantError) as info:
        check_density(np.eye(2), step=7)
    assert info.value.step == 7
    assert "step 7" in str(info.value)


def test_from_state_normalizes():
    rho = DensityMatrix.from_state([1, 1j]).matrix
    assert np.allclose(rho, [[0.5, -0.5j], [0.5j, 0.5]])
    with pytest.raises(ValueError):
        DensityMatrix.from_state([0, 0])


def test_commutator_pauli_algebra():
    assert np.allclose(commutator(PAULI_X, PAULI_Y), 2j * PAULI_Z)
    # [Z, [Z, X]] = 4 X
    assert np.allclose(double_commutator_apply(PAULI_Z, PAULI_X), 4 * PAULI_X)
    with pytest.raises(DimensionError):
        commutator(np.eye(2), np.eye(3))


@given(seeds, dims)
def test_eigendecompose_reconstructs(seed, d):
    rng = np.random.default_rng(seed)
    H = random_hermitian(d, rng)
    dec = eigendecompose(H)
    assert np.allclose(dec.reconstruct(), H, atol=1e-10)
    assert np.allclose(sum(dec.projectors), np.eye(d), atol=1e-10)
    for P in dec.projectors:
        assert np.allclose(P @ P, P, atol=1e-10)


def test_eigendecompose_merges_degenerate_levels():
    H = np.diag([1.0, 1.0 + 1e-13, 2.0, 2.0, 2.0])
    dec = eigendecompose(H)
    assert np.allclose(dec.eigenvalues, [1.0, 2.0])
    assert [len(g) for g in dec.groups] == [2, 3]
    assert np.allclose(dec.vector_energies(), [1, 1, 2, 2, 2])


@given(seeds, dims, st.floats(-3, 3))
def test_expm_hermitian_generator_matches_scipy(seed, d, s):
    H = random_hermitian(d, np.random.default_rng(seed))
    U = expm_hermitian_generator(H, s)
    assert np.allclose(U, expm(-1j * s * H), atol=1e-10)
    assert np.allclose(U @ U.conj().T, np.eye(d), atol=1e-12)


@given(seeds, st.floats(-1, 1), st.booleans())
def test_louisell_series_matches_conjugation(seed, x, imaginary):
    rng = np.random.default_rng(seed)
    A = random_hermitian(4, rng, 0.5)
    B = random_hermitian(4, rng)
    xi = 1j * x if imaginary else x
    ref = expm(xi * A) @ B @ expm(-xi * A)
    assert np.max(np.abs(louisell_conjugate(A, B, xi) - ref)) < 1e-9


def test_louisell_reports_nonconvergence():
    rng = np.random.default_rng(1)
    A, B = random_hermitian(4, rng, 50.0), random_hermitian(4, rng)
    with pytest.raises(ConvergenceError):
        louisell_conjugate(A, B, 1.0, Tolerances(louisell_max_terms=5))


@given(seeds, st.integers(1, 5))
def test_vec_identity(seed, d):
    rng = np.random.default_rng(seed)
    A, X, B = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(3))
    assert np.allclose(np.kron(B.T, A) @ vec(X), vec(A @ X @ B))
    assert np.array_equal(unvec(vec(X), d), X)


@given(seeds, st.integers(1, 4), st.floats(0, 2))
def test_superoperator_matches_generator(seed, d, gamma):
    rng = np.random.default_rng(seed)
    model = LindbladModel(random_hermitian(d, rng), [(random_hermitian(d, rng), gamma)])
    rho = random_density(d, rng)
    L = superoperator_matrix(model)
    assert np.allclose(unvec(L @ vec(rho), d), generator_apply(model, rho, 0.0), atol=1e-10)


def test_random_density_is_valid(rng):
    for rank in (1, 2, 4):
        check_density(random_density(4, rng, rank))
