"""Dense complex linear algebra shared by every simulation module.

Operators are plain ``numpy`` arrays. :class:`HermitianOperator` and
:class:`DensityMatrix` are thin validating wrappers that also behave as
arrays (``np.asarray(op)`` returns the matrix), so every function here
accepts either form.

Vectorization is column-stacking throughout: ``vec(X) = X.reshape(-1,
order="F")`` and ``vec(A X B) = (B.T kron A) vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class InvariantError(ValueError):
    """A physical invariant (Hermiticity, trace, positivity, ...) is violated.

    ``step`` is the integration step index when the violation was detected
    inside a time loop, otherwise ``None``.
    """

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class ConvergenceError(RuntimeError):
    """A numerical kernel failed to converge."""


@dataclass(frozen=True)
class Tolerances:
    """Default numerical tolerances; pass a modified copy to override."""

    hermitian_rel: float = 1e-12
    trace: float = 1e-10
    positivity: float = -1e-8
    projector: float = 1e-10
    degeneracy_rel: float = 1e-9
    unitarity: float = 1e-12
    louisell_term: float = 1e-14
    louisell_max_terms: int = 64
    commuting: float = 1e-10


DEFAULT_TOL = Tolerances()


def as_matrix(x) -> np.ndarray:
    """Return ``x`` as a finite square complex matrix."""
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _same_dim(*mats):
    dims = {m.shape for m in mats}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


def hermiticity_defect(m: np.ndarray) -> float:
    """Relative max-norm distance of ``m`` from its adjoint."""
    scale = np.max(np.abs(m))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)) / scale)


class HermitianOperator:
    """Self-adjoint matrix, validated at construction."""

    __array_priority__ = 10

    def __init__(self, matrix, tol: Tolerances = DEFAULT_TOL):
        m = as_matrix(matrix)
        defect = hermiticity_defect(m)
        if defect > tol.hermitian_rel:
            raise InvariantError(f"operator is not Hermitian (relative defect {defect:.3e})")
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    __array_priority__ = 10

    def __init__(self, matrix, tol: Tolerances = DEFAULT_TOL, step=None):
        m = as_matrix(matrix)
        check_density(m, tol, step=step)
        self.matrix = m

    @classmethod
    def from_state(cls, psi, tol: Tolerances = DEFAULT_TOL):
        psi = np.asarray(psi, dtype=complex).ravel()
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise ValueError("zero state vector")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()), tol)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def check_density(m: np.ndarray, tol: Tolerances = DEFAULT_TOL, step=None) -> None:
    """Raise :class:`InvariantError` unless ``m`` is a valid density matrix."""
    defect = hermiticity_defect(m)
    if defect > tol.hermitian_rel:
        raise InvariantError(f"state is not Hermitian (relative defect {defect:.3e})", step)
    tr = np.trace(m)
    if abs(tr - 1) > tol.trace:
        raise InvariantError(f"trace deviates from 1 by {abs(tr - 1):.3e}", step)
    lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    if lo < tol.positivity:
        raise InvariantError(f"negative eigenvalue {lo:.3e}", step)


def commutator(G, X) -> np.ndarray:
    """``G X - X G``."""
    G, X = as_matrix(G), as_matrix(X)
    _same_dim(G, X)
    return G @ X - X @ G


def double_commutator_apply(V, rho) -> np.ndarray:
    """``[V, [V, rho]]``."""
    V, rho = as_matrix(V), as_matrix(rho)
    _same_dim(V, rho)
    inner = V @ rho - rho @ V
    return V @ inner - inner @ V


@dataclass
class SpectralDecomposition:
    """Distinct eigenvalues of a Hermitian operator with their projectors.

    ``basis`` holds orthonormal eigenvectors as columns and ``groups[j]`` the
    column indices spanning the eigenspace of ``eigenvalues[j]``.
    """

    eigenvalues: np.ndarray
    projectors: list
    basis: np.ndarray = field(repr=False)
    groups: list = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def level_of_vector(self) -> np.ndarray:
        """Index of the eigenvalue group owning each basis column."""
        out = np.empty(self.dim, dtype=int)
        for j, idx in enumerate(self.groups):
            out[idx] = j
        return out

    def vector_energies(self) -> np.ndarray:
        return self.eigenvalues[self.level_of_vector()]

    def reconstruct(self) -> np.ndarray:
        return sum(e * P for e, P in zip(self.eigenvalues, self.projectors))


def eigendecompose(H, tol: Tolerances = DEFAULT_TOL) -> SpectralDecomposition:
    """Spectral decomposition with near-degenerate eigenvalues merged.

    Eigenvalues closer than ``tol.degeneracy_rel`` times the spectral radius
    (or absolutely, for a zero operator) share one projector.
    """
    m = as_matrix(H)
    try:
        w, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(m)
        raise ConvergenceError(
            f"eigensolver failed for dim {m.shape[0]} matrix "
            f"(condition number {cond:.3e}, max |entry| {np.max(np.abs(m)):.3e})"
        ) from exc
    scale = max(float(np.max(np.abs(w))), 1.0)
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][-1]] < tol.degeneracy_rel * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    eigenvalues = np.array([w[g].mean() for g in groups])
    projectors = []
    for g in groups:
        B = vecs[:, g]
        projectors.append(B @ B.conj().T)
    return SpectralDecomposition(eigenvalues, projectors, vecs, [np.array(g) for g in groups])


def expm_hermitian_generator(H, s: float, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``exp(-i s H)`` for Hermitian ``H``, unitary to roundoff."""
    m = as_matrix(H)
    try:
        w, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed (condition {np.linalg.cond(m):.3e})") from exc
    return (vecs * np.exp(-1j * s * w)) @ vecs.conj().T


def louisell_conjugate(A, B, xi, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    r"""Nested-commutator series :math:`\sum_k \xi^k/k!\, C_A^k[B]`.

    Equals :math:`e^{\xi A} B e^{-\xi A}`. Terms are added until one has
    max-norm below ``tol.louisell_term`` (relative to ``B``).
    """
    A, B = as_matrix(A), as_matrix(B)
    _same_dim(A, B)
    scale = max(float(np.max(np.abs(B))), 1e-300)
    total = B.copy()
    nested = B
    for k in range(1, tol.louisell_max_terms + 1):
        nested = A @ nested - nested @ A
        term = (xi**k / factorial(k)) * nested
        total = total + term
        if np.max(np.abs(term)) < tol.louisell_term * scale:
            return total
    raise ConvergenceError(
        f"commutator series did not converge in {tol.louisell_max_terms} terms"
    )


def vec(X) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def superoperator_matrix(model) -> np.ndarray:
    r"""Column-stacked matrix of :math:`\rho \mapsto -i[H,\rho] - \sum_i \frac{\gamma_i}{2}[V_i,[V_i,\rho]]`.

    ``model`` needs ``H`` and ``channels`` (pairs of operator and noise
    kernel); every kernel must be time-constant, with rate ``v**2``.
    """
    H = as_matrix(model.H)
    d = H.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for V, kernel in model.channels:
        if not kernel.is_constant:
            raise ValueError("superoperator path requires time-constant kernels")
        gamma = kernel.rate(0.0)
        if gamma == 0:
            continue
        V = as_matrix(V)
        V2 = V @ V
        L -= 0.5 * gamma * (np.kron(eye, V2) + np.kron(V2.T, eye) - 2 * np.kron(V.T, V))
    return L


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """GUE-like Hermitian matrix, used by tests and the self-check suite."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (z + z.conj().T)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    z = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
