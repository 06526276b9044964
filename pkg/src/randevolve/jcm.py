"""Resonant multiphoton Jaynes-Cummings model on a truncated Fock space.

Basis ordering is atom-major: index ``atom * (n_max + 1) + n`` with
``atom = 0`` the excited level ``|+>`` and ``atom = 1`` the ground level
``|->``. ``S_z`` has eigenvalues ``+1/2`` and ``-1/2``, so the inversion
series below equal ``2 Tr[rho S_z]``.

With ``f(n) = (n + m)! / n!`` the doublet ``{|+, n>, |-, n + m>}`` is split
by ``2 lam sqrt(f(n))``. Phase damping with ``V = sqrt(gamma) H`` multiplies
the doublet coherence by ``exp(-2 gamma lam**2 f(n) t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from .core import InvariantError
from .ensemble import EnsembleConfig, RandomUnitaryModel, ensemble_average
from .stochastic import NoiseKernel

TRUNCATION_TOL = 1e-10


@dataclass(frozen=True)
class JcmParams:
    omega: float
    lam: float
    m: int = 1
    n_max: int = 20
    omega0: float | None = None

    def __post_init__(self):
        if self.m < 1 or int(self.m) != self.m:
            raise ValueError("photon multiplicity m must be a positive integer")
        if self.n_max < self.m:
            raise ValueError("n_max must be at least m")
        if self.omega0 is None:
            object.__setattr__(self, "omega0", self.m * self.omega)
        elif not np.isclose(self.omega0, self.m * self.omega, rtol=1e-12, atol=1e-12):
            raise ValueError("resonance requires omega0 = m * omega")

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)


def rabi_factor(n, m: int):
    """``sqrt((n + m)! / n!)`` for scalar or array ``n >= 0``."""
    n = np.asarray(n, dtype=float)
    return np.sqrt(np.exp(np.vectorize(lgamma)(n + m + 1) - np.vectorize(lgamma)(n + 1)))


def coherent_weights(alpha: complex, n_max: int) -> np.ndarray:
    """Amplitudes ``Q_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!)`` for ``n <= n_max``.

    Raises ``InvariantError`` when the truncated weights miss more than
    ``TRUNCATION_TOL`` of the norm.
    """
    n = np.arange(n_max + 1)
    logmag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha) if alpha != 0 else 1.0) \
        - 0.5 * np.array([lgamma(k + 1) for k in n])
    Q = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
    if alpha == 0:
        Q = (n == 0).astype(complex)
    missing = 1 - np.sum(np.abs(Q) ** 2)
    if missing > TRUNCATION_TOL:
        raise InvariantError(f"n_max={n_max} misses {missing:.3e} of the coherent state norm")
    return Q


def default_truncation(alpha: complex, m: int = 1, tol: float = TRUNCATION_TOL) -> int:
    """Smallest ``n`` holding all but ``tol`` of the Poisson weight, plus ``m`` guard levels."""
    mean = abs(alpha) ** 2
    total, n, w = 0.0, 0, np.exp(-mean)
    while True:
        total += w
        if total > 1 - tol:
            return n + m
        n += 1
        w *= mean / n


def jcm_operators(p: JcmParams) -> dict:
    """Ladder and spin operators on the product space (atom-major)."""
    N = p.n_max + 1
    a = np.diag(np.sqrt(np.arange(1, N)), 1).astype(complex)
    eye_f = np.eye(N)
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    sz = np.diag([0.5, -0.5]).astype(complex)
    am = np.linalg.matrix_power(a, p.m)
    return {
        "a": np.kron(np.eye(2), a),
        "S_z": np.kron(sz, eye_f),
        "S_plus": np.kron(sp, eye_f),
        "S_minus": np.kron(sp.T, eye_f),
        "a_m": np.kron(np.eye(2), am),
        "number": np.kron(np.eye(2), a.conj().T @ a),
        "ground": np.kron(np.diag([0.0, 1.0]), eye_f).astype(complex),
    }


def interaction_hamiltonian(p: JcmParams) -> np.ndarray:
    """``S_- a^dagger^m + S_+ a^m`` (unit coupling)."""
    ops = jcm_operators(p)
    coupling = ops["S_plus"] @ ops["a_m"]
    return coupling + coupling.conj().T


def build_hamiltonian(p: JcmParams) -> np.ndarray:
    ops = jcm_operators(p)
    return (p.omega * ops["number"] + p.omega0 * ops["S_z"]
            + p.lam * interaction_hamiltonian(p))


def excitation_number(p: JcmParams) -> np.ndarray:
    ops = jcm_operators(p)
    return ops["number"] + p.m * ops["S_z"]


def excited_field_state(p: JcmParams, field_amplitudes) -> np.ndarray:
    """``|+> (x) sum_n c_n |n>``, normalized."""
    c = np.zeros(p.n_max + 1, dtype=complex)
    amps = np.asarray(field_amplitudes, dtype=complex)
    c[: len(amps)] = amps
    psi = np.concatenate([c, np.zeros(p.n_max + 1)])
    return psi / np.linalg.norm(psi)


def inversion(rho, p: JcmParams):
    """``2 Tr[rho S_z]`` for a state or a stack of states."""
    ops = jcm_operators(p)
    return 2 * np.einsum("ij,...ji->...", ops["S_z"], rho).real


def photon_numbers(rho, p: JcmParams):
    """Diagonal of the atom-traced state, shape ``(..., n_max + 1)``."""
    N = p.n_max + 1
    diag = np.einsum("...ii->...i", rho).real
    return diag[..., :N] + diag[..., N:]


def _weights(alpha, p: JcmParams):
    return np.abs(coherent_weights(alpha, p.n_max)) ** 2


def inversion_unitary(p: JcmParams, alpha: complex, t):
    return inversion_damped(p, alpha, 0.0, t)


def inversion_damped(p: JcmParams, alpha: complex, gamma: float, t):
    """Phase-damped inversion series; ``gamma = 0`` gives the unitary one."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    t = np.asarray(t, dtype=float)
    w = _weights(alpha, p)
    f = rabi_factor(np.arange(p.n_max + 1), p.m)
    arg = 2 * p.lam * np.multiply.outer(t, f)
    damp = np.exp(-2 * gamma * p.lam**2 * np.multiply.outer(t, f**2))
    return np.sum(w * damp * np.cos(arg), axis=-1)


def inversion_envelope(p: JcmParams, alpha: complex, gamma: float, t):
    t = np.asarray(t, dtype=float)
    f = rabi_factor(np.arange(p.n_max + 1), p.m)
    return np.sum(_weights(alpha, p) * np.exp(-2 * gamma * p.lam**2 * np.multiply.outer(t, f**2)), axis=-1)


def _check_n(p, n):
    if not 0 <= n <= p.n_max:
        raise ValueError(f"photon number {n} outside [0, {p.n_max}]")


def photon_distribution_damped(p: JcmParams, alpha: complex, gamma: float, n: int, t):
    """``P_n`` under phase damping.

    The ``|Q_n|^2`` term rotates at the doublet-``n`` frequency and the
    ``|Q_{n-m}|^2`` term at the doublet-``(n-m)`` frequency, each as
    ``(1 +- e^{-decay} cos(2 lam t sqrt f)) / 2``.
    """
    _check_n(p, n)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    t = np.asarray(t, dtype=float)
    w = _weights(alpha, p)

    def osc(k):
        f = rabi_factor(k, p.m)
        return np.exp(-2 * gamma * p.lam**2 * f**2 * t) * np.cos(2 * p.lam * f * t)

    out = 0.5 * w[n] * (1 + osc(n))
    if n >= p.m:
        out = out + 0.5 * w[n - p.m] * (1 - osc(n - p.m))
    return out


def photon_distribution_unitary(p: JcmParams, alpha: complex, n: int, t):
    return photon_distribution_damped(p, alpha, 0.0, n, t)


def photon_distribution_damped_factored(p: JcmParams, alpha: complex, gamma: float, n: int, t):
    """Variant with the cosine applied outside ``{1 +- e^{-decay}}``.

    Both terms use the doublet-``n`` frequency. This form does not solve the
    phase-damped master equation; it exists so that the discrepancy can be
    measured.
    """
    _check_n(p, n)
    t = np.asarray(t, dtype=float)
    w = _weights(alpha, p)
    f = rabi_factor(n, p.m)
    e = np.exp(-2 * gamma * p.lam**2 * f**2 * t)
    c = np.cos(2 * p.lam * f * t)
    out = 0.5 * w[n] * (1 + e) * c
    if n >= p.m:
        out = out + 0.5 * w[n - p.m] * (1 - e) * c
    return out


def damped_model(p: JcmParams, gamma: float) -> RandomUnitaryModel:
    """``H`` with the single channel ``V = H``, kernel ``sqrt(gamma)`` (time promotion)."""
    H = build_hamiltonian(p)
    return RandomUnitaryModel(H, [(H, NoiseKernel.constant(np.sqrt(gamma)))])


def p_eg_stochastic_jcm(weights, lam: float, gamma: float, t):
    """Ground-state probability of the one-photon stochastic-coupling model.

    ``weights[n]`` is the initial probability of ``|+, n>``; the ``n``-th
    term decays as ``exp(-2 (n + 1) gamma lam t)``.
    """
    P = np.asarray(weights, dtype=float)
    if np.any(P < 0) or P.sum() > 1 + 1e-10:
        raise ValueError("weights must be non-negative with sum <= 1")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    t = np.asarray(t, dtype=float)
    n1 = np.arange(1, len(P) + 1)
    terms = P * np.exp(-2 * gamma * lam * np.multiply.outer(t, n1)) \
        * np.cos(2 * lam * np.multiply.outer(t, np.sqrt(n1)))
    return 0.5 * (1 - np.sum(terms, axis=-1))


def coupling_promotion_kernel(gamma: float, lam: float) -> NoiseKernel:
    """Noise amplitude ``sqrt(gamma lam)`` on the accumulated coupling ``lam t``."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return NoiseKernel.constant(np.sqrt(gamma * lam))


def stochastic_coupling_model(p: JcmParams, gamma: float) -> RandomUnitaryModel:
    """Interaction-picture model ``lam H_int`` with the coupling noise on ``H_int``."""
    if p.m != 1:
        raise ValueError("the stochastic-coupling model is the one-photon case")
    Hi = interaction_hamiltonian(p)
    return RandomUnitaryModel(p.lam * Hi, [(Hi, coupling_promotion_kernel(gamma, p.lam))])


def stochastic_jcm_ensemble(p: JcmParams, weights, gamma: float, config: EnsembleConfig):
    """Monte Carlo ``P_eg`` for an excited atom with diagonal field weights."""
    model = stochastic_coupling_model(p, gamma)
    w = np.zeros(p.n_max + 1)
    w[: len(weights)] = weights
    rho0 = np.zeros((p.dim, p.dim), dtype=complex)
    rho0[: p.n_max + 1, : p.n_max + 1] = np.diag(w / w.sum())
    ops = jcm_operators(p)
    return ensemble_average(model, rho0, config, {"p_eg": ops["ground"]})


def poisson_weights(nbar: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    return np.exp(-nbar + n * np.log(nbar) - np.array([lgamma(k + 1) for k in n])) if nbar > 0 \
        else (n == 0).astype(float)

