"""Intrinsic decoherence from randomly promoted spectral phases.

Writing ``U(t) = sum_j exp(-i E_j t) P_j`` over the distinct eigenvalues of
``H``, each phase ``E_j t`` is replaced by

    chi_j(t) = E_j t + s_j int_0^t sigma(u) dB_j(u)

with standard Brownian motions correlated as ``dB_j dB_k = K_jk dt``. The
average decays the eigenbasis coherence ``(j, k)`` at the instantaneous rate

    sigma(t)**2 (s_j**2 + s_k**2 - 2 s_j s_k K_jk) / 2.

With ``s_j = E_j`` and ``K_jk = exp(-tau**2 (E_j - E_k)**2)`` this is the
Milburn-type generator; ``tau = 0`` gives the double-commutator master
equation with ``V = H``. With ``s_j = 1`` and ``K = 1`` the phase is global
and the evolution stays unitary.
"""

from __future__ import annotations

import numpy as np

from .core import (
    DEFAULT_TOL,
    SpectralDecomposition,
    Tolerances,
    as_matrix,
    check_density,
    eigendecompose,
)
from .ensemble import EnsembleConfig, EnsembleResult, phase_ensemble
from .lindblad import EvolutionRecord, rk4_integrate
from .stochastic import CorrelationSpec, NoiseKernel, TimeGrid, lambda_of_t


def gaussian_kernel(energies, tau: float) -> np.ndarray:
    """``exp(-tau**2 (E_j - E_k)**2)`` over the given eigenvalues."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    e = np.asarray(energies, dtype=float)
    return np.exp(-(tau**2) * np.subtract.outer(e, e) ** 2)


def _eigenframe(H):
    H = as_matrix(H)
    w, W = np.linalg.eigh(0.5 * (H + H.conj().T))
    return w, W


def milburn_generator_apply(H, gamma: float, tau: float, rho) -> np.ndarray:
    """``-i[H, rho] - (gamma/2)(H^2 rho + rho H^2 - 2 H K_tau[rho] H)``.

    ``K_tau`` multiplies the eigenbasis element ``(j, k)`` by
    ``exp(-tau**2 (E_j - E_k)**2)``.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    E, W = _eigenframe(H)
    r = W.conj().T @ as_matrix(rho) @ W
    dE = np.subtract.outer(E, E)
    rate = 0.5 * gamma * (E[:, None] ** 2 + E[None, :] ** 2
                          - 2 * np.outer(E, E) * gaussian_kernel(E, tau))
    return W @ ((-1j * dE - rate) * r) @ W.conj().T


def nonmarkov_dephasing_rate(sigma: NoiseKernel, t: float) -> float:
    """Accumulated weight ``int_0^t sigma(s)**2 ds`` of the time-local equation

        d rho/dt = -i[H, rho] - (sigma(t)**2 / 2)[H, [H, rho]].

    The coherence ``(j, k)`` at time ``t`` carries the factor
    ``exp(-lam(t) (E_j - E_k)**2 / 2)`` with ``lam`` the returned value.
    """
    return lambda_of_t(sigma, t)


class SpectralPromotionSpec:
    """Random promotion of the spectral phases of ``H``.

    Parameters
    ----------
    H : (d, d) array or SpectralDecomposition
        Hamiltonian or its decomposition. Degenerate eigenvalues share one
        Brownian motion.
    sigma : NoiseKernel or float
        Common time kernel; a number ``gamma`` means ``sqrt(gamma)``.
    scale : {"proportional", "constant"} or array
        Per-level loading ``s_j``: ``E_j``, ``1`` or explicit values.
    correlation : {"independent", "full"}, ("gaussian", tau), CorrelationSpec or array
        Correlation ``K`` of the level Brownian motions.
    """

    def __init__(self, H, sigma, scale="proportional", correlation="independent",
                 tol: Tolerances = DEFAULT_TOL):
        self.base = H if isinstance(H, SpectralDecomposition) else eigendecompose(H, tol)
        self.sigma = sigma if isinstance(sigma, NoiseKernel) else NoiseKernel.constant(np.sqrt(float(sigma)))
        E = self.base.eigenvalues
        n = len(E)
        if isinstance(scale, str):
            if scale == "proportional":
                s = E.copy()
            elif scale == "constant":
                s = np.ones(n)
            else:
                raise ValueError(f"unknown scale {scale!r}")
        else:
            s = np.asarray(scale, dtype=float)
            if s.shape != (n,):
                raise ValueError(f"scale needs one entry per distinct eigenvalue ({n})")
        self.scale = s
        self.correlation = self._correlation(correlation, E)

    @staticmethod
    def _correlation(spec, E) -> CorrelationSpec:
        n = len(E)
        if isinstance(spec, CorrelationSpec):
            corr = spec
        elif isinstance(spec, str):
            if spec == "independent":
                corr = CorrelationSpec.identity(n)
            elif spec == "full":
                corr = CorrelationSpec(np.ones((n, n)))
            else:
                raise ValueError(f"unknown correlation {spec!r}")
        elif isinstance(spec, tuple) and spec and spec[0] == "gaussian":
            corr = CorrelationSpec(gaussian_kernel(E, spec[1]))
        else:
            corr = CorrelationSpec(spec)
        if corr.size != n:
            raise ValueError(f"correlation has size {corr.size}, expected {n}")
        return corr

    @property
    def dim(self) -> int:
        return self.base.dim

    def pair_shape(self) -> np.ndarray:
        """``(s_j^2 + s_k^2 - 2 s_j s_k K_jk) / 2``, the rate per unit noise power."""
        s = self.scale
        K = self.correlation.g
        return np.clip(0.5 * (s[:, None] ** 2 + s[None, :] ** 2 - 2 * np.outer(s, s) * K), 0, None)

    def decay_rates(self, t: float = 0.0) -> np.ndarray:
        """Instantaneous level-pair dephasing rates at time ``t``."""
        return self.pair_shape() * float(self.sigma.rate(t))

    def _vector_data(self):
        lv = self.base.level_of_vector()
        return self.base.basis, self.base.eigenvalues[lv], lv


def promoted_generator_apply(spec: SpectralPromotionSpec, rho, t: float) -> np.ndarray:
    """Generator of the averaged promoted evolution at time ``t``."""
    W, e, lv = spec._vector_data()
    r = W.conj().T @ as_matrix(rho) @ W
    rate = spec.decay_rates(t)[np.ix_(lv, lv)]
    return W @ ((-1j * np.subtract.outer(e, e) - rate) * r) @ W.conj().T


def promoted_evolve_exact(spec: SpectralPromotionSpec, rho0, t: float) -> np.ndarray:
    """Closed-form averaged state at ``t``."""
    W, e, lv = spec._vector_data()
    r = W.conj().T @ as_matrix(rho0) @ W
    unit = spec.pair_shape()
    lam = float(spec.sigma.lam(t))
    M = np.exp(-1j * np.subtract.outer(e, e) * t - unit[np.ix_(lv, lv)] * lam)
    return W @ (M * r) @ W.conj().T


def integrate_promoted(spec: SpectralPromotionSpec, rho0, grid: TimeGrid, observables=None,
                       substeps: int = 1, tol: Tolerances = DEFAULT_TOL) -> EvolutionRecord:
    """RK4 integration of :func:`promoted_generator_apply`."""
    rho0 = as_matrix(rho0)
    check_density(rho0, tol)
    return rk4_integrate(lambda r, t: promoted_generator_apply(spec, r, t), rho0, grid,
                         substeps=substeps, observables=observables, tol=tol)


def spectral_promoted_evolve(spec: SpectralPromotionSpec, rho0, config: EnsembleConfig,
                             observables=None) -> EnsembleResult:
    """Monte Carlo average of ``sum_j exp(-i chi_j(t)) P_j`` acting on ``rho0``.

    Level Brownian motions are ``L @ W`` with ``L L^T = K`` and ``W`` made of
    ``rank(K)`` independent streams per trajectory.
    """
    W, e, lv = spec._vector_data()
    L = spec.correlation.factor
    A = (spec.scale[:, None] * L)[lv]
    return phase_ensemble(W, e, A, [spec.sigma] * L.shape[1], rho0, config, observables)
