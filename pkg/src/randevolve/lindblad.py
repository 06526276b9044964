"""Master equations with self-adjoint Lindblad operators.

The generator is

    d rho/dt = -i[H, rho] - sum_i (v_i(t)**2 / 2) [V_i, [V_i, rho]]

with one noise kernel ``v_i`` per channel. Time-dependent kernels give the
time-local non-Markovian case; they reuse the same fixed-step RK4 loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core import (
    DEFAULT_TOL,
    DimensionError,
    HermitianOperator,
    InvariantError,
    Tolerances,
    as_matrix,
    check_density,
    superoperator_matrix,
    unvec,
    vec,
)
from .stochastic import NoiseKernel, TimeGrid


def _channels(channels):
    out = []
    for V, kernel in channels:
        if not isinstance(kernel, NoiseKernel):
            kernel = NoiseKernel.constant(np.sqrt(float(kernel)))
        out.append((HermitianOperator(V).matrix, kernel))
    return out


class LindbladModel:
    """Hamiltonian plus ``(V_i, kernel_i)`` dephasing channels.

    A bare number in place of a kernel is read as a constant rate
    ``gamma`` (amplitude ``sqrt(gamma)``).
    """

    def __init__(self, H, channels=()):
        self.H = HermitianOperator(H).matrix
        self.channels = _channels(channels)
        for V, _ in self.channels:
            if V.shape != self.H.shape:
                raise DimensionError(f"channel operator shape {V.shape} != H shape {self.H.shape}")

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def is_markovian(self) -> bool:
        return all(k.is_constant for _, k in self.channels)


@dataclass
class EvolutionRecord:
    grid: TimeGrid
    states: np.ndarray
    observables: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


def generator_apply(model: LindbladModel, rho, t: float) -> np.ndarray:
    rho = as_matrix(rho)
    if rho.shape != model.H.shape:
        raise DimensionError(f"state shape {rho.shape} != model shape {model.H.shape}")
    H = model.H
    out = -1j * (H @ rho - rho @ H)
    for V, kernel in model.channels:
        rate = float(kernel.rate(t))
        if rate == 0:
            continue
        inner = V @ rho - rho @ V
        out -= 0.5 * rate * (V @ inner - inner @ V)
    return out


def rk4_integrate(rhs, rho0: np.ndarray, grid: TimeGrid, substeps: int = 1,
                  observables=None, validate: bool = True, tol: Tolerances = DEFAULT_TOL):
    """Classical RK4 with fixed step ``grid.dt / substeps``.

    ``rhs(rho, t)`` returns the time derivative. States are stored at the
    grid points and, if ``validate``, checked against the density-matrix
    invariants; a violation raises :class:`InvariantError` with the grid
    index.
    """
    h = grid.dt / substeps
    rho = np.array(rho0, dtype=complex)
    states = np.empty((grid.n_steps + 1,) + rho.shape, dtype=complex)
    states[0] = rho
    t = 0.0
    for k in range(1, grid.n_steps + 1):
        for s in range(substeps):
            t = ((k - 1) * substeps + s) * h
            k1 = rhs(rho, t)
            k2 = rhs(rho + 0.5 * h * k1, t + 0.5 * h)
            k3 = rhs(rho + 0.5 * h * k2, t + 0.5 * h)
            k4 = rhs(rho + h * k3, t + h)
            rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if validate:
            try:
                check_density(rho, tol)
            except InvariantError as exc:
                raise InvariantError(f"integration left the state space: {exc}", step=k) from None
        states[k] = rho
    obs = {}
    for name, A in (observables or {}).items():
        A = np.asarray(A)
        obs[name] = np.einsum("ij,tji->t", A, states).real
    return EvolutionRecord(grid, states, obs)


def integrate(model: LindbladModel, rho0, grid: TimeGrid, observables=None,
              substeps: int = 1, tol: Tolerances = DEFAULT_TOL) -> EvolutionRecord:
    """Fixed-step RK4 solution of the master equation on ``grid``."""
    rho0 = as_matrix(rho0)
    check_density(rho0, tol)
    return rk4_integrate(lambda r, t: generator_apply(model, r, t), rho0, grid,
                         substeps=substeps, observables=observables, tol=tol)


def markov_propagator(model: LindbladModel, t: float) -> np.ndarray:
    """``exp(t L)`` on column-stacked vectors (Markovian models only)."""
    return expm(t * superoperator_matrix(model))


def analytic_markov_evolve(model: LindbladModel, rho0, t: float) -> np.ndarray:
    """Exact Markovian solution via the superoperator exponential."""
    rho0 = as_matrix(rho0)
    if not model.is_markovian:
        raise ValueError("analytic evolution requires time-constant kernels")
    return unvec(markov_propagator(model, t) @ vec(rho0), model.dim)


def analytic_markov_series(model: LindbladModel, rho0, times) -> np.ndarray:
    """Exact solution at each of ``times`` (uniform spacing reuses one propagator)."""
    rho0 = as_matrix(rho0)
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times),) + rho0.shape, dtype=complex)
    steps = np.diff(times)
    if len(times) > 1 and np.allclose(steps, steps[0], rtol=1e-12, atol=0) and times[0] == 0:
        P = markov_propagator(model, steps[0])
        v = vec(rho0)
        out[0] = rho0
        for k in range(1, len(times)):
            v = P @ v
            out[k] = unvec(v, model.dim)
        return out
    for k, t in enumerate(times):
        out[k] = analytic_markov_evolve(model, rho0, t)
    return out
