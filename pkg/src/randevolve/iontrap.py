"""First-blue-sideband ion-trap model with level-dependent phase noise.

The sideband Hamiltonian ``eta Omega (S_+ a^dagger + S_- a)`` splits into
dressed doublets ``|e_n^+-> = (|-, n-1> +- |+, n>)/sqrt(2)`` with energies
``+-eta Omega sqrt(n)``, plus ``|e_0^+> = |+, 0>`` at zero energy. On a
truncated Fock space the state ``|-, n_max>`` is left uncoupled; it gets the
label ``(n_max + 1, -1)``.

Each dressed label ``a`` receives a random phase ``c_a B_a(t)`` with
standard Brownian motions correlated as ``dB_a dB_b = g_ab dt``. The average
multiplies the dressed-basis coherence ``(a, b)`` by ``exp(-Lambda_ab / 2)``
with ``Lambda_ab = lam_k(t) (c_a^2 + c_b^2 - 2 c_a c_b g_ab)`` and
``lam_k`` the accumulated weight of the common time kernel (``t`` for
white noise).

Basis ordering matches :mod:`randevolve.jcm`: atom-major, ``|+>`` first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma

import numpy as np

from .core import DEFAULT_TOL, InvariantError, as_matrix, check_density
from .ensemble import EnsembleConfig, EnsembleResult, phase_ensemble
from .stochastic import CorrelationSpec, NoiseKernel

TRUNCATION_TOL = 1e-10


@dataclass(frozen=True)
class TrapParams:
    eta: float
    Omega: float
    n_max: int
    omega_z: float = 0.0
    delta: float | None = None

    def __post_init__(self):
        if not self.eta > 0 or not self.Omega > 0:
            raise ValueError("eta and Omega must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.delta is not None and not np.isclose(self.delta, self.omega_z):
            raise ValueError("first blue sideband requires delta = omega_z")

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    @property
    def sideband_rabi(self) -> float:
        return self.eta * self.Omega


def _index(p: TrapParams, atom: int, n: int) -> int:
    return atom * (p.n_max + 1) + n


PLUS, MINUS = 0, 1


def blue_sideband_hamiltonian(p: TrapParams) -> np.ndarray:
    H = np.zeros((p.dim, p.dim), dtype=complex)
    for n in range(p.n_max):
        i, j = _index(p, PLUS, n + 1), _index(p, MINUS, n)
        H[i, j] = H[j, i] = p.sideband_rabi * np.sqrt(n + 1)
    return H


def ground_projector(p: TrapParams) -> np.ndarray:
    P = np.zeros((p.dim, p.dim), dtype=complex)
    for n in range(p.n_max + 1):
        k = _index(p, MINUS, n)
        P[k, k] = 1
    return P


@dataclass
class DressedBasis:
    labels: list
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)

    def projector(self, label) -> np.ndarray:
        v = self.vectors[:, self.labels.index(tuple(label))]
        return np.outer(v, v.conj())


def dressed_basis(p: TrapParams) -> DressedBasis:
    """Labelled eigenbasis of the sideband Hamiltonian, labels ``(n, +-1)``."""
    d = p.dim
    labels, energies, cols = [], [], []

    def unit(k):
        v = np.zeros(d, dtype=complex)
        v[k] = 1
        return v

    labels.append((0, 1))
    energies.append(0.0)
    cols.append(unit(_index(p, PLUS, 0)))
    for n in range(1, p.n_max + 1):
        lo, hi = unit(_index(p, MINUS, n - 1)), unit(_index(p, PLUS, n))
        for s in (1, -1):
            labels.append((n, s))
            energies.append(s * p.sideband_rabi * np.sqrt(n))
            cols.append((lo + s * hi) / np.sqrt(2))
    labels.append((p.n_max + 1, -1))
    energies.append(0.0)
    cols.append(unit(_index(p, MINUS, p.n_max)))
    return DressedBasis(labels, np.array(energies), np.array(cols).T)


def thermal_weights(nbar: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    return nbar**n / (1 + nbar) ** (n + 1)


@dataclass(frozen=True)
class ComInitialState:
    """Ion in ``|->`` with the motional mode in a Fock, thermal or coherent state."""

    kind: str
    value: complex

    def __post_init__(self):
        if self.kind not in ("fock", "thermal", "coherent"):
            raise ValueError(f"unknown initial state kind {self.kind!r}")

    @classmethod
    def fock(cls, n: int):
        return cls("fock", int(n))

    @classmethod
    def thermal(cls, nbar: float):
        return cls("thermal", float(nbar))

    @classmethod
    def coherent(cls, alpha: complex):
        return cls("coherent", complex(alpha))

    def _amplitudes(self, n_max):
        n = np.arange(n_max + 1)
        a = self.value
        mag = -abs(a) ** 2 / 2 + n * np.log(abs(a) if a != 0 else 1.0) \
            - 0.5 * np.array([lgamma(k + 1) for k in n])
        Q = np.exp(mag) * np.exp(1j * n * np.angle(a))
        return Q if a != 0 else (n == 0).astype(complex)

    def weights(self, n_max: int) -> np.ndarray:
        """Motional populations ``P_n`` for ``n <= n_max``, checked for truncation."""
        if self.kind == "fock":
            if not 0 <= self.value <= n_max:
                raise ValueError(f"Fock level {self.value} outside [0, {n_max}]")
            w = np.zeros(n_max + 1)
            w[self.value] = 1
        elif self.kind == "thermal":
            w = thermal_weights(self.value, n_max)
        else:
            w = np.abs(self._amplitudes(n_max)) ** 2
        if 1 - w.sum() > TRUNCATION_TOL:
            raise InvariantError(f"n_max={n_max} misses {1 - w.sum():.3e} of the motional weight")
        return w

    def default_n_max(self) -> int:
        """Smallest truncation holding the state, plus one level for the sideband partner."""
        if self.kind == "fock":
            return int(self.value) + 1
        n = 1
        while True:
            try:
                self.weights(n)
                return n + 1
            except InvariantError:
                n += 1

    def density_matrix(self, p: TrapParams) -> np.ndarray:
        N = p.n_max + 1
        rho = np.zeros((p.dim, p.dim), dtype=complex)
        if self.kind == "coherent":
            Q = self._amplitudes(p.n_max)
            block = np.outer(Q, Q.conj())
        else:
            block = np.diag(self.weights(p.n_max)).astype(complex)
        block /= np.trace(block).real
        rho[N:, N:] = block
        return rho


class LevelNoiseSpec:
    """Phase-noise loadings and correlations over dressed labels.

    The default loading is ``c_(n, +-1) = +-sqrt(Gamma) n**d / 2`` with
    ``g`` equal to one inside each doublet and zero across doublets, so the
    doublet splitting fluctuates as ``sqrt(Gamma) n**d`` white noise.
    ``correlation`` may be a :class:`CorrelationSpec` or a callable
    ``labels -> CorrelationSpec``; ``amplitudes`` may override the
    loadings as long as every doublet keeps the splitting noise
    ``c_(n,+) - c_(n,-) = sqrt(Gamma) n**d``.
    """

    def __init__(self, Gamma: float, d: float, correlation=None, amplitudes=None,
                 time_kernel: NoiseKernel | None = None):
        if Gamma < 0:
            raise ValueError("Gamma must be non-negative")
        self.Gamma = float(Gamma)
        self.d = float(d)
        self.correlation = correlation
        self.amplitudes = amplitudes
        self.time_kernel = time_kernel or NoiseKernel.constant(1.0)

    @classmethod
    def from_decay_law(cls, gamma0: float, exponent: float, **kw) -> "LevelNoiseSpec":
        """Noise giving Fock-state decay rate ``gamma0 (n + 1)**exponent``."""
        return cls(2 * gamma0, exponent / 2, **kw)

    def splitting_noise(self, n: int) -> float:
        return np.sqrt(self.Gamma) * float(n) ** self.d if n > 0 or self.d == 0 else 0.0

    def loadings(self, labels) -> np.ndarray:
        if self.amplitudes is not None:
            c = np.asarray(self.amplitudes, dtype=float)
            if c.shape != (len(labels),):
                raise ValueError("one amplitude per dressed label is required")
            pos = {lab: i for i, lab in enumerate(labels)}
            for (n, s), i in pos.items():
                if s == 1 and (n, -1) in pos:
                    diff = c[i] - c[pos[(n, -1)]]
                    if not np.isclose(diff, self.splitting_noise(n), rtol=1e-12, atol=1e-12):
                        raise ValueError(f"doublet {n} loading difference {diff} != sqrt(Gamma) n^d")
            return c
        return np.array([0.5 * s * self.splitting_noise(n) for n, s in labels])

    def correlation_for(self, labels) -> CorrelationSpec:
        if self.correlation is None:
            n = np.array([lab[0] for lab in labels])
            return CorrelationSpec((n[:, None] == n[None, :]).astype(float))
        spec = self.correlation(labels) if callable(self.correlation) else self.correlation
        if spec.size != len(labels):
            raise ValueError(f"correlation has size {spec.size}, expected {len(labels)}")
        return spec


def decay_matrix(noise: LevelNoiseSpec, labels, t: float) -> np.ndarray:
    """``Lambda_ab(t)`` over dressed labels."""
    c = noise.loadings(labels)
    g = noise.correlation_for(labels).g
    rate = c[:, None] ** 2 + c[None, :] ** 2 - 2 * np.outer(c, c) * g
    return np.clip(rate, 0, None) * float(noise.time_kernel.lam(t))


def _damping_multiplier(p, noise, basis, t, tol=DEFAULT_TOL):
    E = basis.energies
    M = np.exp(-1j * np.subtract.outer(E, E) * t - decay_matrix(noise, basis.labels, t) / 2)
    lo = np.linalg.eigvalsh(np.exp(-decay_matrix(noise, basis.labels, t) / 2))[0]
    if lo < -1e-10:
        raise InvariantError(f"damping matrix is not positive semidefinite (min eigenvalue {lo:.3e})")
    return M


def promoted_density_matrix(p: TrapParams, rho0, noise: LevelNoiseSpec, t: float,
                            tol=DEFAULT_TOL) -> np.ndarray:
    """Averaged state ``sum e^{-i(e_a - e_b)t - Lambda_ab/2} P_a rho0 P_b``."""
    rho0 = as_matrix(rho0)
    check_density(rho0, tol)
    basis = dressed_basis(p)
    W = basis.vectors
    rho_d = W.conj().T @ rho0 @ W
    rho_d *= _damping_multiplier(p, noise, basis, t, tol)
    return W @ rho_d @ W.conj().T


def p_minus_fock(p: TrapParams, n: int, noise: LevelNoiseSpec, t):
    """Ground-state probability from ``|-, n>``; decays at ``Gamma (n+1)**(2d) / 2`` for white noise."""
    if not 0 <= n <= p.n_max - 1:
        raise ValueError(f"Fock level {n} outside [0, {p.n_max - 1}]")
    t = np.asarray(t, dtype=float)
    lam = noise.time_kernel.lam(t)
    s = noise.splitting_noise(n + 1)
    return 0.5 * (1 + np.exp(-0.5 * s**2 * lam) * np.cos(2 * p.sideband_rabi * np.sqrt(n + 1) * t))


def p_minus_distribution(p: TrapParams, init: ComInitialState, noise: LevelNoiseSpec, t):
    """Weighted sum of :func:`p_minus_fock` over ``n <= n_max - 1``."""
    w = init.weights(p.n_max)
    if w[-1] > TRUNCATION_TOL:
        raise InvariantError("weight on the top Fock level has no sideband partner; raise n_max")
    t = np.asarray(t, dtype=float)
    lam = noise.time_kernel.lam(t)
    n1 = np.arange(1, p.n_max + 1)
    s2 = np.array([noise.splitting_noise(k) ** 2 for k in n1])
    terms = w[:-1] * np.exp(-0.5 * np.multiply.outer(lam, s2)) \
        * np.cos(2 * p.sideband_rabi * np.multiply.outer(t, np.sqrt(n1)))
    # the uncoupled top level stays in |->
    return 0.5 * (1 + np.sum(terms, axis=-1) + w[-1])


def fock_decay_rates(noise: LevelNoiseSpec, n_values) -> np.ndarray:
    """White-noise envelope rate of each Fock term: ``Gamma (n+1)**(2d) / 2``."""
    return np.array([0.5 * noise.splitting_noise(n + 1) ** 2 for n in n_values])


def lindblad_channels(p: TrapParams, noise: LevelNoiseSpec) -> list:
    """Hermitian ``V_r = sum_a c_a L_ar P_a`` reproducing the averaged dynamics.

    ``L`` is the correlation factor (``L L^T = g``); the double commutators
    of these operators decay coherence ``(a, b)`` at rate
    ``(c_a^2 + c_b^2 - 2 c_a c_b g_ab) / 2`` times the kernel rate, which
    is the same as the averaged random phases. Uncorrelated labels give one
    channel ``c_a P_a`` per label.
    """
    basis = dressed_basis(p)
    c = noise.loadings(basis.labels)
    L = noise.correlation_for(basis.labels).factor
    W = basis.vectors
    out = []
    for r in range(L.shape[1]):
        coeff = c * L[:, r]
        if np.all(coeff == 0):
            continue
        out.append((W * coeff) @ W.conj().T)
    return out


def mc_promoted_evolution(p: TrapParams, rho0, noise: LevelNoiseSpec, config: EnsembleConfig,
                          observables=None) -> EnsembleResult:
    """Sampled dressed-label phases averaged over ``config.n_traj`` trajectories.

    Correlated Brownian motions are built as ``L @ W`` from ``rank(g)``
    independent streams per trajectory. ``p_minus`` is always reported.
    """
    basis = dressed_basis(p)
    c = noise.loadings(basis.labels)
    L = noise.correlation_for(basis.labels).factor
    obs = {"p_minus": ground_projector(p)}
    obs.update(observables or {})
    A = c[:, None] * L
    kernels = [noise.time_kernel] * L.shape[1]
    return phase_ensemble(basis.vectors, basis.energies, A, kernels, rho0, config, obs)


def fit_decay_exponent(decay_rates):
    """Least-squares fit of ``log rate = log scale + exponent log(n + 1)``.

    Returns ``(exponent, scale, max_relative_residual)``.
    """
    pts = [(float(n), float(r)) for n, r in decay_rates]
    if len(pts) < 3:
        raise ValueError("at least three (n, rate) points are required")
    n = np.array([q[0] for q in pts])
    r = np.array([q[1] for q in pts])
    if np.any(r <= 0):
        raise ValueError("decay rates must be positive")
    x = np.log(n + 1)
    slope, intercept = np.polyfit(x, np.log(r), 1)
    scale = float(np.exp(intercept))
    resid = float(np.max(np.abs(scale * (n + 1) ** slope / r - 1)))
    return float(slope), scale, resid


def envelope_peak_times(p: TrapParams, n: int, t_end: float) -> np.ndarray:
    """Times ``k pi / (2 eta Omega sqrt(n+1))`` in ``(0, t_end]`` where ``|cos| = 1``."""
    w = 2 * p.sideband_rabi * np.sqrt(n + 1)
    k = np.arange(1, int(np.floor(t_end * w / np.pi)) + 1)
    return k * np.pi / w


def envelope_decay_rate(times, p_minus, p: TrapParams, n: int, stderr=None):
    """Decay rate from a ``P_-`` series sampled at its cosine extrema.

    ``2 P_- - 1`` divided by ``cos(2 eta Omega sqrt(n+1) t)`` estimates the
    envelope; a weighted log-linear fit through the origin-anchored model
    ``log env = -rate t`` gives the rate. Points whose envelope is not
    resolved above twice its standard error are dropped.
    """
    t = np.asarray(times, dtype=float)
    cosv = np.cos(2 * p.sideband_rabi * np.sqrt(n + 1) * t)
    env = (2 * np.asarray(p_minus) - 1) / cosv
    if stderr is None:
        se = np.zeros_like(env)
    else:
        se = 2 * np.asarray(stderr) / np.abs(cosv)
    keep = (env > 2 * se) & (env > 0)
    if keep.sum() < 2:
        raise ValueError("too few resolved envelope points for a decay fit")
    y = np.log(env[keep])
    tw = t[keep]
    sig = np.where(se[keep] > 0, se[keep] / env[keep], 1.0)
    wgt = 1 / sig**2
    return float(-np.sum(wgt * tw * y) / np.sum(wgt * tw * tw))
