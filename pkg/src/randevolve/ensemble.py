"""Monte Carlo averages of random unitary evolutions.

Two samplers realize ``rho(t) = E[U(t) rho0 U(t)^dagger]``:

* commuting models (``[H, V_i] = [V_i, V_j] = 0``) share an eigenbasis, so
  each trajectory is a diagonal phase ``exp(-i t H - i sum_i X_i(t) V_i)``
  with ``X_i`` the Ito integral of the channel kernel;
* general models use a Lie-Trotter step ``exp(-iH dt) exp(-i sum_i v_i dB_i V_i)``.

Trajectories are processed in fixed blocks of consecutive indices. Each
block reduces to (count, mean, M2) moments and blocks are merged pairwise in
index order, so results do not depend on how many worker threads run the
blocks.

The module also hosts the pure-state comparison between random unitary
evolution and a norm-preserving collapse equation, both measured through the
conditional variance of an observable.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
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
    expm_hermitian_generator,
)
from .lindblad import LindbladModel
from .stochastic import (
    BrownianIncrementStream,
    TimeGrid,
    increment_block,
    ito_sum,
    sample_increments,
)

# Elements per vectorized chunk (batch x times x dim x dim).
_CHUNK_ELEMENTS = 2_000_000


class RandomUnitaryModel(LindbladModel):
    """Lindblad model read as a random unitary ensemble.

    ``commuting`` is recomputed from the operators: true iff every channel
    commutes with ``H`` and with every other channel to ``tol.commuting``.
    """

    def __init__(self, H, channels=(), tol: Tolerances = DEFAULT_TOL):
        super().__init__(H, channels)
        ops = [self.H] + [V for V, _ in self.channels]
        self.commuting = all(
            np.max(np.abs(a @ b - b @ a)) < tol.commuting
            for i, a in enumerate(ops) for b in ops[i + 1:]
        )

    @classmethod
    def from_lindblad(cls, model: LindbladModel) -> "RandomUnitaryModel":
        return cls(model.H, model.channels)


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int
    master_seed: int
    grid: TimeGrid
    save_every: int = 1
    n_workers: int = 1
    block_size: int = 256
    store_states: bool = True

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.save_every < 1 or self.grid.n_steps % self.save_every:
            raise ValueError("save_every must divide n_steps")
        if self.n_workers < 1 or self.block_size < 1:
            raise ValueError("n_workers and block_size must be >= 1")

    @property
    def save_indices(self) -> np.ndarray:
        return np.arange(0, self.grid.n_steps + 1, self.save_every)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[self.save_indices]


@dataclass
class EnsembleResult:
    """Sample means with standard errors ``std(ddof=1) / sqrt(n_traj)``.

    ``state_stderr`` holds, per matrix entry, the standard error of the
    complex sample mean (``sqrt(var(Re) + var(Im)) / sqrt(n)``). States are
    ``None`` when the run was configured with ``store_states=False``.
    """

    times: np.ndarray
    n_traj: int
    mean_states: np.ndarray | None = None
    state_stderr: np.ndarray | None = None
    observable_stats: dict = field(default_factory=dict)

    def mean(self, name: str) -> np.ndarray:
        return self.observable_stats[name][0]

    def stderr(self, name: str) -> np.ndarray:
        return self.observable_stats[name][1]

    def validate(self, tol: Tolerances = DEFAULT_TOL) -> None:
        if self.mean_states is None:
            return
        for k, rho in enumerate(self.mean_states):
            check_density(rho, tol, step=k)


class _Moments:
    """Running count, mean and sum of squared deviations."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self, n, mean, m2):
        self.n, self.mean, self.m2 = n, mean, m2

    @classmethod
    def of_batch(cls, x: np.ndarray) -> "_Moments":
        mu = x.mean(axis=0)
        dev = x - mu
        return cls(x.shape[0], mu, np.sum((dev * np.conj(dev)).real, axis=0))

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + (delta * np.conj(delta)).real * (self.n * other.n / n)
        return _Moments(n, mean, m2)

    def stderr(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.m2)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _pairwise(items):
    items = list(items)
    while len(items) > 1:
        nxt = [items[i].merge(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _merge_partials(partials):
    keys = partials[0].keys()
    return {k: _pairwise([p[k] for p in partials]) for k in keys}


def _run_blocks(config: EnsembleConfig, block_fn):
    blocks = [range(s, min(s + config.block_size, config.n_traj))
              for s in range(0, config.n_traj, config.block_size)]
    if config.n_workers == 1 or len(blocks) == 1:
        partials = [block_fn(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=config.n_workers) as pool:
            partials = list(pool.map(block_fn, blocks))
    return _merge_partials(partials)


def _finish(config: EnsembleConfig, merged, obs_names, store_states) -> EnsembleResult:
    res = EnsembleResult(times=config.times, n_traj=config.n_traj)
    if store_states:
        st = merged["__states__"]
        res.mean_states = st.mean
        res.state_stderr = st.stderr()
    for name in obs_names:
        m = merged[name]
        res.observable_stats[name] = (m.mean.real, m.stderr())
    return res


def _check_observables(observables, dim):
    out = {}
    for name, A in (observables or {}).items():
        A = HermitianOperator(A).matrix
        if A.shape[0] != dim:
            raise DimensionError(f"observable {name!r} has dim {A.shape[0]}, expected {dim}")
        out[name] = A
    return out


def simultaneous_eigenbasis(ops, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Unitary whose columns jointly diagonalize commuting Hermitian ``ops``.

    Each operator is diagonalized inside the degenerate eigenspaces left by
    the previous ones.
    """
    ops = [as_matrix(o) for o in ops]
    d = ops[0].shape[0]
    W = np.eye(d, dtype=complex)
    groups = [np.arange(d)]
    for op in ops:
        scale = max(float(np.max(np.abs(op))), 1.0)
        new_groups = []
        for g in groups:
            sub = W[:, g].conj().T @ op @ W[:, g]
            w, q = np.linalg.eigh(0.5 * (sub + sub.conj().T))
            W[:, g] = W[:, g] @ q
            start = 0
            for i in range(1, len(g) + 1):
                if i == len(g) or w[i] - w[i - 1] >= tol.degeneracy_rel * scale:
                    new_groups.append(g[start:i])
                    start = i
        groups = new_groups
    for op in ops:
        D = W.conj().T @ op @ W
        off = np.max(np.abs(D - np.diag(np.diag(D))))
        if off > 1e-8 * max(float(np.max(np.abs(op))), 1.0):
            raise InvariantError(f"operators are not simultaneously diagonalizable (off-diagonal {off:.3e})")
    return W


def _time_chunks(n_times, batch, dim):
    per = max(1, _CHUNK_ELEMENTS // max(1, batch * dim * dim))
    return [slice(s, min(s + per, n_times)) for s in range(0, n_times, per)]


def _basis_change(W: np.ndarray):
    """Batched ``X -> W X W^dagger`` over the trailing two axes."""
    d = W.shape[0]
    if np.allclose(W, np.eye(d), rtol=0, atol=0):
        return lambda X: X
    if d <= 6:
        K = np.kron(W, W.conj()).T
        return lambda X: (X.reshape(X.shape[:-2] + (d * d,)) @ K).reshape(X.shape)
    Wd = W.conj().T
    return lambda X: W @ X @ Wd


def _sparse_pairs(C: np.ndarray):
    ia, ib = np.nonzero(np.abs(C) > 0)
    return ia, ib, C[ia, ib]


def phase_ensemble(basis, energies, amplitudes, kernels, rho0, config: EnsembleConfig,
                   observables=None) -> EnsembleResult:
    r"""Average of diagonal random phases in a fixed orthonormal ``basis``.

    Trajectory ``k`` applies ``z_a(t) = exp(-i (e_a t + sum_r A_{ar} X_r(t)))``
    to basis vector ``a``, where ``X_r`` is the discrete Ito integral of
    ``kernels[r]`` against stream ``(master_seed, k, r)``.

    Parameters
    ----------
    basis : (d, d) array
        Unitary with basis vectors as columns.
    energies : (d,) array
        Deterministic phase rates.
    amplitudes : (d, r) array
        Noise loading of each basis vector on each independent channel.
    kernels : list of NoiseKernel
        One kernel per channel.
    """
    W = as_matrix(basis)
    d = W.shape[0]
    e = np.asarray(energies, dtype=float)
    A = np.asarray(amplitudes, dtype=float).reshape(d, -1)
    kernels = list(kernels)
    if A.shape[1] != len(kernels):
        raise DimensionError("one kernel per amplitude column is required")
    rho0 = as_matrix(rho0)
    check_density(rho0)
    obs = _check_observables(observables, d)
    grid = config.grid
    idx = config.save_indices
    times = grid.times[idx]
    rho_e = W.conj().T @ rho0 @ W
    r = A.shape[1]
    kvals = np.array([k(grid.times[:-1]) for k in kernels]).reshape(r, grid.n_steps)
    active = [c for c in range(r) if np.any(kvals[c] != 0) and np.any(A[:, c] != 0)]
    pairs = {}
    for name, O in obs.items():
        C = rho_e * (W.conj().T @ O @ W).T
        ia, ib, cv = _sparse_pairs(C)
        pairs[name] = (ia, ib, cv) if len(cv) < d * d // 4 else C
    to_orig = _basis_change(W)

    def block(trajs):
        B = len(trajs)
        phase = np.broadcast_to(np.outer(times, e), (B, len(times), d)).copy()
        if active:
            inc = increment_block(config.master_seed, trajs, active, grid)
            X = ito_sum(kvals[active][None, :, :], inc)[:, :, idx]
            phase += np.matmul(X.transpose(0, 2, 1), A[:, active].T)
        z = None
        if config.store_states or any(not isinstance(P, tuple) for P in pairs.values()):
            z = np.exp(-1j * phase)
        out = {}
        for name, P in pairs.items():
            if isinstance(P, tuple):
                ia, ib, cv = P
                diag = ia == ib
                vals = np.full((B, len(times)), cv[diag].real.sum())
                off = ~diag
                if off.any():
                    dphi = phase[:, :, ia[off]] - phase[:, :, ib[off]]
                    c = cv[off]
                    vals += np.cos(dphi) @ c.real + np.sin(dphi) @ c.imag
            else:
                vals = np.einsum("nta,ac,ntc->nt", z, P, z.conj()).real
            out[name] = _Moments.of_batch(vals)
        if config.store_states:
            parts = []
            for sl in _time_chunks(len(times), B, d):
                zc = z[:, sl]
                rho_t = rho_e[None, None] * zc[..., :, None] * zc.conj()[..., None, :]
                rho_t = to_orig(rho_t)
                parts.append(_Moments.of_batch(rho_t))
            out["__states__"] = _Moments(
                B,
                np.concatenate([p.mean for p in parts]),
                np.concatenate([p.m2 for p in parts]),
            )
        return out

    merged = _run_blocks(config, block)
    return _finish(config, merged, list(obs), config.store_states)


def _channel_basis(model: RandomUnitaryModel):
    ops = [V for V, _ in model.channels]
    if not ops:
        return np.eye(model.dim, dtype=complex)
    for i, a in enumerate(ops):
        for b in ops[i + 1:]:
            if np.max(np.abs(a @ b - b @ a)) >= DEFAULT_TOL.commuting:
                return None
    return simultaneous_eigenbasis(ops)


def _split_step_ensemble(model: RandomUnitaryModel, rho0, config: EnsembleConfig, observables):
    d = model.dim
    grid = config.grid
    obs = _check_observables(observables, d)
    n_ch = len(model.channels)
    kvals = np.array([k(grid.times[:-1]) for _, k in model.channels]).reshape(n_ch, grid.n_steps)
    UH = expm_hermitian_generator(model.H, grid.dt)
    W = _channel_basis(model)
    if W is not None:
        Wd = W.conj().T
        UH_w = Wd @ UH @ W
        vals = np.array([np.diag(Wd @ V @ W).real for V, _ in model.channels]).reshape(n_ch, d)
        rho_start = Wd @ rho0 @ W
        obs_w = {name: Wd @ O @ W for name, O in obs.items()}
    else:
        Vs = np.array([V for V, _ in model.channels])
        rho_start = rho0
        obs_w = obs
    save = set(config.save_indices.tolist())
    to_orig = _basis_change(W) if W is not None else (lambda X: X)

    def block(trajs):
        B = len(trajs)
        inc = increment_block(config.master_seed, trajs, n_ch, grid) if n_ch else None
        rho = np.broadcast_to(rho_start, (B, d, d)).copy()
        state_means, state_m2 = [], []
        obs_vals = {name: [] for name in obs}

        def record():
            for name, O in obs_w.items():
                obs_vals[name].append(np.einsum("ij,bji->b", O, rho).real)
            if config.store_states:
                m = _Moments.of_batch(to_orig(rho))
                state_means.append(m.mean)
                state_m2.append(m.m2)

        record()
        for k in range(grid.n_steps):
            if n_ch:
                c = kvals[None, :, k] * inc[:, :, k]
                if W is not None:
                    ph = np.exp(-1j * (c @ vals))
                    rho = ph[:, :, None] * rho * ph.conj()[:, None, :]
                else:
                    M = np.einsum("bc,cij->bij", c, Vs)
                    w, q = np.linalg.eigh(M)
                    N = (q * np.exp(-1j * w)[:, None, :]) @ q.conj().transpose(0, 2, 1)
                    rho = N @ rho @ N.conj().transpose(0, 2, 1)
            rho = UH_w @ rho @ UH_w.conj().T if W is not None else UH @ rho @ UH.conj().T
            if k + 1 in save:
                record()
        out = {name: _Moments.of_batch(np.array(v).T) for name, v in obs_vals.items()}
        if config.store_states:
            out["__states__"] = _Moments(B, np.array(state_means), np.array(state_m2))
        return out

    merged = _run_blocks(config, block)
    return _finish(config, merged, list(obs), config.store_states)


def split_step_mean(model: RandomUnitaryModel, rho0, grid: TimeGrid) -> np.ndarray:
    """Exact expectation of the Lie-Trotter sampler on ``grid``.

    Averaging one step's Gaussian kick gives
    ``exp(-dt/2 sum_i v_i(t_k)**2 C_{V_i}^2)`` for commuting channels
    (``C_V = [V, .]``), followed by the free step. The result isolates the
    time-step bias of :func:`ensemble_average` with ``method="general"``
    from its sampling error. Non-commuting channel sets are rejected because
    their kick is not a product of single-channel maps.
    """
    if _channel_basis(model) is None:
        raise ValueError("split-step mean needs mutually commuting channels")
    rho = as_matrix(rho0).astype(complex)
    d = model.dim
    eye = np.eye(d)
    UH = expm_hermitian_generator(model.H, grid.dt)
    t = grid.times
    gens = []
    for V, _ in model.channels:
        C = np.kron(eye, V) - np.kron(V.T, eye)
        gens.append(C @ C)
    rates = np.array([k.rate(t[:-1]) for _, k in model.channels]).reshape(len(gens), -1)
    out = np.empty((grid.n_steps + 1, d, d), dtype=complex)
    out[0] = rho
    cache = {}
    for k in range(grid.n_steps):
        key = tuple(rates[:, k])
        if key not in cache:
            G = sum((-0.5 * grid.dt * r) * C2 for r, C2 in zip(key, gens)) if gens else np.zeros((d * d, d * d))
            cache[key] = expm(G)
        v = cache[key] @ rho.reshape(-1, order="F")
        rho = UH @ v.reshape(d, d, order="F") @ UH.conj().T
        out[k + 1] = rho
    return out


def commuting_phase_data(model: RandomUnitaryModel):
    """Shared eigenbasis, energies and channel loadings of a commuting model."""
    if not model.commuting:
        raise ValueError("model operators do not commute")
    W = simultaneous_eigenbasis([model.H] + [V for V, _ in model.channels])
    Wd = W.conj().T
    energies = np.diag(Wd @ model.H @ W).real
    loads = np.array([np.diag(Wd @ V @ W).real for V, _ in model.channels]).reshape(-1, model.dim).T
    kernels = [k for _, k in model.channels]
    return W, energies, loads, kernels


def ensemble_average(model, rho0, config: EnsembleConfig, observables=None,
                     method: str = "auto") -> EnsembleResult:
    """Sample mean of ``U rho0 U^dagger`` over ``config.n_traj`` trajectories.

    ``method`` is ``"commuting"``, ``"general"`` or ``"auto"`` (commuting
    whenever the model allows it).
    """
    if not isinstance(model, RandomUnitaryModel):
        model = RandomUnitaryModel.from_lindblad(model)
    rho0 = as_matrix(rho0)
    check_density(rho0)
    if rho0.shape != model.H.shape:
        raise DimensionError("initial state does not match model dimension")
    if method == "auto":
        method = "commuting" if model.commuting else "general"
    if method == "commuting":
        W, energies, loads, kernels = commuting_phase_data(model)
        return phase_ensemble(W, energies, loads, kernels, rho0, config, observables)
    if method == "general":
        return _split_step_ensemble(model, rho0, config, observables)
    raise ValueError(f"unknown method {method!r}")


def _check_streams(model, stream_set, grid):
    stream_set = list(stream_set)
    if len(stream_set) != len(model.channels):
        raise ValueError(f"need {len(model.channels)} streams, got {len(stream_set)}")
    for s in stream_set:
        if s.grid != grid:
            raise ValueError("stream grid differs from the trajectory grid")
    return stream_set


def trajectory_commuting(model: RandomUnitaryModel, stream_set, grid: TimeGrid) -> np.ndarray:
    """Unitaries ``exp(-i t_k H - i sum_i X_i(t_k) V_i)`` at every grid point."""
    if not model.commuting:
        raise ValueError("trajectory_commuting requires commuting operators")
    streams = _check_streams(model, stream_set, grid)
    W, energies, loads, kernels = commuting_phase_data(model)
    t = grid.times
    phase = np.outer(t, energies)
    for c, (s, k) in enumerate(zip(streams, kernels)):
        X = ito_sum(k(t[:-1]), sample_increments(s))
        phase += np.outer(X, loads[:, c])
    return np.einsum("ia,ta,ja->tij", W, np.exp(-1j * phase), W.conj())


def trajectory_general(model: RandomUnitaryModel, stream_set, grid: TimeGrid) -> np.ndarray:
    """Lie-Trotter unitaries ``U_{k+1} = exp(-iH dt) exp(-i sum_i v_i(t_k) dB_i V_i) U_k``."""
    streams = _check_streams(model, stream_set, grid)
    t = grid.times
    UH = expm_hermitian_generator(model.H, grid.dt)
    incs = [k(t[:-1]) * sample_increments(s) for s, (_, k) in zip(streams, model.channels)]
    d = model.dim
    out = np.empty((grid.n_steps + 1, d, d), dtype=complex)
    U = np.eye(d, dtype=complex)
    out[0] = U
    for k in range(grid.n_steps):
        if streams:
            M = sum(inc[k] * V for inc, (V, _) in zip(incs, model.channels))
            U = expm_hermitian_generator(M, 1.0) @ U
        U = UH @ U
        out[k + 1] = U
    return out


def trajectory_streams(model, master_seed: int, trajectory_index: int, grid: TimeGrid):
    return [BrownianIncrementStream(master_seed, trajectory_index, c, grid)
            for c in range(len(model.channels))]


def unitary_state_paths(model: RandomUnitaryModel, psi0, master_seed: int, trajectories,
                        grid: TimeGrid) -> np.ndarray:
    """Pure-state paths ``U(t_k) psi0`` for the given trajectory indices, shape ``(B, T, d)``."""
    psi0 = np.asarray(psi0, dtype=complex)
    out = []
    for k in trajectories:
        streams = trajectory_streams(model, master_seed, k, grid)
        if model.commuting:
            U = trajectory_commuting(model, streams, grid)
        else:
            U = trajectory_general(model, streams, grid)
        out.append(U @ psi0)
    return np.array(out)


def variance_process(psi_path, A) -> np.ndarray:
    r"""Conditional variance :math:`\langle(A-A_t)^2\rangle` along state paths.

    ``psi_path`` has the state index last; any leading shape is kept.
    """
    A = HermitianOperator(A).matrix
    psi = np.asarray(psi_path, dtype=complex)
    norm2 = np.einsum("...i,...i->...", psi.conj(), psi).real
    if np.any(norm2 == 0):
        raise ValueError("zero-norm state in path")
    Apsi = psi @ A.T
    mean = np.einsum("...i,...i->...", psi.conj(), Apsi).real / norm2
    # centred form avoids cancellation once a path has nearly collapsed
    D = Apsi - mean[..., None] * psi
    return np.einsum("...i,...i->...", D.conj(), D).real / norm2


def _collapse_step(psi, H, A, dt, dB):
    Apsi = psi @ A.T
    At = np.einsum("...i,...i->...", psi.conj(), Apsi).real
    Dpsi = Apsi - At[..., None] * psi
    D2psi = Dpsi @ A.T - At[..., None] * Dpsi
    drift = -1j * (psi @ H.T) - 0.5 * D2psi
    psi = psi + drift * dt + Dpsi * dB[..., None]
    norm = np.linalg.norm(psi, axis=-1)
    return psi, norm


def collapse_trajectory(H, A, psi0, stream: BrownianIncrementStream, grid: TimeGrid) -> np.ndarray:
    """Euler-Maruyama path of the norm-preserving collapse equation.

    Step: ``psi += (-iH psi - (A - A_t)^2 psi / 2) dt + (A - A_t) psi dB``,
    then renormalize. Returns states of shape ``(n_steps + 1, d)``.
    """
    H, A = HermitianOperator(H).matrix, HermitianOperator(A).matrix
    psi = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    if stream.grid != grid:
        raise ValueError("stream grid differs from the trajectory grid")
    dB = sample_increments(stream)
    out = np.empty((grid.n_steps + 1, psi.size), dtype=complex)
    out[0] = psi
    for k in range(grid.n_steps):
        psi, norm = _collapse_step(psi, H, A, grid.dt, dB[k])
        if norm == 0 or not np.isfinite(norm):
            raise InvariantError("collapse step produced a zero vector", step=k + 1)
        psi = psi / norm
        out[k + 1] = psi
    return out


def collapse_ensemble(H, A, psi0, config: EnsembleConfig, observables=None) -> EnsembleResult:
    """Ensemble statistics of :func:`collapse_trajectory` paths.

    Uses channel 0 of each trajectory's stream family. The observable
    ``"variance"`` (conditional variance of ``A``) is always reported.
    """
    H, A = HermitianOperator(H).matrix, HermitianOperator(A).matrix
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    d = psi0.size
    obs = _check_observables(observables, d)
    grid = config.grid
    save = set(config.save_indices.tolist())

    def block(trajs):
        B = len(trajs)
        dB = increment_block(config.master_seed, trajs, 1, grid)[:, 0]
        psi = np.broadcast_to(psi0, (B, d)).copy()
        recs = {name: [] for name in obs}
        recs["variance"] = []
        st_mean, st_m2 = [], []

        def record():
            recs["variance"].append(variance_process(psi, A))
            for name, O in obs.items():
                recs[name].append(np.einsum("bi,ij,bj->b", psi.conj(), O, psi).real)
            if config.store_states:
                m = _Moments.of_batch(psi[:, :, None] * psi.conj()[:, None, :])
                st_mean.append(m.mean)
                st_m2.append(m.m2)

        record()
        for k in range(grid.n_steps):
            psi, norm = _collapse_step(psi, H, A, grid.dt, dB[:, k])
            if np.any(norm == 0) or not np.all(np.isfinite(norm)):
                raise InvariantError("collapse step produced a zero vector", step=k + 1)
            psi = psi / norm[:, None]
            if k + 1 in save:
                record()
        out = {name: _Moments.of_batch(np.array(v).T) for name, v in recs.items()}
        if config.store_states:
            out["__states__"] = _Moments(B, np.array(st_mean), np.array(st_m2))
        return out

    merged = _run_blocks(config, block)
    return _finish(config, merged, ["variance", *obs], config.store_states)
