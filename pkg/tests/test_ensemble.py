import numpy as np
import pytest

from randevolve.core import PAULI_X, PAULI_Y, PAULI_Z, InvariantError, random_density, random_hermitian
from randevolve.ensemble import (
    EnsembleConfig,
    RandomUnitaryModel,
    collapse_ensemble,
    collapse_trajectory,
    ensemble_average,
    phase_ensemble,
    simultaneous_eigenbasis,
    split_step_mean,
    trajectory_commuting,
    trajectory_general,
    trajectory_streams,
    unitary_state_paths,
    variance_process,
)
from randevolve.lindblad import analytic_markov_evolve, analytic_markov_series
from randevolve.stochastic import ZERO_KERNEL, BrownianIncrementStream, NoiseKernel, TimeGrid, ito_sum

PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def within(mc, ref, se, k=3.0, atol=1e-12):
    return np.all(np.abs(mc - ref) <= k * se + atol)


def test_commuting_flag():
    assert RandomUnitaryModel(PAULI_Z, [(PAULI_Z, 1.0)]).commuting
    assert not RandomUnitaryModel(PAULI_X, [(PAULI_Z, 1.0)]).commuting
    assert not RandomUnitaryModel(PAULI_Z, [(PAULI_Z, 1.0), (PAULI_X, 1.0)]).commuting


def test_ensemble_config_validation():
    g = TimeGrid(1.0, 10)
    with pytest.raises(ValueError):
        EnsembleConfig(0, 1, g)
    with pytest.raises(ValueError):
        EnsembleConfig(10, 1, g, save_every=3)
    assert np.allclose(EnsembleConfig(10, 1, g, save_every=5).times, [0, 0.5, 1.0])


def test_simultaneous_eigenbasis_with_degeneracy(rng):
    # A has a degenerate block that B splits
    Q = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
    A = Q @ np.diag([1, 1, 2, 2]) @ Q.conj().T
    B = Q @ np.diag([0, 3, 5, 5]) @ Q.conj().T
    W = simultaneous_eigenbasis([A, B])
    for op in (A, B):
        D = W.conj().T @ op @ W
        assert np.allclose(D, np.diag(np.diag(D)), atol=1e-10)
    with pytest.raises(InvariantError):
        simultaneous_eigenbasis([PAULI_X, PAULI_Z])


def test_trajectory_commuting_direct_exponential():
    g = TimeGrid(1.0, 50)
    model = RandomUnitaryModel(np.zeros((2, 2)), [(PAULI_Z, 1.0)])
    streams = trajectory_streams(model, 3, 0, g)
    U = trajectory_commuting(model, streams, g)
    X = ito_sum(np.ones(50), streams[0].increments())
    ref = np.zeros_like(U)
    ref[:, 0, 0], ref[:, 1, 1] = np.exp(-1j * X), np.exp(1j * X)
    assert np.allclose(U, ref, atol=1e-12)


def test_zero_kernel_trajectories_are_free_evolution(rng):
    H = random_hermitian(3, rng)
    g = TimeGrid(1.0, 20)
    model = RandomUnitaryModel(H, [(np.diag([1.0, 2.0, 3.0]), ZERO_KERNEL)])
    U = trajectory_general(model, trajectory_streams(model, 0, 0, g), g)
    w, V = np.linalg.eigh(H)
    assert np.allclose(U[-1], (V * np.exp(-1j * w)) @ V.conj().T, atol=1e-10)


def test_trajectory_unitarity(rng):
    g = TimeGrid(1.0, 200)
    model = RandomUnitaryModel(random_hermitian(3, rng), [(random_hermitian(3, rng), 1.0),
                                                         (random_hermitian(3, rng), 0.5)])
    U = trajectory_general(model, trajectory_streams(model, 1, 0, g), g)
    dev = np.einsum("tji,tjk->tik", U.conj(), U) - np.eye(3)
    assert np.max(np.abs(dev)) < 1e-10
    with pytest.raises(ValueError):
        trajectory_commuting(model, trajectory_streams(model, 1, 0, g), g)


def test_commuting_ensemble_matches_analytic():
    model = RandomUnitaryModel(0.5 * PAULI_Z, [(PAULI_Z, 0.5)])
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    cfg = EnsembleConfig(4000, 11, TimeGrid(3.0, 300), save_every=30)
    res = ensemble_average(model, rho0, cfg, {"x": PAULI_X})
    exact = analytic_markov_series(model, rho0, res.times)
    assert within(res.mean_states, exact, res.state_stderr)
    assert within(res.mean("x"), np.einsum("ij,tji->t", PAULI_X, exact).real, res.stderr("x"))
    res.validate()


def test_general_and_commuting_paths_agree():
    model = RandomUnitaryModel(PAULI_Z, [(PAULI_Z, 1.0)])
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    cfg = EnsembleConfig(2000, 5, TimeGrid(1.0, 200), save_every=50)
    a = ensemble_average(model, rho0, cfg, method="commuting")
    b = ensemble_average(model, rho0, cfg, method="general")
    # same streams and exact phases: identical up to roundoff
    assert np.allclose(a.mean_states, b.mean_states, atol=1e-9)


def test_noncommuting_ensemble_matches_scheme_mean_and_analytic():
    model = RandomUnitaryModel(PAULI_X, [(PAULI_Z, 1.0)])
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    grid = TimeGrid(1.0, 500)
    cfg = EnsembleConfig(3000, 2, grid, save_every=100)
    res = ensemble_average(model, rho0, cfg, {"y": PAULI_Y})
    scheme = split_step_mean(model, rho0, grid)[::100]
    assert within(res.mean_states, scheme, res.state_stderr, atol=1e-10)
    exact = analytic_markov_series(model, rho0, res.times)
    assert np.max(np.abs(scheme - exact)) < 5e-3


def test_split_step_bias_is_first_order():
    model = RandomUnitaryModel(PAULI_X, [(PAULI_Z, 1.0)])
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    exact = analytic_markov_evolve(model, rho0, 1.0)
    bias = [np.max(np.abs(split_step_mean(model, rho0, TimeGrid(1.0, n))[-1] - exact)) for n in (100, 200, 400)]
    assert 1.8 < bias[0] / bias[1] < 2.2 and 1.8 < bias[1] / bias[2] < 2.2


def test_split_step_mean_rejects_noncommuting_channels():
    model = RandomUnitaryModel(PAULI_Z, [(PAULI_Z, 1.0), (PAULI_X, 1.0)])
    with pytest.raises(ValueError):
        split_step_mean(model, np.eye(2) / 2, TimeGrid(1.0, 10))


def test_noncommuting_channels_sampled(rng):
    model = RandomUnitaryModel(np.zeros((2, 2)), [(PAULI_Z, 0.5), (PAULI_X, 0.5)])
    rho0 = random_density(2, rng, 1)
    cfg = EnsembleConfig(2000, 9, TimeGrid(1.0, 400), save_every=100)
    res = ensemble_average(model, rho0, cfg)
    exact = analytic_markov_series(model, rho0, res.times)
    assert within(res.mean_states, exact, res.state_stderr, k=4, atol=5e-3)


def test_single_trajectory_zero_noise_is_exact(rng):
    H = random_hermitian(3, rng)
    rho0 = random_density(3, rng)
    model = RandomUnitaryModel(H, [(np.diag([1.0, 0, 0]), ZERO_KERNEL)])
    res = ensemble_average(model, rho0, EnsembleConfig(1, 0, TimeGrid(1.0, 10)))
    w, V = np.linalg.eigh(H)
    U = (V * np.exp(-1j * w)) @ V.conj().T
    assert np.allclose(res.mean_states[-1], U @ rho0 @ U.conj().T, atol=1e-12)
    assert np.all(res.state_stderr == 0)


def test_stderr_scales_with_sqrt_n():
    model = RandomUnitaryModel(np.zeros((2, 2)), [(PAULI_Z, 1.0)])
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    se = [ensemble_average(model, rho0, EnsembleConfig(n, 1, TimeGrid(1.0, 10)), {"x": PAULI_X}).stderr("x")[-1]
          for n in (1000, 2000)]
    assert se[0] / se[1] == pytest.approx(np.sqrt(2), rel=0.1)


@pytest.mark.parametrize("method", ["commuting", "general"])
def test_worker_count_does_not_change_bytes(method):
    model = RandomUnitaryModel(PAULI_Z, [(PAULI_Z, 1.0)])
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    runs = [ensemble_average(model, rho0, EnsembleConfig(700, 4, TimeGrid(1.0, 20), n_workers=w, block_size=64),
                             {"x": PAULI_X}, method=method) for w in (1, 4)]
    assert runs[0].mean_states.tobytes() == runs[1].mean_states.tobytes()
    assert runs[0].stderr("x").tobytes() == runs[1].stderr("x").tobytes()


def test_phase_ensemble_dense_and_sparse_observables_agree(rng):
    d = 4
    W = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))[0]
    e = rng.standard_normal(d)
    A = rng.standard_normal((d, 2))
    rho0 = random_density(d, rng)
    dense = random_hermitian(d, rng)
    sparse = W @ np.diag([1.0, 0, 0, 0]) @ W.conj().T
    cfg = EnsembleConfig(300, 3, TimeGrid(1.0, 10))
    res = phase_ensemble(W, e, A, [NoiseKernel.constant(1.0)] * 2, rho0, cfg, {"dense": dense, "sparse": sparse})
    for name, O in (("dense", dense), ("sparse", sparse)):
        ref = np.einsum("ij,tji->t", O, res.mean_states).real
        assert np.allclose(res.mean(name), ref, atol=1e-12)


def test_variance_process_examples():
    assert np.allclose(variance_process(np.array([[1, 0], [0, 1j]]), PAULI_Z), 0)
    assert variance_process(PLUS, PAULI_Z) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        variance_process(np.zeros(2), PAULI_Z)


def test_variance_conserved_along_unitary_paths(rng):
    H = np.diag([0.3, -0.2, 1.0])
    A = np.diag([1.0, -1.0, 0.5])
    psi0 = np.ones(3, dtype=complex) / np.sqrt(3)
    g = TimeGrid(2.0, 400)
    for model in (RandomUnitaryModel(H, [(A, 1.0)]),):
        paths = unitary_state_paths(model, psi0, 7, range(20), g)
        v = variance_process(paths, A)
        assert np.max(np.abs(v - v[:, :1])) < 1e-10
    # split-step paths too
    model = RandomUnitaryModel(H, [(A, 1.0)])
    U = trajectory_general(model, trajectory_streams(model, 7, 0, g), g)
    v = variance_process(U @ psi0, A)
    assert np.max(np.abs(v - v[0])) < 1e-10


def test_collapse_trajectory_eigenstate_is_stationary():
    g = TimeGrid(1.0, 100)
    psi = collapse_trajectory(np.zeros((2, 2)), PAULI_Z, np.array([1, 0], dtype=complex),
                              BrownianIncrementStream(0, 0, 0, g), g)
    assert np.allclose(psi, [1, 0])
    with pytest.raises(ValueError):
        collapse_trajectory(np.zeros((2, 2)), PAULI_Z, np.array([1, 1]), BrownianIncrementStream(0, 0, 0, g), g)


def test_collapse_contracts_variance_and_matches_lindblad():
    g = TimeGrid(10.0, 2000)
    cfg = EnsembleConfig(500, 3, g, save_every=100)
    res = collapse_ensemble(np.zeros((2, 2)), PAULI_Z, PLUS, cfg, {"x": PAULI_X})
    v = res.mean("variance")
    assert v[-1] < 0.1 * v[0]
    assert np.all(np.diff(v) <= 2 * res.stderr("variance")[1:])
    ref = np.exp(-2 * res.times)
    assert np.all(np.abs(res.mean("x") - ref) <= 3 * res.stderr("x") + 2 / cfg.n_traj)
