import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randevolve.core import PAULI_X, PAULI_Z, eigendecompose, random_density, random_hermitian
from randevolve.ensemble import EnsembleConfig
from randevolve.intrinsic import (
    SpectralPromotionSpec,
    gaussian_kernel,
    integrate_promoted,
    milburn_generator_apply,
    nonmarkov_dephasing_rate,
    promoted_evolve_exact,
    promoted_generator_apply,
    spectral_promoted_evolve,
)
from randevolve.lindblad import LindbladModel, generator_apply
from randevolve.stochastic import CorrelationSpec, NoiseKernel, TimeGrid

seeds = st.integers(0, 2**32 - 1)


def test_gaussian_kernel():
    K = gaussian_kernel([0.0, 1.0, 3.0], 0.5)
    assert np.allclose(np.diag(K), 1)
    assert K[0, 2] == pytest.approx(np.exp(-0.25 * 9))
    with pytest.raises(ValueError):
        gaussian_kernel([0.0], -1.0)


@given(seeds, st.integers(1, 5), st.floats(0, 2))
def test_milburn_zero_tau_is_double_commutator(seed, d, gamma):
    rng = np.random.default_rng(seed)
    H, rho = random_hermitian(d, rng), random_density(d, rng)
    ref = generator_apply(LindbladModel(H, [(H, gamma)]), rho, 0.0)
    assert np.max(np.abs(milburn_generator_apply(H, gamma, 0.0, rho) - ref)) < 1e-12


def test_milburn_large_tau_is_independent_levels(rng):
    H, rho = random_hermitian(3, rng), random_density(3, rng)
    spec = SpectralPromotionSpec(H, 0.4, correlation="independent")
    assert np.allclose(milburn_generator_apply(H, 0.4, 1e4, rho), promoted_generator_apply(spec, rho, 0.0))


@given(seeds, st.floats(0, 3))
def test_promotion_reproduces_milburn(seed, tau):
    rng = np.random.default_rng(seed)
    H, rho = random_hermitian(4, rng), random_density(4, rng)
    spec = SpectralPromotionSpec(H, 0.7, correlation=("gaussian", tau))
    assert np.allclose(promoted_generator_apply(spec, rho, 0.0), milburn_generator_apply(H, 0.7, tau, rho), atol=1e-12)


def test_global_phase_stays_unitary(rng):
    H, rho = random_hermitian(3, rng), random_density(3, rng)
    spec = SpectralPromotionSpec(H, 2.0, scale="constant", correlation="full")
    assert np.allclose(spec.decay_rates(), 0)
    w, V = np.linalg.eigh(H)
    U = (V * np.exp(-1j * 1.3 * w)) @ V.conj().T
    assert np.max(np.abs(promoted_evolve_exact(spec, rho, 1.3) - U @ rho @ U.conj().T)) < 1e-12


def test_degenerate_levels_share_noise():
    H = np.diag([1.0, 1.0, -1.0])
    spec = SpectralPromotionSpec(H, 1.0)
    assert spec.pair_shape().shape == (2, 2)
    rho = np.full((3, 3), 1 / 3, dtype=complex)
    out = promoted_evolve_exact(spec, rho, 2.0)
    # coherence inside the degenerate level is untouched
    assert out[0, 1] == pytest.approx(1 / 3)


def test_spec_validation():
    with pytest.raises(ValueError):
        SpectralPromotionSpec(PAULI_Z, 1.0, scale="bogus")
    with pytest.raises(ValueError):
        SpectralPromotionSpec(PAULI_Z, 1.0, scale=[1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        SpectralPromotionSpec(PAULI_Z, 1.0, correlation=CorrelationSpec(np.eye(3)))
    SpectralPromotionSpec(eigendecompose(PAULI_Z), NoiseKernel.constant(1.0), correlation=np.eye(2))


def test_nonmarkov_closed_form():
    sigma = NoiseKernel.power_law(1.0, 1.0)
    assert nonmarkov_dephasing_rate(sigma, 1.5) == pytest.approx(1.5**3 / 3)
    spec = SpectralPromotionSpec(PAULI_Z, sigma, correlation="full")
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    rec = integrate_promoted(spec, rho0, TimeGrid(1.5, 600))
    # H = sigma_z and v(t) = t: coherence decays as exp(-2 t^3 / 3)
    ref = 0.5 * np.exp(-2j * rec.times) * np.exp(-2 * rec.times**3 / 3)
    assert np.max(np.abs(rec.states[:, 0, 1] - ref)) < 1e-8
    assert promoted_evolve_exact(spec, rho0, 1.5)[0, 1] == pytest.approx(ref[-1], abs=1e-14)


def test_rk4_matches_exact(rng):
    H = random_hermitian(4, rng)
    spec = SpectralPromotionSpec(H, 0.3, correlation=("gaussian", 0.5))
    rho0 = random_density(4, rng)
    rec = integrate_promoted(spec, rho0, TimeGrid(2.0, 1000))
    assert np.max(np.abs(rec.states[-1] - promoted_evolve_exact(spec, rho0, 2.0))) < 1e-9


def test_mc_matches_exact():
    H = np.diag([-1.0, 0.0, 1.5])
    spec = SpectralPromotionSpec(H, 0.5, correlation=("gaussian", 1.0))
    rho0 = np.full((3, 3), 1 / 3, dtype=complex)
    X = np.zeros((3, 3))
    X[0, 1] = X[1, 0] = X[1, 2] = X[2, 1] = 1
    res = spectral_promoted_evolve(spec, rho0, EnsembleConfig(3000, 2, TimeGrid(2.0, 200), save_every=50),
                                   {"x": X})
    ref = np.array([np.trace(X @ promoted_evolve_exact(spec, rho0, t)).real for t in res.times])
    assert np.all(np.abs(res.mean("x") - ref) <= 5 * res.stderr("x") + 1e-8)


def test_zero_noise_is_unitary():
    rho0 = np.array([[1, 0], [0, 0]], dtype=complex)
    spec = SpectralPromotionSpec(PAULI_X, 0.0)
    out = promoted_evolve_exact(spec, rho0, np.pi / 4)
    assert np.allclose(out, np.diag([0.5, 0.5]) + 0.5j * np.array([[0, 1], [-1, 0]]))
