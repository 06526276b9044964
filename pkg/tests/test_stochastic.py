import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from randevolve.core import InvariantError
from randevolve.stochastic import (
    BrownianIncrementStream,
    CorrelationSpec,
    NoiseKernel,
    TimeGrid,
    expected_cos,
    expected_cos_squared,
    increment_block,
    ito_integral_path,
    ito_sum,
    lambda_of_t,
    sample_increments,
    stream_generator,
    theoretical_moment,
)


def test_time_grid():
    g = TimeGrid(2.0, 4)
    assert g.dt == 0.5
    assert np.allclose(g.times, [0, 0.5, 1, 1.5, 2])
    for bad in ((1.0, 0), (0.0, 3), (1.0, 2.5)):
        with pytest.raises(ValueError):
            TimeGrid(*bad)


def test_kernel_lambda_closed_forms():
    assert lambda_of_t(NoiseKernel.constant(np.sqrt(0.3)), 2.0) == pytest.approx(0.6)
    # v(s) = s gives t^3 / 3
    assert lambda_of_t(NoiseKernel.power_law(1.0, 1.0), 1.5) == pytest.approx(1.5**3 / 3)
    # v(s) = e^{-s} gives (1 - e^{-2t}) / 2
    assert lambda_of_t(NoiseKernel.exponential(1.0, 1.0), 0.7) == pytest.approx((1 - np.exp(-1.4)) / 2)
    assert lambda_of_t(NoiseKernel.exponential(2.0, 0.0), 0.5) == pytest.approx(2.0)


def test_tabulated_kernel_trapezoid():
    t = np.linspace(0, 1, 11)
    k = NoiseKernel.tabulated(t, 2 * np.ones_like(t))
    assert k.lam(0.55) == pytest.approx(4 * 0.55)
    assert k(0.3) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        k(1.5)
    with pytest.raises(ValueError):
        NoiseKernel.tabulated([0, 1, 1], [1, 1, 1])


@given(st.floats(0.01, 3), st.floats(-0.45, 2), st.floats(0.01, 2))
def test_power_law_lambda_is_integral_of_rate(c, p, t):
    k = NoiseKernel.power_law(c, p)
    numeric, _ = quad(lambda s: float(k.rate(s)), 0, t, limit=200, epsabs=0, epsrel=1e-10)
    assert k.lam(t) == pytest.approx(numeric, rel=1e-6, abs=1e-12)


def test_power_law_rejects_non_integrable():
    with pytest.raises(ValueError):
        NoiseKernel.power_law(1.0, -0.5)


def test_stream_reproducible_and_independent():
    g = TimeGrid(1.0, 64)
    a = sample_increments(BrownianIncrementStream(5, 3, 1, g))
    b = BrownianIncrementStream(5, 3, 1, g).increments()
    c = sample_increments(BrownianIncrementStream(5, 3, 2, g))
    d = sample_increments(BrownianIncrementStream(5, 4, 1, g))
    assert np.array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)
    with pytest.raises(ValueError):
        stream_generator(-1, 0, 0)


def test_increment_block_matches_single_streams():
    g = TimeGrid(1.0, 16)
    blk = increment_block(9, [2, 7], 3, g)
    assert blk.shape == (2, 3, 16)
    assert np.array_equal(blk[1, 2], sample_increments(BrownianIncrementStream(9, 7, 2, g)))
    # skipping channels leaves the others unchanged
    sub = increment_block(9, [2, 7], [0, 2], g)
    assert np.array_equal(sub[:, 1], blk[:, 2])


def test_ito_sum_left_point():
    v = np.array([1.0, 2.0, 3.0])
    dB = np.array([0.5, -1.0, 2.0])
    assert np.allclose(ito_sum(v, dB), [0, 0.5, -1.5, 4.5])


def test_ito_integral_path_shape():
    g = TimeGrid(1.0, 10)
    X = ito_integral_path(NoiseKernel.constant(2.0), BrownianIncrementStream(1, 0, 0, g))
    assert X.shape == (11,) and X[0] == 0


def test_moment_formula():
    k = NoiseKernel.constant(1.0)
    assert theoretical_moment(k, 3, 2.0) == 0
    assert theoretical_moment(k, 2, 2.0) == pytest.approx(2.0)
    assert theoretical_moment(k, 4, 2.0) == pytest.approx(12.0)
    assert theoretical_moment(k, 6, 2.0) == pytest.approx(120.0)
    assert theoretical_moment(k, 0, 2.0) == 1.0


def test_expected_cos_values():
    assert expected_cos(0.0, 2.0) == pytest.approx(np.exp(-1))
    assert expected_cos_squared(0.0, 0.0) == pytest.approx(1.0)
    assert expected_cos_squared(np.pi / 4, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        expected_cos(0.0, -1.0)


def test_sampled_moments_match_gaussian():
    g = TimeGrid(1.0, 50)
    k = NoiseKernel.constant(0.8)
    X = ito_sum(k(g.times[:-1]), increment_block(4, range(20000), 1, g)[:, 0])[:, -1]
    for n in (2, 4):
        se = np.std(X**n, ddof=1) / np.sqrt(len(X))
        assert abs(np.mean(X**n) - theoretical_moment(k, n, 1.0)) < 5 * se
    se = np.std(np.cos(0.4 + X), ddof=1) / np.sqrt(len(X))
    assert abs(np.mean(np.cos(0.4 + X)) - expected_cos(0.4, k.lam(1.0))) < 5 * se


def test_correlation_spec_validation():
    with pytest.raises(InvariantError):
        CorrelationSpec([[1, 0.5], [0.4, 1]])
    with pytest.raises(InvariantError):
        CorrelationSpec([[2, 0], [0, 1]])
    with pytest.raises(InvariantError):
        CorrelationSpec([[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1]])


@given(st.integers(0, 10**6), st.integers(1, 5))
def test_correlation_factor_reproduces_g(seed, n):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, n + 1))
    c = z @ z.T
    g = c / np.sqrt(np.outer(np.diag(c), np.diag(c)))
    spec = CorrelationSpec(g)
    assert np.allclose(spec.factor @ spec.factor.T, spec.g, atol=1e-10)


def test_singular_correlation_has_reduced_rank():
    spec = CorrelationSpec(np.ones((3, 3)))
    assert spec.rank == 1
    assert np.allclose(spec.factor @ spec.factor.T, 1.0)


def test_correlated_increment_covariance():
    g = np.array([[1, 0.6], [0.6, 1]])
    spec = CorrelationSpec(g)
    grid = TimeGrid(1.0, 1)
    W = increment_block(3, range(40000), spec.rank, grid)[:, :, 0]
    dB = W @ spec.factor.T
    cov = dB.T @ dB / len(dB)
    prod = dB[:, 0] * dB[:, 1]
    se = np.std(prod, ddof=1) / np.sqrt(len(prod))
    assert abs(cov[0, 1] - 0.6 * grid.dt) < 5 * se
