import math

import numpy as np
import pytest

from src.errors import GridError, InvalidConfigError
from src.stochastic import (
    InitialModeDist,
    InitialModeKind,
    NoiseConfig,
    NoisePath,
    bose_occupation,
    derive_stream,
    ou_noise_path,
    sample_initial_modes,
)
from src.trajectory import TimeGrid


def test_derive_stream_is_deterministic():
    first = derive_stream(12345, 3).random(100)
    second = derive_stream(12345, 3).random(100)
    np.testing.assert_array_equal(first, second)


def test_derive_stream_separates_indices_and_seeds():
    base = derive_stream(12345, 0).random(100)
    assert not np.array_equal(base, derive_stream(12345, 1).random(100))
    assert not np.array_equal(base, derive_stream(12346, 0).random(100))


def test_derive_stream_accepts_full_64_bit_seeds():
    draws = derive_stream(2**64 - 1, 0).random(4)
    assert draws.shape == (4,)


def test_vacuum_amplitudes_are_zero(lattice):
    alphas = sample_initial_modes(lattice, InitialModeDist(InitialModeKind.VACUUM), derive_stream(0, 0))
    assert alphas.shape == (12,)
    assert np.all(alphas == 0)


def test_thermal_at_zero_temperature_is_vacuum(lattice):
    alphas = sample_initial_modes(lattice, InitialModeDist("thermal", temperature=0.0), derive_stream(0, 0))
    assert np.all(alphas == 0)


def test_fixed_occupation_has_exact_modulus(lattice):
    alphas = sample_initial_modes(lattice, InitialModeDist("fixed", occupation=4.0), derive_stream(5, 0))
    np.testing.assert_allclose(np.abs(alphas), 2.0, rtol=1e-15)


def test_fixed_occupation_phases_are_uniform(lattice):
    dist = InitialModeDist("fixed", occupation=1.0)
    phases = np.concatenate(
        [np.angle(sample_initial_modes(lattice, dist, derive_stream(31, index))) for index in range(1000)]
    )
    assert phases.size >= 10_000
    # circular mean of e^{iφ}: both components should vanish
    samples = np.stack([np.cos(phases), np.sin(phases)], axis=1)
    z = samples.mean(axis=0) / (samples.std(axis=0, ddof=1) / math.sqrt(phases.size))
    assert math.sqrt(float(np.mean(z**2))) <= 3.0


def test_thermal_occupation_matches_bose_factor(lattice):
    temperature = 1.5
    dist = InitialModeDist("thermal", temperature=temperature)
    draws = np.array([sample_initial_modes(lattice, dist, derive_stream(8, index)) for index in range(10_000)])
    occupation = np.abs(draws) ** 2
    expected = bose_occupation(1.0, temperature)
    stderr = occupation.std(ddof=1) / math.sqrt(occupation.size)
    assert abs(occupation.mean() - expected) <= 3.0 * stderr
    assert abs(draws.mean()) <= 3.0 * math.sqrt(expected / draws.size) * math.sqrt(2.0)


def test_bose_occupation_values():
    assert bose_occupation(1.0, 0.0) == 0.0
    assert bose_occupation(1.0, 1.0) == pytest.approx(1.0 / (math.e - 1.0))
    np.testing.assert_allclose(bose_occupation(np.array([1.0, 2.0]), 2.0), 1.0 / np.expm1([0.5, 1.0]))
    with pytest.raises(InvalidConfigError):
        bose_occupation(1.0, -1.0)


@pytest.mark.parametrize(
    "kwargs",
    [{"temperature": -1.0}, {"occupation": -0.5}, {"kind": "squeezed"}],
)
def test_initial_distribution_validates(kwargs):
    with pytest.raises(InvalidConfigError):
        InitialModeDist(**kwargs)


def test_noise_config_validates():
    with pytest.raises(InvalidConfigError):
        NoiseConfig(sigma=-1.0)
    with pytest.raises(InvalidConfigError):
        NoiseConfig(tau_c=0.0)


def test_zero_sigma_or_disabled_noise_is_silent():
    grid = TimeGrid(0.0, 0.1, 10)
    for config in (NoiseConfig(sigma=0.0, enabled=True), NoiseConfig(sigma=1.0, enabled=False)):
        path = ou_noise_path(config, grid, derive_stream(1, 0))
        assert path.values.shape == (11, 3)
        assert np.all(path.values == 0)


def test_noise_path_shape_is_checked():
    with pytest.raises(GridError):
        NoisePath(TimeGrid(0.0, 0.1, 10), np.zeros((5, 3)))


def test_ou_path_is_reproducible():
    config = NoiseConfig(sigma=1.0, tau_c=0.3, enabled=True)
    grid = TimeGrid(0.0, 0.05, 40)
    first = ou_noise_path(config, grid, derive_stream(4, 2)).values
    second = ou_noise_path(config, grid, derive_stream(4, 2)).values
    np.testing.assert_array_equal(first, second)


def test_ou_statistics_match_exponential_correlation():
    sigma, tau_c = 2.0, 0.5
    config = NoiseConfig(sigma=sigma, tau_c=tau_c, enabled=True)
    grid = TimeGrid(0.0, 0.1, 20)
    paths = np.array([ou_noise_path(config, grid, derive_stream(99, index)).values for index in range(4000)])

    # each path starts stationary, so the first point samples N(0, σ²) independently per component
    start = paths[:, 0, :].reshape(-1)
    variance = start.var(ddof=1)
    assert abs(variance - sigma**2) <= 3.0 * sigma**2 * math.sqrt(2.0 / (start.size - 1))
    assert abs(paths[:, -1, :].mean()) <= 3.0 * sigma / math.sqrt(paths[:, -1, :].size)

    z = []
    for lag in (1, 3, 10):
        products = (paths[:, 0, :] * paths[:, lag, :]).reshape(-1)
        expected = sigma**2 * math.exp(-lag * grid.dt / tau_c)
        z.append((products.mean() - expected) / (products.std(ddof=1) / math.sqrt(products.size)))
    assert math.sqrt(float(np.mean(np.square(z)))) <= 3.0
