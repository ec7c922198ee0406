import logging
import math

import numpy as np
import pytest

from src.dipole_dynamics import (
    amplitude_closed_form_dipole,
    eom_dipole,
    integrate_dipole,
    mode_closed_form_dipole,
    velocity_dipole_closed,
)
from src.errors import GridError, InvalidFrequencyError
from src.models import ParticleParams, SystemState, build_lattice, dipole_couplings
from src.stochastic import NoisePath
from src.trajectory import TimeGrid


def _thermal_like_amplitudes(size, seed=7):
    rng = np.random.default_rng(seed)
    return 0.3 * (rng.normal(size=size) + 1j * rng.normal(size=size))


def test_eom_dipole_single_mode_by_hand(single_mode):
    lattice = single_mode(omega=2.0, v0=-0.5)
    state = SystemState.initial(lattice, (0, 0, 0), (2.0, 0.0, 0.0), [1.0])
    rates = eom_dipole(state, lattice, ParticleParams())
    np.testing.assert_allclose(rates.dx, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(rates.dp, [0.0, 0.0, 0.0])
    assert rates.dalphas[0] == pytest.approx(-1j)
    assert rates.matches(state)


def test_eom_dipole_passes_external_force(lattice, params):
    state = SystemState.initial(lattice, p0=(1.0, 0.0, 0.0))
    rates = eom_dipole(state, lattice, params, external_force=(0.0, 2.0, 0.0))
    np.testing.assert_allclose(rates.dp, [0.0, 2.0, 0.0])


def test_closed_form_half_period_example():
    assert mode_closed_form_dipole(0.0, 1.0, 1.0, 1.0, math.pi) == pytest.approx(2.0 + 0.0j, abs=1e-15)


def test_closed_form_is_periodic():
    alpha_bar_0 = 0.4 - 0.7j
    value = mode_closed_form_dipole(alpha_bar_0, 0.9, 3.0, 1.0, 2.0 * math.pi / 3.0)
    assert value == pytest.approx(alpha_bar_0, abs=1e-14)


@pytest.mark.parametrize("omega", [0.0, -1.0])
def test_closed_form_rejects_non_positive_frequency(omega):
    with pytest.raises(InvalidFrequencyError):
        mode_closed_form_dipole(0.0, 1.0, omega, 1.0, 1.0)


def test_momentum_is_conserved_without_noise(lattice, params):
    state0 = SystemState.initial(lattice, p0=(1.0, -0.5, 0.25), alphas=_thermal_like_amplitudes(12))
    trajectory = integrate_dipole(state0, lattice, params, TimeGrid(0.0, 1e-2, 10_000), record_amplitudes=False)
    assert np.max(np.abs(trajectory.momenta - state0.p)) <= 1e-12


def test_integrated_amplitudes_match_closed_form(lattice, params):
    alphas0 = _thermal_like_amplitudes(12)
    state0 = SystemState.initial(lattice, p0=(0.8, 0.3, -0.2), alphas=alphas0)
    grid = TimeGrid(0.0, 1e-3, 10_000)
    trajectory = integrate_dipole(state0, lattice, params, grid)
    couplings = dipole_couplings(state0.p, lattice)
    expected = amplitude_closed_form_dipole(
        alphas0[None, :], couplings[None, :], lattice.omegas[None, :], 1.0, grid.elapsed()[:, None]
    )
    assert np.max(np.abs(trajectory.amplitudes - expected)) <= 1e-8


def test_closed_form_velocity_matches_recorded_velocity(lattice, params):
    alphas0 = _thermal_like_amplitudes(12, seed=11)
    p0 = (0.5, 0.5, 0.0)
    state0 = SystemState.initial(lattice, p0=p0, alphas=alphas0)
    grid = TimeGrid(0.0, 1e-3, 2000)
    trajectory = integrate_dipole(state0, lattice, params, grid)
    for index in (0, 500, 2000):
        closed = velocity_dipole_closed(grid.elapsed()[index], p0, alphas0, lattice, params)
        np.testing.assert_allclose(trajectory.velocities[index], closed, atol=1e-9)


def test_dipole_energy_is_conserved(lattice, params):
    state0 = SystemState.initial(lattice, p0=(1.0, 0.2, 0.0), alphas=_thermal_like_amplitudes(12, seed=5))
    trajectory = integrate_dipole(state0, lattice, params, TimeGrid(0.0, 1e-3, 10_000), record_amplitudes=False)
    drift = np.max(np.abs(trajectory.energies - trajectory.energies[0])) / abs(trajectory.energies[0])
    assert drift <= 1e-6


def test_constant_force_path_accelerates_momentum(lattice, params):
    grid = TimeGrid(0.0, 0.01, 100)
    force = np.tile([0.5, 0.0, -0.25], (grid.n_points, 1))
    state0 = SystemState.initial(lattice, p0=(0.0, 0.0, 0.0))
    trajectory = integrate_dipole(state0, lattice, params, grid, NoisePath(grid, force))
    expected = np.outer(grid.elapsed(), [0.5, 0.0, -0.25])
    np.testing.assert_allclose(trajectory.momenta, expected, atol=1e-12)


def test_noise_grid_must_match(lattice, params):
    state0 = SystemState.initial(lattice)
    noise = NoisePath.zeros(TimeGrid(0.0, 0.01, 10))
    with pytest.raises(GridError):
        integrate_dipole(state0, lattice, params, TimeGrid(0.0, 0.01, 20), noise)


def test_large_step_logs_warning(lattice, params, caplog):
    state0 = SystemState.initial(lattice, p0=(1.0, 0.0, 0.0))
    with caplog.at_level(logging.WARNING, logger="src.trajectory"):
        integrate_dipole(state0, lattice, params, TimeGrid(0.0, 0.5, 4))
    assert "dt*omega_max" in caplog.text


def test_trajectory_states_round_trip(lattice, params):
    state0 = SystemState.initial(lattice, p0=(1.0, 0.0, 0.0), alphas=_thermal_like_amplitudes(12))
    trajectory = integrate_dipole(state0, lattice, params, TimeGrid(0.0, 0.01, 5))
    first = trajectory.state(0)
    np.testing.assert_array_equal(first.alphas, state0.alphas)
    assert len(trajectory.states) == 6


def test_uncoupled_modes_keep_their_photon_number(units):
    neutral = ParticleParams(charge=0.0)
    lattice = build_lattice(2.0 * math.pi, 2, units, neutral)
    alphas0 = _thermal_like_amplitudes(lattice.n_modes, seed=3)
    state0 = SystemState.initial(lattice, p0=(1.0, 0.0, 0.0), alphas=alphas0)
    grid = TimeGrid(0.0, 0.01, 1000)
    trajectory = integrate_dipole(state0, lattice, neutral, grid)
    photons = trajectory.photon_numbers
    assert np.max(np.abs(photons - photons[0])) / photons[0] <= 1e-12
    free = alphas0[None, :] * np.exp(-1j * np.outer(grid.elapsed(), lattice.omegas))
    assert np.max(np.abs(trajectory.amplitudes - free)) <= 1e-12
