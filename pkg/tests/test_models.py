import itertools
import math

import numpy as np
import pytest

from src.errors import DegenerateDirectionError, InvalidConfigError, StateShapeError
from src.models import (
    Approximation,
    ConvolutionMethod,
    Formulation,
    ParticleParams,
    SystemState,
    UnitsConfig,
    build_lattice,
    coupling_v0,
    field_energy,
    hamiltonian,
    interaction_energy,
    polarization_basis,
    quadrupole_couplings,
)


@pytest.mark.parametrize(
    "k",
    [(0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (1.0, 1.0, 0.0), (1.0, -2.0, 3.0), (0.3, 0.3, 0.3)],
)
def test_polarization_basis_is_orthonormal_and_transverse(k):
    eps1, eps2 = polarization_basis(k)
    k_hat = np.asarray(k) / np.linalg.norm(k)
    assert np.linalg.norm(eps1) == pytest.approx(1.0, abs=1e-14)
    assert np.linalg.norm(eps2) == pytest.approx(1.0, abs=1e-14)
    assert abs(eps1 @ eps2) < 1e-14
    assert abs(eps1 @ k_hat) < 1e-14
    assert abs(eps2 @ k_hat) < 1e-14


def test_polarization_basis_for_z_axis():
    eps1, eps2 = polarization_basis((0.0, 0.0, 1.0))
    np.testing.assert_allclose(eps1, [1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(eps2, [0.0, 1.0, 0.0], atol=1e-15)


def test_polarization_basis_rejects_zero_vector():
    with pytest.raises(DegenerateDirectionError):
        polarization_basis((0.0, 0.0, 0.0))


def test_build_lattice_counts_and_orders_modes(lattice):
    assert lattice.n_modes == 12
    keys = [mode.sort_key for mode in lattice.modes]
    assert keys == sorted(keys)
    assert {mode.polarization for mode in lattice.modes} == {1, 2}
    np.testing.assert_allclose(lattice.omegas, 1.0)
    assert lattice.quantization_volume == pytest.approx((2 * math.pi) ** 3)


def test_build_lattice_n_max_two_has_sixty_four_modes():
    lattice = build_lattice(2 * math.pi, 2)
    expected = sum(
        1
        for n in itertools.product(range(-2, 3), repeat=3)
        if 0 < n[0] ** 2 + n[1] ** 2 + n[2] ** 2 <= 4
    )
    assert expected == 32
    assert lattice.n_modes == 2 * expected
    assert lattice.omega_max == pytest.approx(2.0)


@pytest.mark.parametrize("n_max", [0, -1, 1.5, True])
def test_build_lattice_rejects_invalid_n_max(n_max):
    with pytest.raises(InvalidConfigError):
        build_lattice(1.0, n_max)


def test_coupling_amplitude_matches_formula(lattice, params, units):
    expected = -1.0 * math.sqrt(1.0 / (2.0 * (2 * math.pi) ** 3 * 1.0))
    for mode in lattice.modes:
        assert mode.v0 == pytest.approx(expected, rel=1e-14)
        assert coupling_v0(mode, params, lattice, units) == pytest.approx(expected, rel=1e-14)


def test_zero_charge_gives_zero_couplings():
    lattice = build_lattice(2 * math.pi, 1, params=ParticleParams(charge=0.0))
    assert np.all(lattice.couplings == 0.0)


def test_lattice_arrays_are_read_only(lattice):
    with pytest.raises(ValueError):
        lattice.omegas[0] = 2.0


def test_dipole_hamiltonian_single_mode_by_hand(single_mode):
    lattice = single_mode(omega=2.0, v0=-0.5)
    state = SystemState.initial(lattice, (0, 0, 0), (2.0, 0.0, 0.0), [1.0 + 1.0j])
    # p²/2m + ħω|α|² + V·2Re α with V = v0·(ε·p) = −1
    assert hamiltonian(state, lattice, ParticleParams(), Approximation.DIPOLE) == pytest.approx(2.0 + 4.0 - 2.0)


def test_quadrupole_interaction_is_real(lattice):
    rng = np.random.default_rng(3)
    alphas = rng.normal(size=12) + 1j * rng.normal(size=12)
    state = SystemState.initial(lattice, (0.2, -0.4, 0.9), (1.0, 0.5, -0.3), alphas)
    energy = interaction_energy(state, lattice, Approximation.QUADRUPOLE)
    couplings = quadrupole_couplings(state.p, state.x, lattice)
    assert np.all(couplings.real == 0.0)
    expected = float(np.sum(-2.0 * couplings.imag * alphas.imag))
    assert energy == pytest.approx(expected, rel=1e-12)


def test_field_energy_weights_by_frequency(single_mode):
    lattice = single_mode(omega=2.0)
    state = SystemState.initial(lattice, alphas=[1.0])
    assert field_energy(state, lattice) == pytest.approx(2.0)


def test_state_shape_mismatch_is_rejected(lattice):
    with pytest.raises(StateShapeError):
        SystemState.initial(lattice, alphas=np.zeros(3))
    with pytest.raises(StateShapeError):
        SystemState(0.0, (1.0, 2.0), (0.0, 0.0, 0.0), np.zeros(12))


def test_state_rejects_non_finite_values():
    with pytest.raises(StateShapeError):
        SystemState(0.0, (math.nan, 0.0, 0.0), (0.0, 0.0, 0.0), [])


def test_choices_parse_case_insensitively():
    assert Approximation.from_value(" Quadrupole ") is Approximation.QUADRUPOLE
    assert Formulation.from_value("REDUCED") is Formulation.REDUCED
    assert ConvolutionMethod.from_value("naive") is ConvolutionMethod.NAIVE
    with pytest.raises(InvalidConfigError):
        Approximation.from_value("octupole")


def test_units_validate():
    with pytest.raises(InvalidConfigError):
        UnitsConfig(hbar=0.0)
    with pytest.raises(InvalidConfigError):
        ParticleParams(mass=-1.0)
