"""Dipole-approximation dynamics: memoryless velocity law and closed-form modes.

With e^{ik·x} ≈ 1 the coupling V_{k,r}(p) = v0·(ε_r·p) does not depend on
position, so the momentum is conserved and every mode is a driven oscillator
with a constant drive. Amplitudes follow iħ·dα/dt = ∂H/∂ᾱ:

    dx/dt = p/m + Σ v0·ε_r·(α + ᾱ)
    dp/dt = F_ext
    dα/dt = −iωα − (i/ħ)·V_{k,r}(p)
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import InvalidFrequencyError, StateShapeError
from .models import (
    Approximation,
    ModeLattice,
    ParticleParams,
    SystemState,
    as_vector3,
    dipole_couplings,
    require_consistent,
)
from .trajectory import Arrays, StateDerivative, TimeGrid, Trajectory, integrate_local

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .stochastic import NoisePath

logger = logging.getLogger(__name__)


def _dipole_rates(
    x: np.ndarray,
    p: np.ndarray,
    alphas: np.ndarray,
    lattice: ModeLattice,
    params: ParticleParams,
    force: np.ndarray,
) -> Arrays:
    drive = lattice.couplings * (2.0 * alphas.real)
    dx = p / params.mass + lattice.polarizations.T @ drive
    dp = np.array(force, dtype=float, copy=True)
    dalphas = -1j * lattice.omegas * alphas - (1j / lattice.units.hbar) * dipole_couplings(p, lattice)
    return dx, dp, dalphas


def eom_dipole(
    state: SystemState,
    lattice: ModeLattice,
    params: ParticleParams,
    external_force: Sequence[float] | np.ndarray | None = None,
) -> StateDerivative:
    require_consistent(state, lattice)
    force = np.zeros(3) if external_force is None else as_vector3(external_force, "external_force")
    dx, dp, dalphas = _dipole_rates(state.x, state.p, state.alphas, lattice, params, force)
    return StateDerivative(dx=dx, dp=dp, dalphas=dalphas)


def mode_closed_form_dipole(alpha_bar_0, V, omega, hbar: float, t):
    """ᾱ(t) = ᾱ(0)·e^{−iωt} + (V/ħω)·(1 − e^{−iωt}).

    Works element-wise on arrays. The amplitude evolved by ``eom_dipole`` is
    ``mode_closed_form_dipole(α(0), −V, ω, ħ, t)``; see
    ``amplitude_closed_form_dipole``.
    """

    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise InvalidFrequencyError(f"closed form needs omega > 0, got {omega!r}")
    phase = np.exp(-1j * omega * np.asarray(t, dtype=float))
    result = np.asarray(alpha_bar_0, dtype=complex) * phase + (np.asarray(V) / (hbar * omega)) * (1.0 - phase)
    return complex(result) if result.ndim == 0 else result


def amplitude_closed_form_dipole(alpha0, V, omega, hbar: float, t):
    """Exact solution of dα/dt = −iωα − (i/ħ)V for constant V."""

    return mode_closed_form_dipole(alpha0, -np.asarray(V, dtype=float), omega, hbar, t)


def velocity_dipole_closed(
    t: float,
    p: Sequence[float] | np.ndarray,
    alphas0: Sequence[complex] | np.ndarray,
    lattice: ModeLattice,
    params: ParticleParams,
) -> np.ndarray:
    """dx/dt at elapsed time ``t`` from (p, α(0)) alone; there is no history argument."""

    p = as_vector3(p, "p")
    alphas0 = np.asarray(alphas0, dtype=complex)
    if alphas0.shape != (lattice.n_modes,):
        raise StateShapeError(f"expected {lattice.n_modes} initial amplitudes, got {alphas0.shape}")
    couplings = dipole_couplings(p, lattice)
    alphas = amplitude_closed_form_dipole(alphas0, couplings, lattice.omegas, lattice.units.hbar, t)
    return p / params.mass + lattice.polarizations.T @ (lattice.couplings * 2.0 * np.real(alphas))


def integrate_dipole(
    state0: SystemState,
    lattice: ModeLattice,
    params: ParticleParams,
    grid: TimeGrid,
    noise: "NoisePath | None" = None,
    *,
    record_amplitudes: bool = True,
) -> Trajectory:
    """RK4 integration of ``eom_dipole``; the noise path, if any, enters dp."""

    def rate(t: float, y: Arrays, force: np.ndarray) -> Arrays:
        return _dipole_rates(y[0], y[1], y[2], lattice, params, force)

    return integrate_local(
        rate,
        Approximation.DIPOLE,
        state0,
        lattice,
        params,
        grid,
        noise,
        record_amplitudes=record_amplitudes,
    )


__all__ = [
    "eom_dipole",
    "mode_closed_form_dipole",
    "amplitude_closed_form_dipole",
    "velocity_dipole_closed",
    "integrate_dipole",
]
