"""Quadrupole-approximation dynamics in local and reduced (memory) form.

With e^{ik·x} ≈ 1 + ik·x (dipole-order terms dropped) the coupling becomes
V_{k,r}(p, x) = i·v0·(ε_r·p)(k·x), pure imaginary. Writing u = Im V, the
local system derived from iħ·dα/dt = ∂H/∂ᾱ reads

    dx/dt = p/m − 2 Σ v0 (k·x) Im(α) ε_r
    dp/dt = 2 Σ v0 (ε_r·p) Im(α) k + F_ext
    dα/dt = −iωα + (i/ħ)·V_{k,r}(p, x)

Eliminating the modes with α(t) = α(0)e^{−iω(t−t0)} + (i/ħ)∫ e^{−iω(t−s)} V(s) ds
gives Im α(t) = Im(α(0)e^{−iω(t−t0)}) + (1/ħ)∫ sin(ω(t−s)) u(s) ds, i.e. the
reduced particle-only equations: free-amplitude random forces plus sin-kernel
history integrals over the particle's own past.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import HistorySyncError, StateShapeError, TrajectoryDivergedError
from .models import (
    Approximation,
    ConvolutionMethod,
    Mode,
    ModeLattice,
    ParticleParams,
    SystemState,
    as_vector3,
    quadrupole_couplings,
    require_consistent,
)
from .trajectory import (
    Arrays,
    StateDerivative,
    TimeGrid,
    Trajectory,
    TrajectoryRecorder,
    all_finite,
    check_step_size,
    force_schedule,
    integrate_local,
    rk4_step,
)

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .stochastic import NoisePath

logger = logging.getLogger(__name__)

# Relative slack when matching an accumulator's clock against grid times.
_SYNC_TOLERANCE = 1e-9


def coupling_vq(mode: Mode, p: Sequence[float] | np.ndarray, x: Sequence[float] | np.ndarray) -> complex:
    """V_k(p, x) = i·v0·(ε_r·p)(k·x); the real part is exactly zero."""

    p = as_vector3(p, "p")
    x = as_vector3(x, "x")
    value = mode.v0 * float(np.dot(mode.eps, p)) * float(np.dot(mode.k, x))
    return complex(0.0, value)


def conjugate_amplitude_rate(alpha_bar, V, omega, hbar: float):
    """dᾱ/dt = iωᾱ + (i/ħ)V, the conjugate companion of the amplitude equation."""

    return 1j * np.asarray(omega) * np.asarray(alpha_bar) + (1j / hbar) * np.asarray(V)


def _quadrupole_rates(
    x: np.ndarray,
    p: np.ndarray,
    alphas: np.ndarray,
    lattice: ModeLattice,
    params: ParticleParams,
    force: np.ndarray,
) -> Arrays:
    kx = lattice.k_vectors @ x
    ep = lattice.polarizations @ p
    v0 = lattice.couplings
    imag = alphas.imag
    dx = p / params.mass - 2.0 * (lattice.polarizations.T @ (v0 * kx * imag))
    dp = 2.0 * (lattice.k_vectors.T @ (v0 * ep * imag)) + force
    dalphas = -1j * lattice.omegas * alphas + (1j / lattice.units.hbar) * (1j * v0 * ep * kx)
    return dx, dp, dalphas


def eom_quadrupole_local(
    state: SystemState,
    lattice: ModeLattice,
    params: ParticleParams,
    external_force: Sequence[float] | np.ndarray | None = None,
) -> StateDerivative:
    require_consistent(state, lattice)
    force = np.zeros(3) if external_force is None else as_vector3(external_force, "external_force")
    dx, dp, dalphas = _quadrupole_rates(state.x, state.p, state.alphas, lattice, params, force)
    return StateDerivative(dx=dx, dp=dp, dalphas=dalphas)


def integrate_quadrupole_local(
    state0: SystemState,
    lattice: ModeLattice,
    params: ParticleParams,
    grid: TimeGrid,
    noise: "NoisePath | None" = None,
    *,
    record_amplitudes: bool = True,
) -> Trajectory:
    def rate(t: float, y: Arrays, force: np.ndarray) -> Arrays:
        return _quadrupole_rates(y[0], y[1], y[2], lattice, params, force)

    return integrate_local(
        rate,
        Approximation.QUADRUPOLE,
        state0,
        lattice,
        params,
        grid,
        noise,
        record_amplitudes=record_amplitudes,
    )


# -- history convolution ------------------------------------------------------


@dataclass(slots=True)
class HistoryBuffer:
    """Coupling samples V_{k,r}(p(s), x(s)) on the grid, one row per completed step."""

    grid: TimeGrid
    samples: np.ndarray
    count: int = 0

    @classmethod
    def allocate(cls, grid: TimeGrid, n_modes: int) -> "HistoryBuffer":
        return cls(grid, np.zeros((grid.n_points, n_modes), dtype=complex))

    def append(self, values: np.ndarray) -> None:
        if self.count >= self.grid.n_points:
            raise HistorySyncError("history buffer is full")
        self.samples[self.count] = values
        self.count += 1

    @property
    def filled(self) -> np.ndarray:
        return self.samples[: self.count]

    @property
    def last_time(self) -> float:
        return self.grid.time(self.count - 1)


class ConvolutionAccumulator:
    """Running A(t) = ∫ e^{−iωs} f(s) ds per mode, one trapezoid panel per update.

    Real and imaginary parts of the signal keep separate integrals so that
    ∫ sin(ω(t−s)) f(s) ds = Im[e^{iωt}A_re(t)] + i·Im[e^{iωt}A_im(t)] holds for
    complex signals.
    """

    def __init__(self, omegas: Sequence[float] | np.ndarray) -> None:
        self.omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        self.reset()

    def reset(self) -> None:
        shape = self.omegas.shape
        self.integral_re = np.zeros(shape, dtype=complex)
        self.integral_im = np.zeros(shape, dtype=complex)
        self._last_re = np.zeros(shape, dtype=complex)
        self._last_im = np.zeros(shape, dtype=complex)
        self.last_time: float | None = None
        self.count = 0

    def _weighted(self, t: float, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        phase = np.exp(-1j * self.omegas * t)
        return phase * values.real, phase * values.imag

    def update(self, t: float, values) -> None:
        values = np.broadcast_to(np.asarray(values, dtype=complex), self.omegas.shape)
        weighted_re, weighted_im = self._weighted(t, values)
        if self.last_time is not None:
            step = t - self.last_time
            if not step > 0:
                raise HistorySyncError(f"accumulator fed out of order: t={t} after {self.last_time}")
            self.integral_re = self.integral_re + 0.5 * step * (self._last_re + weighted_re)
            self.integral_im = self.integral_im + 0.5 * step * (self._last_im + weighted_im)
        self._last_re, self._last_im = weighted_re, weighted_im
        self.last_time = t
        self.count += 1

    def _extended(self, t: float, values) -> tuple[np.ndarray, np.ndarray]:
        if self.last_time is None:
            raise HistorySyncError("accumulator has no samples")
        step = t - self.last_time
        if step < 0:
            raise HistorySyncError(f"cannot evaluate at t={t} before the last sample {self.last_time}")
        if step == 0 or values is None:
            return self.integral_re, self.integral_im
        values = np.broadcast_to(np.asarray(values, dtype=complex), self.omegas.shape)
        weighted_re, weighted_im = self._weighted(t, values)
        return (
            self.integral_re + 0.5 * step * (self._last_re + weighted_re),
            self.integral_im + 0.5 * step * (self._last_im + weighted_im),
        )

    def sine_convolution(self, t: float, values=None) -> np.ndarray:
        """∫ sin(ω(t−s)) f(s) ds up to ``t``; ``values`` closes a partial last panel."""

        integral_re, integral_im = self._extended(t, values)
        rotation = np.exp(1j * self.omegas * t)
        return (rotation * integral_re).imag + 1j * (rotation * integral_im).imag

    def oscillator_integral(self, t: float, values=None) -> np.ndarray:
        """∫ e^{−iω(t−s)} f(s) ds up to ``t``."""

        integral_re, integral_im = self._extended(t, values)
        return np.exp(-1j * self.omegas * t) * (np.conj(integral_re) + 1j * np.conj(integral_im))


def _trapezoid_weights(count: int, dt: float) -> np.ndarray:
    weights = np.full(count, dt)
    if count:
        weights[0] = weights[-1] = 0.5 * dt
    if count == 1:
        weights[0] = 0.0
    return weights


def _naive_sine_convolution(times: np.ndarray, samples: np.ndarray, omegas: np.ndarray, dt: float, t: float) -> np.ndarray:
    weights = _trapezoid_weights(times.size, dt)
    kernel = weights[:, None] * np.sin(np.multiply.outer(t - times, omegas))
    return np.sum(kernel * samples.real, axis=0) + 1j * np.sum(kernel * samples.imag, axis=0)


def memory_convolution(
    samples: Sequence[complex] | np.ndarray,
    omega,
    method: ConvolutionMethod,
    grid: TimeGrid,
    accumulator: ConvolutionAccumulator | None = None,
):
    """∫ sin(ω(t−s))·f(s) ds from ``grid.t0`` to the time of the last sample.

    ``samples`` holds f on the grid prefix, shape (n,) or (n, modes) with one
    ω per mode. Naive re-sums the whole history (O(n) per call); Incremental
    adds at most one trapezoid panel to ``accumulator`` (O(1) per call), which
    must already hold every earlier sample.
    """

    method = ConvolutionMethod.from_value(method)
    values = np.asarray(samples)
    if values.shape[0] < 1:
        raise HistorySyncError("memory convolution needs at least one sample")
    if values.shape[0] > grid.n_points:
        raise HistorySyncError("more samples than grid points")
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    scalar = np.ndim(omega) == 0 and values.ndim == 1
    t = grid.time(values.shape[0] - 1)

    if method is ConvolutionMethod.NAIVE:
        times = grid.t0 + np.arange(values.shape[0]) * grid.dt
        if values.ndim == 1:
            result = _naive_sine_convolution(times, values.astype(complex)[:, None], omegas, grid.dt, t)
        else:
            result = _naive_sine_convolution(times, values.astype(complex), omegas, grid.dt, t)
        return complex(result[0]) if scalar else result

    count = values.shape[0]
    if accumulator is None:
        accumulator = ConvolutionAccumulator(omegas)
        for index in range(count - 1):
            accumulator.update(grid.time(index), values[index])
    if accumulator.count == count - 1:
        accumulator.update(t, values[-1])
    elif accumulator.count != count:
        raise HistorySyncError(
            f"accumulator holds {accumulator.count} samples but the signal has {count}"
        )
    if accumulator.last_time is None or abs(accumulator.last_time - t) > _SYNC_TOLERANCE * max(1.0, abs(t)):
        raise HistorySyncError(f"accumulator clock {accumulator.last_time} does not match grid time {t}")
    result = accumulator.sine_convolution(t)
    return complex(result[0]) if scalar else result


class HistoryConvolver:
    """Per-trajectory history of V samples plus the chosen evaluation strategy."""

    def __init__(self, omegas: np.ndarray, grid: TimeGrid, method: ConvolutionMethod) -> None:
        self.omegas = np.asarray(omegas, dtype=float)
        self.grid = grid
        self.method = ConvolutionMethod.from_value(method)
        self.buffer = HistoryBuffer.allocate(grid, self.omegas.size)
        self.accumulator = ConvolutionAccumulator(self.omegas) if self.method is ConvolutionMethod.INCREMENTAL else None

    def push(self, values: np.ndarray) -> None:
        t = self.grid.time(self.buffer.count)
        self.buffer.append(values)
        if self.accumulator is not None:
            self.accumulator.update(t, values)

    def _history_times(self) -> np.ndarray:
        return self.grid.t0 + np.arange(self.buffer.count) * self.grid.dt

    def evaluate(self, t: float, values: np.ndarray) -> np.ndarray:
        """Sine convolution at stage time ``t`` ≥ last sample, closing the panel with ``values``."""

        if self.buffer.count == 0:
            raise HistorySyncError("no history samples pushed yet")
        if self.accumulator is not None:
            return self.accumulator.sine_convolution(t, values)

        times = self._history_times()
        history = self.buffer.filled
        result = _naive_sine_convolution(times, history, self.omegas, self.grid.dt, t)
        step = t - times[-1]
        if step > 0:
            # Partial panel [t_last, t]; sin(0) kills the stage endpoint.
            edge = 0.5 * step * np.sin(self.omegas * step)
            result = result + edge * history[-1].real + 1j * edge * history[-1].imag
        return result

    def oscillator_integral(self) -> np.ndarray:
        """∫ e^{−iω(t−s)} V(s) ds at the last pushed time."""

        if self.accumulator is not None:
            return self.accumulator.oscillator_integral(self.accumulator.last_time)
        times = self._history_times()
        weights = _trapezoid_weights(times.size, self.grid.dt)
        phases = np.exp(-1j * np.multiply.outer(times[-1] - times, self.omegas))
        return np.sum(weights[:, None] * phases * self.buffer.filled, axis=0)


# -- reduced formulation ------------------------------------------------------


@dataclass(slots=True, frozen=True, eq=False)
class RandomForceRealization:
    """Initial-condition forces entering dx (``F_q``) and dp (``F_p``) at time ``t``."""

    F_q: np.ndarray
    F_p: np.ndarray
    t: float


def _free_amplitudes(alphas0: np.ndarray, lattice: ModeLattice, elapsed: float) -> np.ndarray:
    return alphas0 * np.exp(-1j * lattice.omegas * elapsed)


def _random_force_arrays(
    elapsed: float, x: np.ndarray, p: np.ndarray, alphas0: np.ndarray, lattice: ModeLattice
) -> tuple[np.ndarray, np.ndarray]:
    free = _free_amplitudes(alphas0, lattice, elapsed)
    bracket = free - np.conj(free)
    v0 = lattice.couplings
    coefficient_q = 1j * v0 * (lattice.k_vectors @ x) * bracket
    coefficient_p = -1j * v0 * (lattice.polarizations @ p) * bracket
    force_q = lattice.polarizations.T @ coefficient_q
    force_p = lattice.k_vectors.T @ coefficient_p
    return force_q.real, force_p.real


def random_forces(
    t: float,
    x: Sequence[float] | np.ndarray,
    p: Sequence[float] | np.ndarray,
    alphas0: Sequence[complex] | np.ndarray,
    lattice: ModeLattice,
    *,
    t0: float = 0.0,
) -> RandomForceRealization:
    """F̃_q, F̃_p built from the freely evolved initial amplitudes α(0)e^{−iω(t−t0)}."""

    alphas0 = np.asarray(alphas0, dtype=complex)
    if alphas0.shape != (lattice.n_modes,):
        raise StateShapeError(f"expected {lattice.n_modes} initial amplitudes, got {alphas0.shape}")
    force_q, force_p = _random_force_arrays(t - t0, as_vector3(x, "x"), as_vector3(p, "p"), alphas0, lattice)
    return RandomForceRealization(F_q=force_q, F_p=force_p, t=float(t))


def memory_force(
    sine_terms: np.ndarray, x: np.ndarray, p: np.ndarray, lattice: ModeLattice
) -> tuple[np.ndarray, np.ndarray]:
    """History contributions to (dx, dp) given S_k = ∫ sin(ω(t−s)) u(s) ds per mode."""

    scale = 2.0 / lattice.units.hbar
    v0 = lattice.couplings
    memory_q = -scale * (lattice.polarizations.T @ (v0 * (lattice.k_vectors @ x) * sine_terms))
    memory_p = scale * (lattice.k_vectors.T @ (v0 * (lattice.polarizations @ p) * sine_terms))
    return memory_q, memory_p


def integrate_quadrupole_reduced(
    x0: Sequence[float] | np.ndarray,
    p0: Sequence[float] | np.ndarray,
    alphas0: Sequence[complex] | np.ndarray,
    lattice: ModeLattice,
    params: ParticleParams,
    grid: TimeGrid,
    method: ConvolutionMethod = ConvolutionMethod.INCREMENTAL,
    noise: "NoisePath | None" = None,
    *,
    record_amplitudes: bool = True,
) -> Trajectory:
    """Integrate the particle-only memory equations.

    The modes never enter the state vector: their influence is the random
    force from α(0) plus the history integral of V(p(s), x(s)). Amplitudes are
    reconstructed on the grid only to record energy and photon number.
    """

    x0 = as_vector3(x0, "x0")
    p0 = as_vector3(p0, "p0")
    alphas0 = np.asarray(alphas0, dtype=complex)
    if alphas0.shape != (lattice.n_modes,):
        raise StateShapeError(f"expected {lattice.n_modes} initial amplitudes, got {alphas0.shape}")
    check_step_size(grid, lattice)
    forces = force_schedule(noise, grid)
    zero_force = np.zeros(3)
    hbar = lattice.units.hbar
    convolver = HistoryConvolver(lattice.omegas, grid, method)

    def rate(t: float, y: Arrays, force: np.ndarray) -> Arrays:
        x, p = y
        couplings = quadrupole_couplings(p, x, lattice)
        sine_terms = convolver.evaluate(t, couplings).imag
        force_q, force_p = _random_force_arrays(t - grid.t0, x, p, alphas0, lattice)
        memory_q, memory_p = memory_force(sine_terms, x, p, lattice)
        return p / params.mass + force_q + memory_q, force_p + memory_p + force

    recorder = TrajectoryRecorder(
        grid, lattice, params, Approximation.QUADRUPOLE, record_amplitudes=record_amplitudes
    )
    y: Arrays = (x0.copy(), p0.copy())
    convolver.push(quadrupole_couplings(p0, x0, lattice))

    for index in range(grid.n_points):
        t = grid.time(index)
        force = zero_force if forces is None else forces[index]
        alphas = _free_amplitudes(alphas0, lattice, t - grid.t0) + (1j / hbar) * convolver.oscillator_integral()
        velocity = rate(t, y, force)[0]
        recorder.record(index, y[0], y[1], alphas, velocity)
        if index == grid.n_steps:
            break
        y = rk4_step(rate, t, y, grid.dt, force)
        if not all_finite(y):
            logger.warning("Reduced integration diverged at step %s", index + 1)
            raise TrajectoryDivergedError(index + 1)
        convolver.push(quadrupole_couplings(y[1], y[0], lattice))

    return recorder.finish()


__all__ = [
    "coupling_vq",
    "conjugate_amplitude_rate",
    "eom_quadrupole_local",
    "integrate_quadrupole_local",
    "HistoryBuffer",
    "ConvolutionAccumulator",
    "HistoryConvolver",
    "memory_convolution",
    "RandomForceRealization",
    "random_forces",
    "memory_force",
    "integrate_quadrupole_reduced",
]
