import json
import os

import numpy as np
import pytest

from src import ensemble
from src.config import LatticeConfig, SimConfig
from src.ensemble import (
    THREADS_ENV,
    draw_inputs,
    growth_exponent,
    integrate_config,
    resolve_workers,
    run_ensemble,
    summarize,
)
from src.errors import EnsembleDivergedError, InvalidConfigError, TrajectoryDivergedError
from src.models import Approximation, ParticleParams
from src.observables import TimeSeries, msd_direct
from src.stochastic import InitialModeDist, InitialModeKind, NoiseConfig
from src.trajectory import TimeGrid


def _config(**overrides):
    values = dict(
        grid=TimeGrid(0.0, 0.01, 40),
        initial_dist=InitialModeDist(InitialModeKind.THERMAL, temperature=1.0),
        n_trajectories=8,
        master_seed=2024,
    )
    values.update(overrides)
    return SimConfig(**values)


def test_single_trajectory_ensemble_matches_direct_integration():
    config = _config(n_trajectories=1)
    result = run_ensemble(config, workers=1)
    lattice = config.build_lattice()
    alphas0, noise = draw_inputs(config, lattice, 0)
    trajectory = integrate_config(config, lattice, alphas0, noise)
    np.testing.assert_array_equal(result.series["msd_direct"].values, msd_direct([trajectory]).values)
    np.testing.assert_array_equal(result.series["msd_direct"].stderr, 0.0)
    assert result.n_completed == 1


def test_results_do_not_depend_on_workers_or_order():
    config = _config(noise=NoiseConfig(sigma=0.5, tau_c=0.2, enabled=True))
    serial = run_ensemble(config, workers=1)
    threaded = run_ensemble(config, workers=4)
    shuffled = run_ensemble(config, workers=3, execution_order=[5, 2, 7, 0, 1, 6, 3, 4])
    assert serial.canonical_json() == threaded.canonical_json() == shuffled.canonical_json()
    payload = json.loads(serial.canonical_json())
    assert "wall_seconds" not in payload
    assert set(payload["series"]) == {"msd_direct", "msd_vacf", "vacf", "energy", "photon_number", "photon_count"}


def test_execution_order_must_be_a_permutation():
    with pytest.raises(InvalidConfigError):
        run_ensemble(_config(n_trajectories=3), execution_order=[0, 0, 1])


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_workers() == 3
    monkeypatch.setenv(THREADS_ENV, "0")
    assert resolve_workers() == (os.cpu_count() or 1)
    monkeypatch.delenv(THREADS_ENV)
    assert resolve_workers() == (os.cpu_count() or 1)
    assert resolve_workers(2) == 2
    for bad in ("many", "-1"):
        monkeypatch.setenv(THREADS_ENV, bad)
        with pytest.raises(InvalidConfigError):
            resolve_workers()


def test_standard_error_shrinks_with_ensemble_size():
    base = dict(
        particle=ParticleParams(charge=0.0),
        lattice=LatticeConfig(max_modes=2),
        grid=TimeGrid(0.0, 0.05, 20),
        noise=NoiseConfig(sigma=1.0, tau_c=0.5, enabled=True),
        initial_dist=InitialModeDist(InitialModeKind.VACUUM),
        p0=(0.0, 0.0, 0.0),
        master_seed=11,
    )
    small = run_ensemble(SimConfig(n_trajectories=1000, **base), workers=1)
    large = run_ensemble(SimConfig(n_trajectories=4000, **base), workers=1)
    ratio = small.series["msd_direct"].stderr[-1] / large.series["msd_direct"].stderr[-1]
    assert ratio == pytest.approx(2.0, rel=0.2)


def test_direct_msd_agrees_with_velocity_correlation_integral():
    config = _config(
        approx=Approximation.QUADRUPOLE,
        grid=TimeGrid(0.0, 0.01, 200),
        n_trajectories=1000,
        p0=(1.0, 0.3, -0.2),
    )
    result = run_ensemble(config)
    direct = result.series["msd_direct"]
    via_vacf = result.series["msd_vacf"]
    assert direct.values[0] == via_vacf.values[0] == 0.0
    combined = np.hypot(direct.stderr, via_vacf.stderr)[1:]
    assert np.all(combined > 0)
    assert np.max(np.abs(direct.values[1:] - via_vacf.values[1:]) / combined) <= 3.0


def test_free_particle_is_ballistic():
    config = _config(particle=ParticleParams(charge=0.0), grid=TimeGrid(0.0, 0.05, 200), n_trajectories=3)
    result = run_ensemble(config, workers=1)
    summary = summarize(result)
    assert summary.exponent == pytest.approx(2.0, abs=0.01)
    np.testing.assert_allclose(result.series["msd_direct"].values, config.grid.elapsed() ** 2, rtol=1e-9, atol=1e-12)
    photons = result.series["photon_number"].values
    assert np.max(np.abs(photons - photons[0])) / photons[0] <= 1e-12
    assert summary.memory_metric == 0.0


def test_growth_exponent_is_undefined_for_stationary_particle():
    grid = TimeGrid(0.0, 0.1, 50)
    assert growth_exponent(TimeSeries(grid, np.zeros(grid.n_points))) is None
    assert growth_exponent(TimeSeries(grid, grid.elapsed() ** 1.5)) == pytest.approx(1.5)


def test_memory_metric_reflects_approximation():
    dipole = run_ensemble(_config(n_trajectories=1, grid=TimeGrid(0.0, 0.01, 5)), workers=1)
    assert dipole.memory_metric == 0.0
    quadrupole = run_ensemble(
        _config(
            approx=Approximation.QUADRUPOLE,
            particle=ParticleParams(coupling_scale=0.1),
            n_trajectories=1,
            grid=TimeGrid(0.0, 0.01, 5),
        ),
        workers=1,
    )
    assert quadrupole.memory_metric > 0.1


def _fail_for(indices, monkeypatch):
    original = ensemble.integrate_config
    seen = iter(range(10_000))

    def flaky(config, lattice, alphas0, noise=None, **kwargs):
        if next(seen) in indices:
            raise TrajectoryDivergedError(3)
        return original(config, lattice, alphas0, noise, **kwargs)

    monkeypatch.setattr(ensemble, "integrate_config", flaky)


def test_tolerated_divergences_are_reported(monkeypatch):
    _fail_for({3, 7}, monkeypatch)
    result = run_ensemble(_config(n_trajectories=20, grid=TimeGrid(0.0, 0.01, 5)), workers=1)
    assert result.diverged == (3, 7)
    assert result.n_completed == 18
    assert summarize(result).n_diverged == 2


def test_too_many_divergences_fail_the_run(monkeypatch):
    _fail_for({1, 2, 3}, monkeypatch)
    with pytest.raises(EnsembleDivergedError) as excinfo:
        run_ensemble(_config(n_trajectories=20, grid=TimeGrid(0.0, 0.01, 5)), workers=1)
    assert excinfo.value.indices == [1, 2, 3]
    assert excinfo.value.exit_code == 3


def test_dipole_ensemble_energy_is_conserved():
    config = _config(grid=TimeGrid(0.0, 1e-3, 1000), n_trajectories=4)
    summary = summarize(run_ensemble(config, workers=1))
    assert summary.energy_drift <= 1e-6
    assert summary.n_completed == 4
