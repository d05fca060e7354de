"""
Tests for the stochastic field simulator
"""

import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from pcopo.errors import CommensurabilityError, ConfigError, DivergenceError, ParameterError
from pcopo.models.params import ModelParams, Scheme, SimConfig
from pcopo.physics import correlations, langevin, model_core

from .conftest import at_relative_pump


@pytest.mark.unit
class TestGrid:
    def test_commensurate_grid(self, small_grid):
        grid = langevin.check_commensurate(ModelParams(E=0.5), small_grid)
        assert (grid.index_kc, grid.index_kp) == (2, 4)
        assert grid.dk == pytest.approx(ModelParams().kc / 2)
        assert grid.index_of(-2) == 62

    def test_box_off_the_wavenumber_grid(self):
        with pytest.raises(CommensurabilityError):
            langevin.check_commensurate(ModelParams(E=0.5), SimConfig(box_length=10.0))

    def test_crystal_off_the_wavenumber_grid(self):
        with pytest.raises(CommensurabilityError, match="grid spacing"):
            langevin.check_commensurate(ModelParams(E=0.5, kp=1.5), SimConfig())

    def test_critical_wavenumber_beyond_nyquist(self):
        with pytest.raises(CommensurabilityError):
            langevin.check_commensurate(ModelParams(E=0.5), SimConfig(grid_points=4, box_wavelengths=2))

    def test_grid_points_power_of_two(self):
        with pytest.raises(ValueError):
            SimConfig(grid_points=100)

    def test_time_step_too_large(self):
        with pytest.raises(ParameterError) as excinfo:
            langevin.Integrator(ModelParams(E=0.5), SimConfig(dt=0.01))
        assert excinfo.value.field == "dt"


@pytest.mark.unit
class TestNoise:
    @pytest.mark.parametrize("alpha0", [0.0, 0.5, 1.2 - 0.4j, 1.99])
    def test_diffusion_moments(self, alpha0):
        c1, c2 = langevin.noise_coefficients(np.array([alpha0], dtype=complex))
        assert (abs(c1) ** 2 + abs(c2) ** 2)[0] == pytest.approx(2.0)
        assert (2 * c1 * c2)[0] == pytest.approx(-alpha0)

    def test_strong_pump_is_clipped(self):
        c1, c2 = langevin.noise_coefficients(np.array([3.0 + 0j]))
        assert (2 * c1 * c2)[0] == pytest.approx(-2.0)
        assert np.all(np.isfinite(c1))

    def test_noise_needs_a_generator(self, small_grid):
        params = ModelParams(E=0.5)
        integrator = langevin.Integrator(params, small_grid)
        with pytest.raises(ParameterError):
            integrator.step(langevin.initial_state(params, integrator.grid))


@pytest.mark.unit
class TestObservables:
    def test_parseval(self, small_grid):
        grid = langevin.check_commensurate(ModelParams(), small_grid)
        alpha = np.random.default_rng(5).standard_normal(grid.points) + 0j
        b = langevin.mode_amplitudes(alpha, grid)
        assert np.sum(np.abs(b) ** 2) == pytest.approx(grid.dx * np.sum(np.abs(alpha) ** 2))

    def test_pattern_phase(self, small_grid):
        params = ModelParams()
        grid = langevin.check_commensurate(params, small_grid)
        alpha1 = np.cos(params.kc * grid.x + 0.3) + 0j
        state = langevin.FieldState(np.zeros(grid.points, dtype=complex), alpha1)
        assert langevin.pattern_phase(state, grid) == pytest.approx(0.3)

    def test_circular_variance(self):
        assert langevin.circular_variance([0.4, 0.4, 0.4 + math.pi]) == pytest.approx(0.0, abs=1e-12)
        spread = np.linspace(0, math.pi, 400, endpoint=False)
        assert langevin.circular_variance(spread) == pytest.approx(1.0, abs=1e-9)
        assert math.isnan(langevin.circular_variance([]))

    def test_ordering_correction(self):
        samples = np.array([3e-3, 2e-3, 1e-3j, 5e-4, -5e-4, 0], dtype=complex)
        moments = langevin.normal_ordered_moments(samples, vacuum_level=1e-3, noise_strength=1e-3)
        assert moments.n_plus == pytest.approx(2.0)
        assert moments.n_minus == pytest.approx(1.0)
        assert moments.anom_cross == pytest.approx(1j)
        assert moments.anom_plus == pytest.approx(0.5)
        with pytest.raises(ParameterError):
            langevin.normal_ordered_moments(samples, 1e-3, 0.0)


@pytest.mark.unit
class TestIntegration:
    def test_noiseless_pump_relaxes_to_harmonics(self, small_grid):
        params = ModelParams(E=0.5, M0=0.5)
        config = small_grid.model_copy(update={"noise_strength": 0.0})
        integrator = langevin.Integrator(params, config)
        grid = integrator.grid
        state = langevin.initial_state(params, grid, pump="homogeneous")
        for _ in range(25000):
            state = integrator.step(state)
        expected = model_core.pump_harmonics(params, n_max=7)[6:9]
        measured = langevin.harmonic_amplitudes(state.alpha0, grid, [-1, 0, 1])
        assert_allclose(measured, expected, atol=1e-4)
        assert np.max(np.abs(state.alpha1)) == 0.0

    def test_steady_initial_pump(self, small_grid):
        params = ModelParams(E=0.5, M0=0.5)
        grid = langevin.check_commensurate(params, small_grid)
        state = langevin.initial_state(params, grid)
        expected = model_core.pump_harmonics(params, n_max=7)
        assert_allclose(langevin.harmonic_amplitudes(state.alpha0, grid, list(range(-7, 8))), expected, atol=1e-12)
        with pytest.raises(ParameterError):
            langevin.initial_state(params, grid, pump="random")

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_ensemble_is_reproducible(self, small_grid, scheme):
        params = ModelParams(E=0.5, M0=0.5, M1=0.5)
        config = small_grid.model_copy(update={"scheme": scheme})
        first = langevin.run_ensemble(params, config)
        second = langevin.run_ensemble(params, config, workers=2)
        assert_array_equal(first.far_field_signal, second.far_field_signal)
        assert_array_equal(first.moment_samples, second.moment_samples)
        assert first.samples_per_trajectory == 4
        assert first.n_trajectories == 2

    def test_seed_changes_trajectories(self, small_grid):
        params = ModelParams(E=0.5)
        first = langevin.run_ensemble(params, small_grid)
        other = langevin.run_ensemble(params, small_grid.model_copy(update={"seed": 4}))
        assert not np.array_equal(first.far_field_signal, other.far_field_signal)

    def test_vacuum_calibration(self, small_grid):
        config = small_grid.model_copy(update={"t_transient": 2.0, "t_measure": 20.0})
        stats = langevin.run_ensemble(ModelParams(E=0.0), config)
        assert np.mean(stats.far_field_signal) == pytest.approx(1e-3, rel=0.1)
        assert np.mean(stats.far_field_pump) == pytest.approx(1e-3, rel=0.1)

    def test_divergence_is_reported(self, small_grid):
        config = small_grid.model_copy(update={"divergence_limit": 0.1})
        rng = langevin.trajectory_rngs(0, 1)[0]
        with pytest.raises(DivergenceError) as excinfo:
            langevin.run_trajectory(ModelParams(E=0.5), config, 0, rng)
        assert excinfo.value.trajectory == 0

    def test_no_samples(self, small_grid):
        config = small_grid.model_copy(update={"t_measure": 0.1})
        with pytest.raises(ParameterError):
            langevin.run_ensemble(ModelParams(E=0.5), config)

    def test_near_field_record(self, small_grid):
        params = ModelParams(E=0.5, M1=0.5)
        record = langevin.near_field_record(params, small_grid)
        assert record.values.shape == (20, 64)
        assert record.t[0] == pytest.approx(1.1)
        spread = record.phase_spread(windows=2)
        assert spread.shape == (2,)
        assert np.all((spread > -1e-12) & (spread < 1 + 1e-12))

    def test_variance_map_shapes(self, small_grid):
        params = ModelParams(E=0.5)
        stats = langevin.run_ensemble(params, small_grid)
        theta, phi = correlations.angle_grid(5, 7)
        vmap = langevin.intracavity_variance_map(params, small_grid, theta, phi, stats=stats, control=1e-3)
        assert vmap.values.shape == (5, 7)
        assert vmap.has_error_bars


@pytest.mark.unit
class TestCheckpoint:
    def test_round_trip(self, tmp_path, small_grid):
        params = ModelParams(E=0.5, M0=0.5)
        stats = langevin.run_ensemble(params, small_grid)
        grid = langevin.check_commensurate(params, small_grid)
        path = tmp_path / "state.npz"
        stats.final_states[0].save(str(path), grid.length, small_grid.seed, stats.rng_states[0])

        state, header = langevin.FieldState.load(str(path))
        assert_array_equal(state.alpha0, stats.final_states[0].alpha0)
        assert_array_equal(state.alpha1, stats.final_states[0].alpha1)
        assert state.t == pytest.approx(3.0)
        assert header["grid_points"] == 64
        assert header["seed"] == small_grid.seed
        assert header["rng_state"] == stats.rng_states[0]

    def test_resume_continues_time(self, small_grid):
        params = ModelParams(E=0.5)
        stats = langevin.run_ensemble(params, small_grid)
        resumed = langevin.run_ensemble(params, small_grid, initial=stats.final_states[0])
        assert resumed.final_states[0].t == pytest.approx(6.0)
        assert stats.final_states[0].t == pytest.approx(3.0)

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "other.npz"
        np.savez(path, alpha0=np.zeros(4), alpha1=np.zeros(4), header=np.array(json.dumps({"format": "other"})))
        with pytest.raises(ConfigError):
            langevin.FieldState.load(str(path))


@pytest.mark.slow
class TestPhysics:
    def test_pump_relaxation_converges_with_dt(self):
        params = ModelParams(E=0.5, M0=0.5)
        config = SimConfig(grid_points=64, box_wavelengths=2, dt=1e-4, noise_strength=0.0)
        integrator = langevin.Integrator(params, config)
        state = langevin.initial_state(params, integrator.grid, pump="homogeneous")
        for _ in range(250000):
            state = integrator.step(state)
        expected = model_core.pump_harmonics(params, n_max=7)[5:10]
        measured = langevin.harmonic_amplitudes(state.alpha0, integrator.grid, [-2, -1, 0, 1, 2])
        assert_allclose(measured, expected, atol=1e-6)

    def test_far_field_peaks_at_critical_wavenumber(self):
        params = at_relative_pump(0.0, 0.0, 0.999)
        config = SimConfig(t_transient=50.0, t_measure=100.0, n_trajectories=4, seed=1)
        stats = langevin.run_ensemble(params, config, workers=4)
        k, _, signal = stats.shifted()
        peak = abs(k[int(np.argmax(signal))])
        assert peak == pytest.approx(params.kc, abs=langevin.check_commensurate(params, config).dk / 2)

    def test_pump_shows_crystal_harmonics(self):
        params = at_relative_pump(0.5, 0.0, 0.95)
        config = SimConfig(t_transient=20.0, t_measure=40.0, n_trajectories=2, seed=2)
        stats = langevin.run_ensemble(params, config)
        grid = langevin.check_commensurate(params, config)
        pump = stats.far_field_pump
        background = np.median(pump)
        assert pump[grid.index_of(grid.index_kp)] > 100 * background
        assert pump[grid.index_of(-grid.index_kp)] > 100 * background

    def test_stochastic_variance_matches_linear_theory(self):
        params = at_relative_pump(0.0, 0.0, 0.95)
        config = SimConfig(grid_points=64, box_wavelengths=2, t_transient=30.0, t_measure=400.0,
                           n_trajectories=40, seed=7)
        theta, phi = correlations.angle_grid(13, 13)
        vmap = langevin.intracavity_variance_map(params, config, theta, phi, workers=4)
        analytic = correlations.variance_from_moments(
            correlations.second_moments(params, "intracavity"), theta[:, None], phi[None, :])
        assert np.all(np.abs(vmap.values - analytic) <= 4 * vmap.standard_error + 0.05 * analytic)
