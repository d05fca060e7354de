"""
Tests for the linear-response core
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from pydantic import ValidationError

from pcopo.errors import ParameterError, SingularMatrixError
from pcopo.models.params import ModelParams
from pcopo.physics import correlations, model_core

from .conftest import REFERENCE_CONFIGS, at_relative_pump, below_threshold_params


@pytest.mark.unit
class TestParams:
    def test_kp_defaults_to_twice_kc(self):
        params = ModelParams(delta1=-1.0)
        assert params.kc == pytest.approx(np.sqrt(0.5))
        assert params.kp == pytest.approx(np.sqrt(2.0))
        assert params.is_resonant

    def test_positive_delta1_needs_explicit_kp(self):
        with pytest.raises(ValidationError):
            ModelParams(delta1=1.0)

    def test_negative_pump_rejected(self):
        with pytest.raises(ValidationError):
            ModelParams(E=-0.1)

    def test_off_resonance_refused_by_closed_forms(self):
        params = ModelParams(E=0.5, kp=1.0)
        assert not params.is_resonant
        with pytest.raises(ParameterError) as excinfo:
            model_core.coupling_constants(params)
        assert excinfo.value.field == "kp"

    def test_detuning_profile(self):
        params = ModelParams(M0=0.3, M1=0.5, delta0=0.1)
        x = np.array([0.0, np.pi / (2 * params.kp)])
        assert_allclose(model_core.detuning_profile(params, x), [-1.0, -0.5])
        assert_allclose(model_core.detuning_profile(params, x, "pump"), [0.1, 0.4])
        with pytest.raises(ParameterError):
            model_core.detuning_profile(params, x, "idler")


@pytest.mark.unit
class TestPump:
    def test_homogeneous_pump(self):
        pump = model_core.pump_steady_state(ModelParams(E=0.7, delta0=0.2))
        assert pump.a0_0 == pytest.approx(0.7 / (1 + 0.2j))
        assert pump.a0_plus == 0
        assert pump.a0_minus == 0

    def test_three_harmonic_solve_matches_truncated_form(self):
        params = ModelParams(E=0.9, M0=0.5, delta0=0.1)
        pump = model_core.pump_steady_state(params)
        harmonics = model_core.pump_harmonics(params, n_max=1)
        assert_allclose(harmonics, [pump.a0_minus, pump.a0_0, pump.a0_plus], rtol=1e-12, atol=1e-15)

    def test_second_harmonic_is_small(self):
        params = ModelParams(E=0.9, M0=0.5)
        harmonics = model_core.pump_harmonics(params, n_max=8)
        n_max = 8
        assert abs(harmonics[n_max + 2]) < 0.1 * abs(harmonics[n_max + 1])
        # odd symmetry A(-n k_p) = (-1)^n A(n k_p)
        assert_allclose(harmonics[n_max - 1], -harmonics[n_max + 1], rtol=1e-12)
        assert_allclose(harmonics[n_max - 2], harmonics[n_max + 2], rtol=1e-12)

    def test_truncation_close_to_untruncated(self):
        params = ModelParams(E=0.9, M0=0.5)
        pump = model_core.pump_steady_state(params)
        harmonics = model_core.pump_harmonics(params, n_max=8)
        assert abs(harmonics[8] - pump.a0_0) < 1e-2 * abs(pump.a0_0)

    def test_invalid_harmonic_count(self):
        with pytest.raises(ParameterError):
            model_core.pump_harmonics(ModelParams(E=0.5), n_max=0)


@pytest.mark.unit
class TestResponseMatrix:
    @pytest.mark.parametrize("M0,M1", REFERENCE_CONFIGS)
    @pytest.mark.parametrize("omega", [-2.0, 0.0, 0.7])
    def test_closed_inverse_is_inverse(self, M0, M1, omega):
        params = at_relative_pump(M0, M1, 0.9)
        L = model_core.build_L(params, omega)
        inverse = model_core.invert_L_closed(params, omega)
        assert np.max(np.abs(L @ inverse - np.eye(4))) < 1e-12

    @given(params=below_threshold_params(max_fraction=0.99), omega=st.floats(-5.0, 5.0))
    @settings(max_examples=1000, deadline=None)
    def test_closed_and_numeric_inverses_agree(self, params, omega):
        closed = model_core.invert_L_closed(params, omega)
        numeric = model_core.invert_numeric(model_core.build_L(params, omega))
        assert numeric.residual < 1e-10
        assert np.max(np.abs(closed - numeric.matrix)) <= 1e-9 * max(1.0, np.max(np.abs(numeric.matrix)))

    @pytest.mark.parametrize("omega", [0.0, 0.9])
    def test_continuous_as_pump_modulation_vanishes(self, omega):
        limit = ModelParams(E=0.5, M1=0.5)
        L0 = model_core.build_L(limit, omega)
        inverse0 = model_core.invert_L_closed(limit, omega)
        threshold0 = correlations.analytic_threshold(limit)
        for M0 in (1e-2, 1e-4, 1e-6, 1e-8):
            params = ModelParams(E=0.5, M0=M0, M1=0.5)
            assert np.max(np.abs(model_core.build_L(params, omega) - L0)) <= M0
            assert np.max(np.abs(model_core.invert_L_closed(params, omega) - inverse0)) <= 10 * M0
            assert abs(correlations.analytic_threshold(params) - threshold0) <= M0

    @pytest.mark.parametrize("M0,M1", REFERENCE_CONFIGS)
    def test_six_mode_matrix_restricts_to_four_mode(self, M0, M1):
        params = at_relative_pump(M0, M1, 0.8)
        for omega in (0.0, 1.3):
            L6 = model_core.build_L6(params, params.kc, omega)
            assert_allclose(model_core.restrict_L6(L6), model_core.build_L(params, omega), atol=1e-12)

    def test_six_mode_rejects_large_k(self):
        params = ModelParams(E=0.5)
        with pytest.raises(ParameterError):
            model_core.build_L6(params, 2 * params.kp, 0.0)

    @pytest.mark.parametrize("M0,M1", REFERENCE_CONFIGS)
    def test_transfer_matrix_conjugate_symmetry(self, M0, M1):
        params = at_relative_pump(M0, M1, 0.9)
        omega = 0.8
        forward = model_core.transfer_matrix(params, omega)
        backward = model_core.transfer_matrix(params, -omega)
        # a(k_c) <-> a^dag(k_c), a(-k_c) <-> a^dag(-k_c)
        sigma = [3, 2, 1, 0]
        assert_allclose(forward[np.ix_(sigma, sigma)], np.conj(backward), atol=1e-12)

    def test_empty_cavity_transfer_is_identity(self):
        params = ModelParams(E=0.0, M1=0.5)
        # lossless passive cavity
        T = model_core.transfer_matrix(params, 0.3)
        assert_allclose(T.conj().T @ T, np.eye(4), atol=1e-12)

    def test_singular_at_threshold(self):
        base = ModelParams(M0=0.5, M1=0.5)
        params = base.with_E(correlations.analytic_threshold(base))
        with pytest.raises(SingularMatrixError):
            model_core.invert_L_closed(params, 0.0)

    def test_numeric_inverse_rejects_bad_input(self):
        with pytest.raises(ParameterError):
            model_core.invert_numeric(np.ones((3, 4)))
        with pytest.raises(ParameterError):
            model_core.invert_numeric(np.array([[np.nan, 0], [0, 1]]))
        with pytest.raises(SingularMatrixError):
            model_core.invert_numeric(np.array([[1.0, 2.0], [2.0, 4.0]]))


@pytest.mark.unit
class TestDecoupledModes:
    @pytest.mark.parametrize("M0,M1", REFERENCE_CONFIGS)
    def test_margin_matches_drift_eigenvalues(self, M0, M1):
        params = at_relative_pump(M0, M1, 0.9)
        modes = model_core.decoupled_modes(params)
        eigenvalues = model_core.drift_eigenvalues(params)
        assert np.min(eigenvalues.real) == pytest.approx(modes.stability_margin(), abs=1e-10)
        assert_allclose(np.sort(eigenvalues.real), np.sort(modes.eigenvalues().real), atol=1e-10)

    @pytest.mark.parametrize("M0,M1", REFERENCE_CONFIGS)
    def test_margin_changes_sign_at_threshold(self, M0, M1):
        base = ModelParams(M0=M0, M1=M1)
        E_thr = correlations.analytic_threshold(base)
        below = model_core.drift_eigenvalues(base.with_E(0.99 * E_thr))
        above = model_core.drift_eigenvalues(base.with_E(1.01 * E_thr))
        assert np.min(below.real) > 0
        assert np.min(above.real) < 0

    def test_pump_modulation_splits_gains(self):
        modes = model_core.decoupled_modes(ModelParams(E=0.5, M0=0.5))
        assert modes.g_plus != pytest.approx(modes.g_minus)
        symmetric = model_core.decoupled_modes(ModelParams(E=0.5, M1=0.5))
        assert symmetric.g_plus == pytest.approx(symmetric.g_minus)
        assert symmetric.detuning_plus == -symmetric.detuning_minus == 0.25
