"""
Tests for configuration loading and validation
"""

import pytest

from pcopo.errors import ConfigError
from pcopo.models.params import ModelParams, Scheme, SimConfig
from pcopo.models.results import BoundConvention, Engine, Observable, SweepSpec
from pcopo.physics import correlations
from pcopo.utils.config import ConfigManager, config_load, default_workers, serialize_config


def write(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


@pytest.mark.unit
class TestLoading:
    def test_minimal_file_uses_defaults(self, tmp_path):
        model, simulation, sweep = config_load(write(tmp_path, "model:\n  E: 0.5\n"))
        assert model == ModelParams(E=0.5)
        assert simulation == SimConfig()
        assert sweep == SweepSpec()

    def test_empty_file(self, tmp_path):
        model, _, _ = config_load(write(tmp_path, ""))
        assert model.E == 0.0

    def test_unknown_key_reports_line(self, tmp_path):
        path = write(tmp_path, "config_version: 1\nmodel:\n  E: 0.5\n  gain: 2\n")
        with pytest.raises(ConfigError) as excinfo:
            config_load(path)
        assert excinfo.value.line == 4
        assert excinfo.value.field == "model.gain"
        assert "line 4" in str(excinfo.value)

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            config_load(write(tmp_path, "model:\n  E: 0.5\nplots: {}\n"))
        assert excinfo.value.line == 3

    def test_yaml_syntax_error_line(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            config_load(write(tmp_path, "model:\n  E: 0.5\n  M0: [0.1\n"))
        assert excinfo.value.line is not None

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            config_load(tmp_path / "absent.yaml")

    def test_wrong_version(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            config_load(write(tmp_path, "config_version: 2\n"))
        assert excinfo.value.field == "config_version"

    def test_invalid_value_names_field(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            config_load(write(tmp_path, "model:\n  E: 0.5\n  M0: -1\n"))
        assert excinfo.value.field == "model.M0"
        assert excinfo.value.line == 3

    def test_unknown_observable(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            config_load(write(tmp_path, "sweep:\n  observable: entropy\n"))
        assert excinfo.value.field == "sweep.observable"


@pytest.mark.unit
class TestValidation:
    def test_incommensurate_crystal_rejected(self, tmp_path):
        path = write(tmp_path, "model:\n  E: 0.5\n  kp: 1.5\n")
        with pytest.raises(ConfigError, match="grid spacing") as excinfo:
            config_load(path)
        assert excinfo.value.field == "model.kp"
        assert excinfo.value.line == 3

    def test_relative_pump_resolved(self, tmp_path):
        model, _, sweep = config_load(write(tmp_path, "model:\n  M0: 0.5\n  E_relative: 0.95\n"))
        assert model.E == pytest.approx(0.95 * correlations.threshold(ModelParams(M0=0.5)))
        assert sweep.E_relative == 0.95

    def test_relative_pump_at_threshold_rejected(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            config_load(write(tmp_path, "model:\n  E_relative: 1.0\n"))
        assert excinfo.value.field == "model.E_relative"

    def test_sweep_axes(self, tmp_path):
        text = "sweep:\n  axes:\n    - [M0, [0.0, 0.5]]\n    - [E_relative, [0.5, 0.9]]\n"
        _, _, sweep = config_load(write(tmp_path, text))
        assert sweep.axes == [("M0", [0.0, 0.5]), ("E_relative", [0.5, 0.9])]

    def test_conflicting_axes(self, tmp_path):
        text = "sweep:\n  axes:\n    - [E, [0.5]]\n    - [E_relative, [0.5]]\n"
        with pytest.raises(ConfigError):
            config_load(write(tmp_path, text))

    def test_validate_config_collects_errors(self):
        manager = ConfigManager()
        manager.set('logging.level', 'LOUD')
        manager.set('model.M1', -1.0)
        errors = manager.validate_config()
        assert 'logging.level' in errors
        assert 'model.M1' in errors


@pytest.mark.unit
class TestRoundTrip:
    def test_serialize_and_load(self, tmp_path):
        model = ModelParams(E=0.81, delta0=0.1, M0=0.5, M1=0.25)
        simulation = SimConfig(grid_points=128, dt=5e-4, seed=11, scheme=Scheme.SEMI_IMPLICIT, nonlinear=False)
        sweep = SweepSpec(axes=[("M1", [0.0, 0.25])], observable=Observable.TWIN_BEAMS,
                          engine=Engine.ANALYTIC, duan_weight=1.5, duan_convention=BoundConvention.STANDARD,
                          output_path="twin.json")
        path = write(tmp_path, serialize_config(model, simulation, sweep))
        assert config_load(path) == (model, simulation, sweep)

    def test_overrides_and_save(self, tmp_path):
        manager = ConfigManager(str(tmp_path / "saved.yaml"))
        manager.update({'model.E': 0.4, 'model.M1': None, 'sweep.observable': 'threshold'})
        manager.save_config()
        model, _, sweep = config_load(tmp_path / "saved.yaml")
        assert model.E == 0.4
        assert model.M1 == 0.0
        assert sweep.observable is Observable.THRESHOLD


@pytest.mark.unit
class TestWorkers:
    def test_default(self, monkeypatch):
        monkeypatch.delenv("PCOPO_WORKERS", raising=False)
        assert default_workers() == 1

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("PCOPO_WORKERS", "3")
        assert default_workers() == 3

    @pytest.mark.parametrize("value", ["many", "0"])
    def test_invalid_environment(self, monkeypatch, value):
        monkeypatch.setenv("PCOPO_WORKERS", value)
        with pytest.raises(ConfigError):
            default_workers()
