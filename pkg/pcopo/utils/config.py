"""
Configuration management for the PCOPO workbench
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, NamedTuple, Optional, Union

import yaml
from pydantic import ValidationError

from ..errors import ConfigError, PcopoError
from ..models.params import ModelParams, SimConfig
from ..models.results import SweepSpec

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1
WORKERS_ENV = "PCOPO_WORKERS"
VALID_LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


class LoadedConfig(NamedTuple):
    model: ModelParams
    simulation: SimConfig
    sweep: SweepSpec


def default_workers() -> int:
    """Worker count from PCOPO_WORKERS, else 1"""
    value = os.getenv(WORKERS_ENV)
    if not value:
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {value!r}", field=WORKERS_ENV)
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1", field=WORKERS_ENV)
    return workers


def _key_lines(text: str) -> Dict[str, int]:
    """1-based line of every top-level key and every 'section.key'"""
    lines: Dict[str, int] = {}
    root = yaml.compose(text)
    if not isinstance(root, yaml.MappingNode):
        return lines
    for key_node, value_node in root.value:
        section = str(key_node.value)
        lines[section] = key_node.start_mark.line + 1
        if isinstance(value_node, yaml.MappingNode):
            for sub_key, _ in value_node.value:
                lines[f"{section}.{sub_key.value}"] = sub_key.start_mark.line + 1
    return lines


class ConfigManager:
    """Loads, validates and writes workbench configuration files"""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the configuration manager

        Args:
            config_path: Path to configuration file (defaults to config/config.yaml)
        """
        self.config_path = Path(config_path) if config_path else Path("config/config.yaml")
        self.defaults = self._get_default_config()
        self.config_data: Dict[str, Any] = copy.deepcopy(self.defaults)
        self.key_lines: Dict[str, int] = {}

    def _get_default_config(self) -> Dict[str, Any]:
        """
        Get default configuration values

        Returns:
            Dict[str, Any]: Default configuration
        """
        model = ModelParams().model_dump(mode="json")
        model['kp'] = None
        model['E_relative'] = None
        sweep = SweepSpec().model_dump(mode="json")
        return {
            'config_version': CONFIG_VERSION,
            'model': model,
            'simulation': SimConfig().model_dump(mode="json"),
            'sweep': sweep,
            'logging': {
                'level': 'INFO',
                'file': None,
                'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            },
        }

    def load_config(self, config_path: Optional[str] = None) -> None:
        """
        Load configuration from file, merged over the defaults

        Args:
            config_path: Optional path to configuration file

        Raises:
            ConfigError: unreadable file, YAML syntax error or unknown key
        """
        if config_path:
            self.config_path = Path(config_path)

        try:
            text = self.config_path.read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigError(f"cannot read configuration file {self.config_path}: {e}")

        try:
            loaded = yaml.safe_load(text) or {}
            self.key_lines = _key_lines(text)
        except yaml.YAMLError as e:
            mark = getattr(e, 'problem_mark', None)
            line = mark.line + 1 if mark is not None else None
            raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', e)}", line=line)

        if not isinstance(loaded, dict):
            raise ConfigError("configuration root must be a mapping", line=1)

        self._check_keys(loaded)
        version = loaded.get('config_version', CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config_version {version!r} (expected {CONFIG_VERSION})",
                              line=self.key_lines.get('config_version'), field='config_version')

        self.config_data = self._merge_config(self.defaults, loaded)
        logger.info(f"Configuration loaded from {self.config_path}")

    def _check_keys(self, loaded: Dict[str, Any]) -> None:
        for key, value in loaded.items():
            if key not in self.defaults:
                raise ConfigError(f"unknown key '{key}'", line=self.key_lines.get(key), field=key)
            default = self.defaults[key]
            if isinstance(default, dict):
                if value is None:
                    continue
                if not isinstance(value, dict):
                    raise ConfigError(f"section '{key}' must be a mapping", line=self.key_lines.get(key), field=key)
                for sub_key in value:
                    if sub_key not in default:
                        name = f"{key}.{sub_key}"
                        raise ConfigError(f"unknown key '{sub_key}' in section '{key}'",
                                          line=self.key_lines.get(name), field=name)

    def save_config(self, config_data: Optional[Dict[str, Any]] = None) -> None:
        """
        Save configuration to file

        Args:
            config_data: Configuration data to save (uses current config if not provided)
        """
        data_to_save = config_data if config_data is not None else self.config_data
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(data_to_save, f, default_flow_style=False, sort_keys=False)
        if config_data is not None:
            self.config_data = self._merge_config(self.defaults, data_to_save)
        logger.info(f"Configuration saved to {self.config_path}")

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value

        Args:
            key: Configuration key (supports dot notation like 'model.E')
            default: Default value if key not found

        Returns:
            Any: Configuration value
        """
        value: Any = self.config_data
        for part in key.split('.'):
            if isinstance(value, dict) and part in value:
                value = value[part]
            else:
                return default
        return value

    def set(self, key: str, value: Any) -> None:
        """
        Set configuration value

        Args:
            key: Configuration key (supports dot notation)
            value: Value to set
        """
        parts = key.split('.')
        target = self.config_data
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value

    def update(self, updates: Dict[str, Any]) -> None:
        """Apply several dot-notation updates, skipping None values"""
        for key, value in updates.items():
            if value is not None:
                self.set(key, value)

    def _merge_config(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """
        Recursively merge configuration dictionaries

        Args:
            base: Base configuration
            override: Override configuration

        Returns:
            Dict[str, Any]: Merged configuration
        """
        result = copy.deepcopy(base)
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_config(result[key], value)
            elif value is not None or key not in result or not isinstance(result[key], dict):
                result[key] = value
        return result

    def _validation_error(self, section: str, error: ValidationError) -> ConfigError:
        first = error.errors()[0]
        location = [str(part) for part in first.get('loc', ()) if part != '__root__']
        name = f"{section}.{location[0]}" if location else section
        line = self.key_lines.get(name, self.key_lines.get(section))
        return ConfigError(first.get('msg', str(error)), line=line, field=name)

    def build(self) -> LoadedConfig:
        """
        Build validated records from the current configuration

        Returns:
            LoadedConfig: (ModelParams, SimConfig, SweepSpec)

        Raises:
            ConfigError: validation failure naming the field
        """
        model_data = dict(self.get('model') or {})
        e_relative = model_data.pop('E_relative', None)
        sweep_data = dict(self.get('sweep') or {})
        if e_relative is not None:
            sweep_data['E_relative'] = e_relative

        try:
            model = ModelParams(**model_data)
        except ValidationError as e:
            raise self._validation_error('model', e)
        try:
            simulation = SimConfig(**(self.get('simulation') or {}))
        except ValidationError as e:
            raise self._validation_error('simulation', e)
        try:
            sweep = SweepSpec(**sweep_data)
        except ValidationError as e:
            raise self._validation_error('sweep', e)

        if sweep.E_relative is not None:
            model = self._resolve_relative_pump(model, sweep.E_relative)
        if model.delta1 < 0:
            self._check_grid(model, simulation)
        return LoadedConfig(model, simulation, sweep)

    def _resolve_relative_pump(self, model: ModelParams, e_relative: float) -> ModelParams:
        from ..physics.correlations import sigma_den, threshold

        line = self.key_lines.get('model.E_relative')
        try:
            resolved = model.with_E(e_relative * threshold(model))
        except PcopoError as e:
            raise ConfigError(f"cannot resolve E_relative: {e}", line=line, field='model.E_relative')
        if e_relative >= 1 or sigma_den(resolved) <= 0:
            raise ConfigError(f"E_relative={e_relative} is not below threshold", line=line, field='model.E_relative')
        logger.info("Resolved E_relative=%g to E=%.12g", e_relative, resolved.E)
        return resolved

    def _check_grid(self, model: ModelParams, simulation: SimConfig) -> None:
        from ..physics.langevin import check_commensurate

        try:
            check_commensurate(model, simulation)
        except PcopoError as e:
            name = 'model.kp' if 'model.kp' in self.key_lines else 'simulation.box_length'
            raise ConfigError(str(e), line=self.key_lines.get(name), field=name)

    def validate_config(self) -> Dict[str, str]:
        """
        Validate current configuration

        Returns:
            Dict[str, str]: Dictionary of validation errors (empty if valid)
        """
        errors = {}
        log_level = self.get('logging.level')
        if log_level not in VALID_LOG_LEVELS:
            errors['logging.level'] = f"Invalid logging level: {log_level}"
        try:
            self.build()
        except ConfigError as e:
            errors[e.field or 'config'] = str(e)
        return errors

    def get_section(self, section: str) -> Dict[str, Any]:
        return self.get(section, {})


def serialize_config(model: ModelParams, simulation: SimConfig, sweep: SweepSpec) -> str:
    """YAML text that config_load turns back into equal records"""
    sweep_data = sweep.model_dump(mode="json")
    data = {
        'config_version': CONFIG_VERSION,
        'model': model.model_dump(mode="json"),
        'simulation': simulation.model_dump(mode="json"),
        'sweep': sweep_data,
    }
    return yaml.safe_dump(data, default_flow_style=False, sort_keys=False)


def config_load(path: Union[str, Path]) -> LoadedConfig:
    """
    Read and validate a configuration file

    Args:
        path: YAML configuration file

    Returns:
        LoadedConfig: (ModelParams, SimConfig, SweepSpec)
    """
    manager = ConfigManager(str(path))
    manager.load_config()
    return manager.build()
