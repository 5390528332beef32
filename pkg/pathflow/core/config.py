"""
Configuration management for PathFlow
Handles loading, validation, and access to configuration settings
"""

import copy
import yaml
from pathlib import Path
from typing import Any, Dict
from pathflow.core.exceptions import ConfigurationError


YAML_SUFFIXES = (".yaml", ".yml")


class Config:
    """
    Centralized configuration management
    YAML defaults, overridden by YAML or `key = value` run files
    """

    _instance = None
    _config_data: Dict[str, Any] = {}

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not hasattr(self, '_initialized'):
            self._initialized = True
            self._load_default_config()

    def _load_default_config(self):
        """Load default configuration"""
        project_root = Path(__file__).parent.parent.parent
        default_config_path = project_root / "config" / "default_config.yaml"

        self._config_data = self._get_minimal_defaults()
        if default_config_path.exists():
            self.load_from_file(str(default_config_path))

    def _get_minimal_defaults(self) -> Dict[str, Any]:
        """Get minimal default configuration"""
        return {
            "pathflow": {
                "name": "PathFlow",
                "version": "0.1.0",
            },
            "logging": {
                "level": "INFO",
                "file_path": None,
                "max_log_size_mb": 10,
                "backup_count": 5,
            },
            "runtime": {
                "workers": None,
                "eval_batch_size": 256,
            },
            "experiment": {},
            "synth": {},
        }

    def reload(self):
        """Drop every override and restore the defaults"""
        self._load_default_config()

    def load_from_file(self, config_path: str):
        """
        Load configuration from a YAML file or a `key = value` run file

        Args:
            config_path: Path to the configuration file

        Raises:
            ConfigurationError: If file cannot be loaded or parsed
        """
        path = Path(config_path)
        try:
            text = path.read_text(encoding='utf-8')
        except FileNotFoundError:
            raise ConfigurationError(f"Configuration file not found: {config_path}")
        except OSError as e:
            raise ConfigurationError(f"Cannot read configuration file: {e}")

        if path.suffix.lower() in YAML_SUFFIXES:
            try:
                loaded_config = yaml.safe_load(text)
            except yaml.YAMLError as e:
                raise ConfigurationError(f"Invalid YAML in configuration file: {e}")
            if loaded_config:
                if not isinstance(loaded_config, dict):
                    raise ConfigurationError(f"Top level of {config_path} must be a mapping")
                self._merge(self._config_data, loaded_config)
            return

        for key_path, value in parse_key_value_text(text, source=str(config_path)).items():
            self.set(key_path, value)

    def _merge(self, target: Dict[str, Any], incoming: Dict[str, Any]):
        for key, value in incoming.items():
            if isinstance(value, dict) and isinstance(target.get(key), dict):
                self._merge(target[key], value)
            else:
                target[key] = value

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation

        Args:
            key_path: Dot-separated path (e.g., 'experiment.lr')
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        keys = key_path.split('.')
        value = self._config_data

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default

        return value

    def set(self, key_path: str, value: Any):
        """
        Set configuration value using dot notation

        Args:
            key_path: Dot-separated path (e.g., 'experiment.epochs')
            value: Value to set
        """
        keys = key_path.split('.')
        config = self._config_data

        for key in keys[:-1]:
            if key not in config or not isinstance(config[key], dict):
                config[key] = {}
            config = config[key]

        config[keys[-1]] = value

    def get_all(self) -> Dict[str, Any]:
        """Get entire configuration dictionary"""
        return copy.deepcopy(self._config_data)

    def validate(self) -> bool:
        """
        Validate configuration

        Returns:
            True if valid, raises ConfigurationError otherwise
        """
        required_sections = ['logging', 'runtime', 'experiment', 'synth']

        for section in required_sections:
            if section not in self._config_data:
                raise ConfigurationError(f"Missing required configuration section: {section}")
            if not isinstance(self._config_data[section], dict):
                raise ConfigurationError(f"Configuration section '{section}' must be a mapping")

        return True


def parse_key_value_text(text: str, source: str = "<text>",
                         default_section: str = "experiment") -> Dict[str, Any]:
    """
    Parse `key = value` lines into dotted key paths

    Bare keys are placed under `default_section`. Values are typed with
    YAML scalar rules, so `0.01` is a float and `[16, 32]` a list.

    Raises:
        ConfigurationError: On a line without `=` or with an empty key
    """
    entries: Dict[str, Any] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigurationError(
                f"Expected 'key = value' in {source}",
                {"line": line_no, "text": raw.strip()}
            )
        key, value_text = (part.strip() for part in line.split('=', 1))
        if not key:
            raise ConfigurationError(f"Empty key in {source}", {"line": line_no})
        try:
            value = yaml.safe_load(value_text) if value_text else None
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse value for '{key}' in {source}: {e}",
                                     {"line": line_no})
        key_path = key if '.' in key else f"{default_section}.{key}"
        entries[key_path] = value
    return entries
