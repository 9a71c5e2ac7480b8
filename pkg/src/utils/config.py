"""
Configuration Management
Loads and manages pipeline configuration
"""

import copy
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv


DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / 'config' / 'default.yaml'


class ConfigError(ValueError):
    """Raised when the configuration is missing or inconsistent"""


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class Config:
    """Configuration manager for the gradient camera pipeline"""

    def __init__(self, config_path: Optional[Union[str, Path]] = None,
                 defaults_path: Optional[Union[str, Path]] = None):
        # Load environment variables
        load_dotenv()

        if defaults_path is None:
            defaults_path = DEFAULT_CONFIG_PATH

        self.config = self._load_config(Path(defaults_path))

        # User config is layered over the defaults
        if config_path is not None:
            user_path = Path(config_path)
            if not user_path.exists():
                raise ConfigError(f"Config file not found: {user_path}")
            self.config = _deep_merge(self.config, self._load_config(user_path))

        # Override with environment variables
        self._override_with_env()

    def _load_config(self, config_path: Path) -> Dict[str, Any]:
        """Load configuration from YAML file"""
        if not config_path.exists():
            return {}

        with open(config_path, 'r', encoding='utf-8') as f:
            try:
                loaded = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"Cannot parse {config_path}: {e}") from e

        if not isinstance(loaded, dict):
            raise ConfigError(f"Top level of {config_path} must be a mapping")
        return loaded

    def _override_with_env(self):
        """Override config values with environment variables"""
        if os.environ.get('GCAM_OUTPUT_DIR'):
            self.set('output.directory', os.environ['GCAM_OUTPUT_DIR'])

        if os.environ.get('GCAM_LOG_LEVEL'):
            self.set('logging.level', os.environ['GCAM_LOG_LEVEL'])

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value using dot notation"""
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def set(self, key: str, value: Any):
        """Set configuration value using dot notation"""
        keys = key.split('.')
        node = self.config
        for k in keys[:-1]:
            if not isinstance(node.get(k), dict):
                node[k] = {}
            node = node[k]
        node[keys[-1]] = value

    @property
    def output_directory(self) -> Path:
        """Directory all artifacts are written under"""
        return Path(self.get('output.directory') or 'output')

    @property
    def log_level(self) -> str:
        return str(self.get('logging.level', 'INFO')).upper()

    @property
    def log_file(self) -> Optional[str]:
        return self.get('logging.file') or None
