"""
Configuration loading for Q-curvature experiments
Reads config/settings.yaml, overlays environment variables and validates run configs
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from qcurv.errors import ConfigError

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent
DEFAULT_SETTINGS = PROJECT_ROOT / "config" / "settings.yaml"
DEFAULT_THREADS = 4


def load_settings(path: Optional[str] = None) -> Dict[str, Any]:
    """Load the YAML settings file; missing sections come back as empty dicts"""
    load_dotenv()
    settings_path = Path(path) if path else Path(os.getenv("QCURV_SETTINGS", DEFAULT_SETTINGS))
    try:
        with open(settings_path, "r") as file:
            settings = yaml.safe_load(file) or {}
        logger.info(f"Settings loaded from {settings_path}")
    except FileNotFoundError:
        logger.warning(f"No settings file at {settings_path}, using built-in defaults")
        settings = {}
    except yaml.YAMLError as e:
        logger.error(f"Failed to parse settings: {str(e)}")
        raise ConfigError(f"invalid YAML in {settings_path}: {e}")

    for section in ("mtlab", "solver", "polyint", "acceptance", "logging"):
        settings.setdefault(section, {})
    return settings


def worker_count() -> int:
    """Threads used by parameter scans, from QCURV_THREADS"""
    raw = os.getenv("QCURV_THREADS", str(DEFAULT_THREADS))
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"QCURV_THREADS must be an integer, got {raw!r}", key="QCURV_THREADS")
    if count < 1:
        raise ConfigError(f"QCURV_THREADS must be >= 1, got {count}", key="QCURV_THREADS")
    return count


def load_run_config(path: str, allowed: Dict[str, Any]) -> Dict[str, Any]:
    """Read a JSON run configuration and merge it over the allowed defaults.

    Unknown keys are rejected so that a typo never silently falls back to a
    default value.
    """
    try:
        with open(path, "r") as file:
            raw = json.load(file)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}")

    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return _merge_checked(allowed, raw, "")


def _merge_checked(allowed: Dict[str, Any], raw: Dict[str, Any], prefix: str) -> Dict[str, Any]:
    """Merge raw over allowed, recursing into nested sections; keys are reported dotted, e.g. grid.nodes"""
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        keys = [prefix + key for key in unknown]
        raise ConfigError(f"unknown config keys: {', '.join(keys)}", key=keys[0])

    merged = dict(allowed)
    for key, value in raw.items():
        default = allowed[key]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{prefix}{key} must be an object", key=prefix + key)
            merged[key] = _merge_checked(default, value, f"{prefix}{key}.")
        else:
            _check_type(prefix + key, default, value)
            merged[key] = value
    return merged


def _check_type(key: str, default: Any, value: Any):
    """The value must have the kind of its default; None defaults accept anything"""
    if default is None:
        return
    number = isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = number and float(value).is_integer()
    elif isinstance(default, float):
        ok = number
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{key} must be {type(default).__name__}, got {value!r}", key=key)
