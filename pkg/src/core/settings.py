import os
import logging
from functools import lru_cache
from pathlib import Path

import yaml
from dotenv import load_dotenv

load_dotenv()
# --- Configuration ---
BASE_DIR = Path(__file__).parent.parent.parent
DEFAULT_CONFIG_PATH = BASE_DIR / "src" / "config" / "solver_config.yaml"
CONFIG_ENV_VAR = "RESTLESS_CONFIG"
REQUIRED_SECTIONS = [
    'lp', 'feedback', 'whittle', 'monotone', 'probe', 'replenish',
    'simulation', 'exact', 'value_iteration', 'policies', 'instances', 'gallery',
]

logger = logging.getLogger(__name__)


def config_path():
    """Resolves the solver config path, honouring the RESTLESS_CONFIG override."""
    override = os.getenv(CONFIG_ENV_VAR)
    return Path(override) if override else DEFAULT_CONFIG_PATH


@lru_cache(maxsize=None)
def _load(path_str):
    path = Path(path_str)
    if not path.exists():
        raise FileNotFoundError(f"Solver config not found at {path}")
    with open(path, "r") as f:
        params = yaml.safe_load(f) or {}
    if not all(k in params for k in REQUIRED_SECTIONS):
        missing = [k for k in REQUIRED_SECTIONS if k not in params]
        raise ValueError(f"Solver config {path} is missing sections: {missing}")
    logger.debug(f"Solver config loaded from {path}")
    return params


def load_settings(path=None):
    """Loads and validates the YAML solver configuration."""
    return _load(str(path if path is not None else config_path()))


def section(name, path=None):
    """Returns one section of the solver configuration as a dict."""
    return load_settings(path)[name]
