"""
Runtime settings for rnproj.
Values are read from the environment once at import; everything else in the
package imports them from here.
"""

import os
from pathlib import Path

CONFIG_DIR = Path(__file__).resolve().parent


def _env_int(name, default, minimum=None):
    """Read an integer environment variable, falling back to ``default``."""
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        value = default
    else:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{name} must be an integer, got {raw!r}")
    if minimum is not None:
        value = max(value, minimum)
    return value


def thread_count():
    """Worker threads for simulation and experiment replications (RNP_THREADS)."""
    return _env_int("RNP_THREADS", os.cpu_count() or 1, minimum=1)


# ============================================================================
# GENERAL
# ============================================================================

THREADS = thread_count()
LOG_LEVEL = os.environ.get("RNP_LOG_LEVEL", "INFO").upper()

# ============================================================================
# NUMERICS
# ============================================================================

DEFAULT_GRID_POINTS = _env_int("RNP_GRID_POINTS", 2001, minimum=2)
DEFAULT_EVAL_POINTS = 501
DEFAULT_JOINT_GRID_POINTS = 201
TRADING_DAYS = 252

# ============================================================================
# FILES
# ============================================================================

SVCJ_CALIBRATION_PATH = Path(
    os.environ.get("RNP_SVCJ_CALIBRATION", CONFIG_DIR / "svcj_calibration.json")
)
EXPERIMENT_CONFIG_DIR = CONFIG_DIR / "experiments"

# ============================================================================
# WEB SERVICE
# ============================================================================

WEB_HOST = os.environ.get("RNP_WEB_HOST", "0.0.0.0")
WEB_PORT = _env_int("RNP_WEB_PORT", 5000, minimum=1)
