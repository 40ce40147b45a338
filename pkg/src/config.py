"""Configuration: environment defaults and the flat key = value config file"""
import os
from typing import Dict, Optional

from dotenv import dotenv_values, load_dotenv

from .errors import UsageError

try:
    load_dotenv()
except Exception:
    pass


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(float(raw))
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}")


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"{name} must be a number, got {raw!r}")


def get_point_cap() -> int:
    """Largest net the constructors may build (QILAB_POINT_CAP)"""
    return _env_int("QILAB_POINT_CAP", Config.DEFAULT_POINT_CAP)


def get_seed() -> int:
    return _env_int("QILAB_SEED", Config.DEFAULT_SEED)


def get_delta() -> float:
    return _env_float("QILAB_DELTA", Config.DEFAULT_DELTA)


def get_workers() -> int:
    return max(1, _env_int("QILAB_WORKERS", Config.DEFAULT_WORKERS))


def get_cache_size() -> int:
    return max(1, _env_int("QILAB_CACHE_SIZE", Config.DEFAULT_CACHE_SIZE))


def get_level_cap() -> int:
    return max(1, _env_int("QILAB_LEVEL_CAP", Config.DEFAULT_LEVEL_CAP))


def parse_float_list(text: str) -> list:
    """'1, 2.5,3' -> [1.0, 2.5, 3.0]; also accepts ranges like '4..10'"""
    values = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..", 1)
                lo_v, hi_v = int(lo), int(hi)
                values.extend(float(v) for v in range(lo_v, hi_v + 1))
            else:
                values.append(float(part))
        except ValueError:
            raise UsageError(f"Cannot parse number list entry {part!r}")
    return values


def load_config_file(path: str, known_keys: Optional[set] = None) -> Dict[str, str]:
    """
    Read a flat key = value file (comments with #).

    Keys are flag names; dashes become underscores. Unknown keys raise
    UsageError when known_keys is given.
    """
    if not os.path.exists(path):
        raise UsageError(f"Config file not found: {path}")
    raw = dotenv_values(path)
    values = {}
    for key, value in raw.items():
        norm = key.strip().lstrip("-").replace("-", "_")
        if known_keys is not None and norm not in known_keys:
            raise UsageError(f"Unknown config key {key!r} in {path}")
        if value is None:
            raise UsageError(f"Config key {key!r} in {path} has no value")
        values[norm] = value.strip()
    return values


class Config:
    """Lab configuration"""

    # Default values
    DEFAULT_POINT_CAP = 2_000_000
    DEFAULT_SEED = 20240601
    DEFAULT_DELTA = 1.0
    DEFAULT_WORKERS = 4
    DEFAULT_CACHE_SIZE = 32
    DEFAULT_LEVEL_CAP = 4096

    # Numerics
    KERNEL_ROW_TOL = 1e-13
    KERNEL_MAX_SWEEPS = 10_000
    DENSE_EIGEN_LIMIT = 1500
    DENSE_DISTANCE_LIMIT = 6000
    MAX_PAIR_POINTS = 3000

    def __init__(self):
        self.point_cap = get_point_cap()
        self.seed = get_seed()
        self.delta = get_delta()
        self.workers = get_workers()
        self.cache_size = get_cache_size()
        self.level_cap = get_level_cap()
