import os
from pathlib import Path
from typing import Any

from .singleton import ThreadSafeSingletonMeta

ENV_PREFIX = "FACEDETAIL_"


class Settings(metaclass=ThreadSafeSingletonMeta):
    """Process-wide settings read once from the environment"""

    def __init__(self) -> None:
        self._load_config()

    def _load_config(self) -> None:
        asset_dir = os.getenv(f"{ENV_PREFIX}ASSET_DIR")
        threads = os.getenv(f"{ENV_PREFIX}THREADS", "0")
        self._config: dict[str, Any] = {
            "asset_dir": Path(asset_dir) if asset_dir else None,
            "threads": max(int(threads), 0),
            "log_level": os.getenv(f"{ENV_PREFIX}LOG_LEVEL", "INFO").upper(),
        }

    def reload(self) -> None:
        self._load_config()

    def get(self, key: str, default: Any = None) -> Any:
        return self._config.get(key, default)

    def set(self, key: str, value: Any) -> None:
        self._config[key] = value

    def kdtree_workers(self) -> int:
        # cKDTree uses -1 for "all cores"
        threads = self.get("threads", 0)
        return threads if threads > 0 else -1
