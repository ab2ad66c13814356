from __future__ import annotations

import os
from pathlib import Path

APP_NAME = "RelayCSI"
HOME_ENV = "RELAY_CSI_HOME"


def base_dir() -> Path:
    override = os.getenv(HOME_ENV)
    if override:
        return Path(override).expanduser()
    return Path.home() / APP_NAME


def results_dir() -> Path:
    return base_dir() / "results"


def config_path() -> Path:
    return base_dir() / "config.toml"


def log_path() -> Path:
    return base_dir() / "relay-csi.log"
