"""Runner defaults read from a small TOML file.

The file is optional. A value that is missing or out of range falls back to
its default, and a file that fails to parse falls back to the copy kept in
``<name>.bak`` by the previous save.
"""

from __future__ import annotations

import json
import logging
import shutil
import tomllib
from dataclasses import dataclass
from pathlib import Path

_LEVELS = {"debug", "info", "warning", "error"}


@dataclass(frozen=True)
class RunnerConfig:
    workers: int = 1
    chunk_size: int | None = None
    log_level: str = "info"
    output_dir: Path | None = None

    @property
    def logging_level(self) -> int:
        return getattr(logging, self.log_level.upper(), logging.INFO)


def _backup_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".bak")


def _positive_int(value) -> int | None:
    if isinstance(value, bool) or not isinstance(value, int):
        return None
    return value if value > 0 else None


def _read_toml(path: Path) -> dict | None:
    try:
        return tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        logging.getLogger(__name__).debug("Cannot read %s: %s", path, exc)
        return None


def load_config(path: Path) -> RunnerConfig:
    if not path.exists():
        return RunnerConfig()
    data = _read_toml(path)
    if data is None and _backup_path(path).exists():
        data = _read_toml(_backup_path(path))
    if data is None:
        logging.getLogger(__name__).warning("Unreadable config %s, using defaults.", path)
        return RunnerConfig()
    runner = data.get("runner", {})
    level = data.get("logging", {}).get("level")
    directory = data.get("output", {}).get("directory")
    if isinstance(level, str) and level.strip().lower() in _LEVELS:
        level = level.strip().lower()
    else:
        level = "info"
    if isinstance(directory, str) and directory.strip():
        output_dir = Path(directory.strip()).expanduser()
    else:
        output_dir = None
    return RunnerConfig(
        workers=_positive_int(runner.get("workers")) or 1,
        chunk_size=_positive_int(runner.get("chunk_size")),
        log_level=level,
        output_dir=output_dir,
    )


def _entry(key: str, value: int | str | None) -> str:
    # TOML has no null: unset keys are written commented out
    if value is None:
        return f"# {key} ="
    if isinstance(value, str):
        return f"{key} = {json.dumps(value)}"
    return f"{key} = {value}"


def save_config(path: Path, config: RunnerConfig) -> None:
    """Write ``config`` to ``path``, keeping the previous file as ``.bak``."""
    sections = {
        "runner": {"workers": config.workers, "chunk_size": config.chunk_size},
        "logging": {"level": config.log_level},
        "output": {"directory": str(config.output_dir) if config.output_dir else None},
    }
    content = "\n".join(
        f"[{name}]\n" + "".join(_entry(key, value) + "\n" for key, value in entries.items())
        for name, entries in sections.items()
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        try:
            shutil.copyfile(path, _backup_path(path))
        except OSError as exc:
            logging.getLogger(__name__).warning("No backup of %s: %s", path, exc)
    path.write_text(content, encoding="utf-8")
