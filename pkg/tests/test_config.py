from __future__ import annotations

import logging
from pathlib import Path

from relay_csi.config import RunnerConfig, load_config, save_config


def test_missing_file_gives_defaults(tmp_path):
    config = load_config(tmp_path / "config.toml")
    assert config == RunnerConfig()
    assert config.logging_level == logging.INFO


def test_round_trip(tmp_path):
    path = tmp_path / "config.toml"
    original = RunnerConfig(
        workers=4, chunk_size=1024, log_level="debug", output_dir=Path("/tmp/relay runs")
    )
    save_config(path, original)
    assert load_config(path) == original
    assert load_config(path).logging_level == logging.DEBUG


def test_unset_values_are_left_out(tmp_path):
    path = tmp_path / "config.toml"
    save_config(path, RunnerConfig())
    text = path.read_text(encoding="utf-8")
    assert "# chunk_size =" in text
    assert "# directory =" in text
    assert "workers = 1\n" in text
    assert load_config(path) == RunnerConfig()


def test_chunk_size_is_written_as_integer(tmp_path):
    path = tmp_path / "config.toml"
    save_config(path, RunnerConfig(chunk_size=2048))
    assert "chunk_size = 2048\n" in path.read_text(encoding="utf-8")
    assert load_config(path).chunk_size == 2048


def test_quotes_and_backslashes_survive(tmp_path):
    path = tmp_path / "config.toml"
    original = RunnerConfig(output_dir=Path('runs/"q"\\x'))
    save_config(path, original)
    assert load_config(path) == original


def test_corrupt_file_falls_back_to_backup(tmp_path):
    path = tmp_path / "config.toml"
    save_config(path, RunnerConfig(workers=3))
    save_config(path, RunnerConfig(workers=5))
    assert path.with_suffix(".toml.bak").exists()
    path.write_text("[runner\nworkers = ", encoding="utf-8")
    assert load_config(path).workers == 3


def test_corrupt_file_without_backup_gives_defaults(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text("not = [toml", encoding="utf-8")
    assert load_config(path) == RunnerConfig()


def test_invalid_values_are_ignored(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text(
        "[runner]\nworkers = -2\nchunk_size = \"lots\"\n\n[logging]\nlevel = \"loud\"\n",
        encoding="utf-8",
    )
    config = load_config(path)
    assert config.workers == 1
    assert config.chunk_size is None
    assert config.log_level == "info"
    assert config.output_dir is None
