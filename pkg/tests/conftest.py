from __future__ import annotations

import pytest


@pytest.fixture(autouse=True)
def relay_home(tmp_path, monkeypatch):
    home = tmp_path / "home"
    monkeypatch.setenv("RELAY_CSI_HOME", str(home))
    return home
