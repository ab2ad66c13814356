from __future__ import annotations

import logging

from relay_csi.paths import log_path


def setup_logging(level: int = logging.INFO) -> None:
    path = log_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    handlers = [
        logging.FileHandler(path, encoding="utf-8"),
        logging.StreamHandler(),
    ]
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )
    logging.captureWarnings(True)
