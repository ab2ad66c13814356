from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Settings:
    # quadrature
    quad_abs_tol: float = 1e-11
    quad_rel_tol: float = 1e-10
    quad_subdivisions: int = 200
    tail_probability: float = 1e-10
    # designers
    root_xtol: float = 1e-15
    root_rtol: float = 1e-15
    fixed_point_max_sweeps: int = 10_000
    fixed_point_tol: float = 1e-10
    fixed_point_max_levels: int = 7
    # monte carlo
    chunk_size: int = 4096
    default_trials: int = 50_000
    underpowered_trials: int = 10_000
    # harness
    fixed_design_snr_db: float = 10.0
    target_percent: float = 80.0
    nominal_levels: int = 3


DEFAULT_SETTINGS = Settings()
