"""Normalized channel-power laws.

Every law has unit mean. ``pdf``, ``cdf`` and ``quantile`` accept scalars or
numpy arrays and return the same shape; scalars come back as ``float``.
"""

from __future__ import annotations

import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np

from relay_csi.errors import InfiniteQuantile, InvalidInput


class DistributionKind(StrEnum):
    UNIFORM = "uniform"
    RAYLEIGH = "rayleigh"
    TABULATED = "tabulated"


def _as_array(value) -> tuple[np.ndarray, bool]:
    array = np.asarray(value, dtype=float)
    return array, array.ndim == 0


def _result(array: np.ndarray, scalar: bool):
    return float(array) if scalar else array


class ChannelDistribution(ABC):
    kind: DistributionKind
    support_max: float

    @property
    def finite_support(self) -> bool:
        return math.isfinite(self.support_max)

    @property
    @abstractmethod
    def pdf_max(self) -> float: ...

    @abstractmethod
    def _pdf(self, h: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _cdf(self, h: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _quantile(self, p: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def tail_first_moment(self, t: float) -> float:
        """Return the integral of h f_H(h) over [t, support_max)."""

    def pdf(self, h):
        array, scalar = _as_array(h)
        if np.any(array < 0):
            raise InvalidInput("channel power must be nonnegative")
        return _result(self._pdf(array), scalar)

    def cdf(self, h):
        array, scalar = _as_array(h)
        if np.any(array < 0):
            raise InvalidInput("channel power must be nonnegative")
        return _result(self._cdf(array), scalar)

    def quantile(self, p):
        array, scalar = _as_array(p)
        if np.any(array < 0) or np.any(array > 1):
            raise InvalidInput("probability must lie in [0, 1)")
        if np.any(array >= 1):
            if not self.finite_support:
                raise InfiniteQuantile(
                    f"{self.kind} has infinite support; quantile(1) is unbounded"
                )
        return _result(self._quantile(array), scalar)

    def sample(self, stream: np.random.Generator, count: int) -> np.ndarray:
        if count < 1:
            raise InvalidInput("sample count must be positive")
        return self._quantile(stream.random(int(count)))

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)

    def truncation_point(self, tail_probability: float) -> float:
        if self.finite_support:
            return self.support_max
        return float(self._quantile(np.asarray(1.0 - tail_probability)))


@dataclass(frozen=True)
class UniformPower(ChannelDistribution):
    kind: DistributionKind = field(default=DistributionKind.UNIFORM, init=False)
    support_max: float = field(default=2.0, init=False)

    @property
    def pdf_max(self) -> float:
        return 0.5

    def _pdf(self, h: np.ndarray) -> np.ndarray:
        return np.where(h <= 2.0, 0.5, 0.0)

    def _cdf(self, h: np.ndarray) -> np.ndarray:
        return np.clip(h / 2.0, 0.0, 1.0)

    def _quantile(self, p: np.ndarray) -> np.ndarray:
        return 2.0 * p

    def tail_first_moment(self, t: float) -> float:
        t = min(max(t, 0.0), 2.0)
        return (4.0 - t * t) / 4.0


@dataclass(frozen=True)
class RayleighPower(ChannelDistribution):
    kind: DistributionKind = field(default=DistributionKind.RAYLEIGH, init=False)
    support_max: float = field(default=math.inf, init=False)

    @property
    def pdf_max(self) -> float:
        return 1.0

    def _pdf(self, h: np.ndarray) -> np.ndarray:
        return np.exp(-h)

    def _cdf(self, h: np.ndarray) -> np.ndarray:
        return -np.expm1(-h)

    def _quantile(self, p: np.ndarray) -> np.ndarray:
        return -np.log1p(-p)

    def tail_first_moment(self, t: float) -> float:
        t = max(t, 0.0)
        return (t + 1.0) * math.exp(-t)


@dataclass(frozen=True)
class TabulatedPower(ChannelDistribution):
    """Piecewise-linear cdf through a tabulated pdf, rescaled to unit mean.

    The tabulated pdf is integrated with the trapezoid rule to get cdf knots;
    the density used everywhere is the slope of the interpolated cdf, so it is
    constant on each grid cell.
    """

    grid: tuple[float, ...]
    density: tuple[float, ...]
    kind: DistributionKind = field(default=DistributionKind.TABULATED, init=False)
    support_max: float = field(default=math.inf, init=False)
    _knots: np.ndarray = field(init=False, repr=False, compare=False)
    _cells: np.ndarray = field(init=False, repr=False, compare=False)
    _cdf_knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        knots = np.asarray(self.grid, dtype=float)
        cells = np.asarray(self.density, dtype=float)
        if knots.size < 2 or cells.size != knots.size - 1:
            raise InvalidInput("tabulated law needs one density per grid cell")
        mass = np.concatenate(([0.0], np.cumsum(cells * np.diff(knots))))
        mass[-1] = 1.0
        full = np.nonzero(mass >= 1.0 - 1e-15)[0][0]
        object.__setattr__(self, "_knots", knots)
        object.__setattr__(self, "_cells", cells)
        object.__setattr__(self, "_cdf_knots", mass)
        object.__setattr__(self, "support_max", float(knots[full]))

    @classmethod
    def from_table(cls, h, pdf) -> TabulatedPower:
        h = np.asarray(h, dtype=float)
        pdf = np.asarray(pdf, dtype=float)
        if h.ndim != 1 or h.shape != pdf.shape or h.size < 2:
            raise InvalidInput("table needs at least two (h, pdf) rows")
        if np.any(h < 0) or np.any(pdf < 0):
            raise InvalidInput("table entries must be nonnegative")
        if np.any(np.diff(h) <= 0):
            raise InvalidInput("table h column must be strictly increasing")
        widths = np.diff(h)
        cell_mass = 0.5 * (pdf[:-1] + pdf[1:]) * widths
        total = cell_mass.sum()
        if total <= 0:
            raise InvalidInput("table pdf integrates to zero")
        cells = cell_mass / total / widths
        mean = float(np.sum(cells * (h[1:] ** 2 - h[:-1] ** 2)) / 2.0)
        if abs(mean - 1.0) > 1e-6:
            logging.getLogger(__name__).info(
                "Rescaling tabulated law with mean %.6g to unit mean.", mean
            )
        return cls(grid=tuple(h / mean), density=tuple(cells * mean))

    @property
    def pdf_max(self) -> float:
        return float(self._cells.max())

    def _pdf(self, h: np.ndarray) -> np.ndarray:
        index = np.searchsorted(self._knots, h, side="right") - 1
        index = np.where(h == self._knots[-1], self._cells.size - 1, index)
        inside = (index >= 0) & (index < self._cells.size)
        return np.where(inside, self._cells[np.clip(index, 0, self._cells.size - 1)], 0.0)

    def _cdf(self, h: np.ndarray) -> np.ndarray:
        return np.interp(h, self._knots, self._cdf_knots, left=0.0, right=1.0)

    def _quantile(self, p: np.ndarray) -> np.ndarray:
        upper = np.clip(np.searchsorted(self._cdf_knots, p, side="left"), 1, self._knots.size - 1)
        cell = upper - 1
        slope = self._cells[cell]
        offset = np.divide(
            p - self._cdf_knots[cell],
            slope,
            out=np.zeros_like(p, dtype=float),
            where=slope > 0,
        )
        return np.where(p <= 0.0, 0.0, self._knots[cell] + offset)

    def breakpoints(self) -> np.ndarray:
        return self._knots

    def tail_first_moment(self, t: float) -> float:
        lower = np.maximum(self._knots[:-1], t)
        upper = np.maximum(self._knots[1:], t)
        return float(np.sum(self._cells * (upper**2 - lower**2)) / 2.0)


def load_tabulated_csv(path: Path) -> TabulatedPower:
    rows: list[tuple[float, float]] = []
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise InvalidInput(f"{path}: empty file")
        try:
            [float(cell) for cell in header]
        except ValueError:
            pass
        else:
            raise InvalidInput(f"{path}: header row required")
        for line_no, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise InvalidInput(f"{path}:{line_no}: expected two columns (h, pdf)")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise InvalidInput(f"{path}:{line_no}: {exc}") from exc
    table = np.asarray(rows, dtype=float)
    if table.shape[0] < 2:
        raise InvalidInput(f"{path}: need at least two data rows")
    return TabulatedPower.from_table(table[:, 0], table[:, 1])


def distribution_from_name(name: str) -> ChannelDistribution:
    key = name.strip().lower()
    if key == DistributionKind.UNIFORM:
        return UniformPower()
    if key == DistributionKind.RAYLEIGH:
        return RayleighPower()
    raise InvalidInput(f"unknown distribution {name!r}")


@dataclass(frozen=True)
class LinkDistributions:
    sr: tuple[ChannelDistribution, ...]
    rd: ChannelDistribution

    @classmethod
    def identical(cls, dist: ChannelDistribution, n_sources: int) -> LinkDistributions:
        return cls(sr=(dist,) * n_sources, rd=dist)

    @property
    def all_rayleigh(self) -> bool:
        return all(d.kind == DistributionKind.RAYLEIGH for d in (*self.sr, self.rd))
