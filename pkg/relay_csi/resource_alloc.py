from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from relay_csi.errors import InvalidInput, MissingQuantizer
from relay_csi.quantizer import QuantizationVector, quantize

PERFECT_LINK = "perfect"

LinkCsi = QuantizationVector | Literal["perfect"]


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    gamma_sr: tuple[float, ...]
    gamma_rd: float

    def __post_init__(self) -> None:
        if len(self.gamma_sr) < 1:
            raise InvalidInput("network needs at least one source")
        if any(not g > 0 for g in self.gamma_sr) or not self.gamma_rd > 0:
            raise InvalidInput("average SNRs must be positive")
        object.__setattr__(self, "gamma_sr", tuple(float(g) for g in self.gamma_sr))
        object.__setattr__(self, "gamma_rd", float(self.gamma_rd))

    @property
    def n_sources(self) -> int:
        return len(self.gamma_sr)

    @classmethod
    def from_db(cls, gamma_sr_db: Sequence[float], gamma_rd_db: float) -> NetworkConfig:
        return cls(
            gamma_sr=tuple(db_to_linear(g) for g in gamma_sr_db),
            gamma_rd=db_to_linear(gamma_rd_db),
        )


@dataclass(frozen=True)
class ChannelRealization:
    h_sr: tuple[float, ...]
    h_rd: float

    def __post_init__(self) -> None:
        if any(h < 0 for h in self.h_sr) or self.h_rd < 0:
            raise InvalidInput("channel powers must be nonnegative")


@dataclass(frozen=True)
class QuantizedCsi:
    """Per-link quantizers; ``PERFECT_LINK`` marks a link known exactly."""

    sr: tuple[LinkCsi | None, ...]
    rd: LinkCsi | None


@dataclass(frozen=True)
class PowerAllocation:
    p: tuple[float, ...]
    water_level: float
    sum_rate_nats: float
    surplus: float = 0.0
    achieved_rate_nats: float | None = None


def water_fill(caps: np.ndarray, budget: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise capped water-filling.

    ``caps`` has shape (T, N) and ``budget`` shape (T,). Returns the shares
    ``min(caps, nu)``, the water level ``nu`` and the unused budget. When all
    caps fit in the budget the shares equal the caps, ``nu`` is the largest
    cap and the rest is reported as surplus.
    """
    caps = np.asarray(caps, dtype=float)
    budget = np.asarray(budget, dtype=float)
    rows, n = caps.shape
    ordered = np.sort(caps, axis=1)
    prefix = np.zeros((rows, n + 1))
    np.cumsum(ordered, axis=1, out=prefix[:, 1:])
    # budget consumed when the water level sits on the k-th smallest cap
    used = prefix[:, :n] + (n - np.arange(n)) * ordered
    k = np.argmax(used >= budget[:, None], axis=1)
    index = np.arange(rows)
    level = (budget - prefix[index, k]) / (n - k)
    total = prefix[:, n]
    saturated = total <= budget
    level = np.where(saturated, ordered[:, -1], level)
    shares = np.minimum(caps, level[:, None])
    surplus = np.where(saturated, budget - total, 0.0)
    return shares, level, surplus


def max_sum_rate(caps: Sequence[float], budget: float) -> PowerAllocation:
    caps_array = np.asarray(caps, dtype=float)
    if caps_array.ndim != 1 or caps_array.size == 0:
        raise InvalidInput("caps must be a nonempty vector")
    if np.any(caps_array < 0) or budget < 0 or not np.all(np.isfinite(caps_array)):
        raise InvalidInput("caps and budget must be finite and nonnegative")
    shares, level, surplus = water_fill(caps_array[None, :], np.array([float(budget)]))
    p = shares[0]
    rate = float(np.sum(np.log1p(p)))
    return PowerAllocation(
        p=tuple(float(x) for x in p),
        water_level=float(level[0]),
        sum_rate_nats=rate,
        surplus=float(surplus[0]),
        achieved_rate_nats=rate,
    )


def max_sum_rate_batch(caps: np.ndarray, budget: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shares and sum rates for many independent instances at once."""
    shares, _, _ = water_fill(caps, budget)
    return shares, np.sum(np.log1p(shares), axis=1)


def caps_cover_shares(caps: Sequence[float], allocation: PowerAllocation, tol: float = 1e-9) -> bool:
    """If a share sits below its cap with the budget spent, the caps cover the shares."""
    caps_array = np.asarray(caps, dtype=float)
    p = np.asarray(allocation.p)
    if allocation.surplus > tol or not np.any(p < caps_array - tol):
        return True
    return bool(caps_array.sum() >= p.sum() - tol)


def _quantized_value(link: LinkCsi | None, h: float, label: str) -> float:
    if link is None:
        raise MissingQuantizer(f"no quantizer for link {label}")
    if isinstance(link, str):
        if link != PERFECT_LINK:
            raise InvalidInput(f"unknown CSI marker {link!r} for link {label}")
        return h
    return quantize(link, h)[1]


def solve_realization(
    cfg: NetworkConfig,
    real: ChannelRealization,
    csi: QuantizedCsi | None = None,
) -> PowerAllocation:
    """Relay power split for one channel draw; ``csi=None`` means perfect CSI.

    With quantized CSI ``sum_rate_nats`` is the guaranteed rate of the
    quantized problem. ``achieved_rate_nats`` is
    ``sum_i min(ln(1 + gamma_sr_i h_sr_i), ln(1 + p_i))``: the same shares
    checked against the true source-relay caps.
    """
    if len(real.h_sr) != cfg.n_sources:
        raise InvalidInput("realization does not match the network size")
    true_caps = np.asarray(cfg.gamma_sr) * np.asarray(real.h_sr)
    true_budget = cfg.gamma_rd * real.h_rd
    if csi is None:
        return max_sum_rate(true_caps, true_budget)
    if len(csi.sr) != cfg.n_sources:
        raise MissingQuantizer("one source-relay quantizer per source is required")
    q_sr = [
        _quantized_value(link, h, f"S{i + 1}-R")
        for i, (link, h) in enumerate(zip(csi.sr, real.h_sr))
    ]
    q_rd = _quantized_value(csi.rd, real.h_rd, "R-D")
    caps = np.asarray(cfg.gamma_sr) * np.asarray(q_sr)
    guaranteed = max_sum_rate(caps, cfg.gamma_rd * q_rd)
    achieved = float(np.sum(np.minimum(np.log1p(true_caps), np.log1p(np.asarray(guaranteed.p)))))
    return PowerAllocation(
        p=guaranteed.p,
        water_level=guaranteed.water_level,
        sum_rate_nats=guaranteed.sum_rate_nats,
        surplus=guaranteed.surplus,
        achieved_rate_nats=achieved if math.isfinite(achieved) else 0.0,
    )
