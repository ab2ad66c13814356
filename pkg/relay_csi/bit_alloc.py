"""Feedback-bit allocation across the links of a relay network.

Each link's loss is modelled as ``eta * 2**-k`` for ``k`` feedback bits. The
greedy allocator hands out bits one at a time to the link with the largest
current term; links are indexed sources first, then the relay-destination link.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Sequence

import numpy as np

from relay_csi.channel_models import ChannelDistribution
from relay_csi.errors import BudgetTooSmall, InvalidInput, InvalidRatio
from relay_csi.quantizer import design_general, levels_for_bits
from relay_csi.resource_alloc import NetworkConfig
from relay_csi.settings import DEFAULT_SETTINGS, Settings


class CentralNode(StrEnum):
    EXTERNAL = "external"
    RELAY = "relay"
    DESTINATION = "destination"


@dataclass(frozen=True)
class LossCoefficients:
    eta_sr: tuple[float, ...]
    eta_rd: float
    alpha: tuple[float, ...]
    beta: float
    c_q: float = 1.0
    rd_heuristic: bool = False

    @property
    def n_sources(self) -> int:
        return len(self.eta_sr)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray((*self.eta_sr, self.eta_rd), dtype=float)

    def to_dict(self) -> dict:
        return {
            "eta_sr": list(self.eta_sr),
            "eta_rd": self.eta_rd,
            "alpha": list(self.alpha),
            "beta": self.beta,
            "c_q": self.c_q,
            "rd_heuristic": self.rd_heuristic,
        }


@dataclass(frozen=True)
class BitAllocation:
    """Bits per link; ``None`` marks a link whose CSI is known exactly."""

    k_sr: tuple[int | None, ...]
    k_rd: int | None
    k_max: int
    bound_value: float
    coefficients: LossCoefficients
    node: CentralNode = CentralNode.EXTERNAL

    @property
    def bits(self) -> tuple[int | None, ...]:
        return (*self.k_sr, self.k_rd)

    def levels(self) -> tuple[int | None, ...]:
        return tuple(None if k is None else levels_for_bits(k) for k in self.bits)

    def to_dict(self) -> dict:
        return {
            "node": str(self.node),
            "k_sr": list(self.k_sr),
            "k_rd": self.k_rd,
            "k_max": self.k_max,
            "bound_value": self.bound_value,
            "eta": self.coefficients.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def loss_coefficients(
    cfg: NetworkConfig,
    r1: float | Sequence[float],
    c_q: float = 1.0,
    rd_heuristic: bool = False,
) -> LossCoefficients:
    """``eta_i = min(1, r1 / alpha_i) c_q`` and the Erlang-based ``eta_RD``.

    ``r1`` is either one ratio shared by all sources or one per source.
    """
    ratios = [float(r1)] * cfg.n_sources if np.isscalar(r1) else [float(r) for r in r1]
    if len(ratios) != cfg.n_sources:
        raise InvalidInput("one r1 per source link is required")
    if any(not r > 1.0 for r in ratios):
        raise InvalidRatio("r1 must exceed 1")
    if not c_q > 0:
        raise InvalidInput("c_q must be positive")
    alpha = tuple(cfg.gamma_rd / g for g in cfg.gamma_sr)
    beta = 2.0 * cfg.gamma_rd / math.fsum(cfg.gamma_sr)
    n = cfg.n_sources
    eta_sr = tuple(min(1.0, r / a) * c_q for r, a in zip(ratios, alpha))
    eta_rd = n * (1.0 - (beta / (beta + 1.0)) ** (2 * n)) * c_q
    return LossCoefficients(
        eta_sr=eta_sr,
        eta_rd=eta_rd,
        alpha=alpha,
        beta=beta,
        c_q=c_q,
        rd_heuristic=rd_heuristic,
    )


def nominal_r1(
    gamma_sr: float,
    dist: ChannelDistribution,
    settings: Settings = DEFAULT_SETTINGS,
) -> float:
    q = design_general(settings.nominal_levels, gamma_sr, dist)
    return q.ratios[1]


def allocation_bound(weights: Sequence[float], bits: Sequence[int]) -> float:
    """``sum eta_m 2**-k_m`` summed exactly in link order."""
    return math.fsum(math.ldexp(float(w), -int(k)) for w, k in zip(weights, bits))


def _greedy_bits(weights: np.ndarray, k_max: int) -> list[int]:
    bits = np.ones(weights.size, dtype=int)
    for _ in range(k_max - weights.size):
        # argmax keeps the first of equal terms
        bits[int(np.argmax(np.ldexp(weights, -bits)))] += 1
    return [int(k) for k in bits]


def greedy_allocate(eta: LossCoefficients, k_max: int) -> BitAllocation:
    weights = eta.weights
    if k_max < weights.size:
        raise BudgetTooSmall(f"k_max={k_max} cannot give every one of {weights.size} links a bit")
    bits = _greedy_bits(weights, k_max)
    return BitAllocation(
        k_sr=tuple(bits[:-1]),
        k_rd=bits[-1],
        k_max=k_max,
        bound_value=allocation_bound(weights, bits),
        coefficients=eta,
    )


def uniform_allocate(eta: LossCoefficients, k_max: int) -> BitAllocation:
    """Equal bits per link; leftover bits go to the lowest link indices."""
    weights = eta.weights
    links = weights.size
    if k_max < links:
        raise BudgetTooSmall(f"k_max={k_max} cannot give every one of {links} links a bit")
    share, extra = divmod(k_max, links)
    bits = [share + (1 if m < extra else 0) for m in range(links)]
    return BitAllocation(
        k_sr=tuple(bits[:-1]),
        k_rd=bits[-1],
        k_max=k_max,
        bound_value=allocation_bound(weights, bits),
        coefficients=eta,
    )


def central_node_variant(
    cfg: NetworkConfig,
    eta: LossCoefficients,
    k_max: int,
    node: CentralNode,
) -> BitAllocation:
    """Allocation when the power split is computed at ``node``.

    The relay knows its source links exactly and the destination knows the
    relay-destination link exactly, so those links need no feedback bits.
    """
    if eta.n_sources != cfg.n_sources:
        raise InvalidInput("loss coefficients do not match the network size")
    node = CentralNode(node)
    if node == CentralNode.EXTERNAL:
        return greedy_allocate(eta, k_max)
    if node == CentralNode.RELAY:
        if k_max < 1:
            raise BudgetTooSmall("the relay-destination link needs at least one bit")
        return BitAllocation(
            k_sr=(None,) * cfg.n_sources,
            k_rd=k_max,
            k_max=k_max,
            bound_value=allocation_bound([eta.eta_rd], [k_max]),
            coefficients=eta,
            node=node,
        )
    if k_max < cfg.n_sources:
        raise BudgetTooSmall(f"k_max={k_max} cannot give each of {cfg.n_sources} sources a bit")
    weights = np.asarray(eta.eta_sr, dtype=float)
    bits = _greedy_bits(weights, k_max)
    return BitAllocation(
        k_sr=tuple(bits),
        k_rd=None,
        k_max=k_max,
        bound_value=allocation_bound(weights, bits),
        coefficients=eta,
        node=node,
    )
