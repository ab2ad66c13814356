"""Scalar quantizer design for normalized channel power.

A quantizer is described by its nonzero levels ``q_0 < ... < q_{N-1}``; the
implicit boundaries are ``q_{-1} = 0`` and ``q_N = support_max``. A channel
value in ``[q_{n-1}, q_n)`` is reported as index ``n`` and mapped back to the
lower boundary ``q_{n-1}``, so the quantized value never exceeds the truth.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from relay_csi.channel_models import ChannelDistribution, DistributionKind
from relay_csi.errors import (
    DegenerateKappa,
    DesignInfeasible,
    InvalidInput,
    InvalidRatio,
    NoConvergence,
    NumericalError,
    TooFewLevels,
)
from relay_csi.settings import DEFAULT_SETTINGS, Settings

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class RatioSequence:
    """Ratios ``r_0..r_N`` with ``r_i = 1 + ln r_{i-1}``.

    Stored as the excess ``r_i - 1`` so that long sequences close to one keep
    full precision.
    """

    excess: tuple[float, ...]

    @property
    def r(self) -> tuple[float, ...]:
        return tuple(1.0 + s for s in self.excess)

    def __len__(self) -> int:
        return len(self.excess)

    def __getitem__(self, index: int) -> float:
        return 1.0 + self.excess[index]


@dataclass(frozen=True)
class QuantizationVector:
    levels: tuple[float, ...]
    gamma_design: float | None
    support_max: float
    method: str = "custom"
    ratios: RatioSequence | None = field(default=None, compare=False, repr=False)
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        array = np.asarray(self.levels, dtype=float)
        if array.ndim != 1 or array.size == 0:
            raise InvalidInput("a quantizer needs at least one level")
        if not np.all(np.isfinite(array)):
            raise InvalidInput("quantization levels must be finite")
        if array[0] <= 0.0:
            raise InvalidInput("the first level must be positive")
        if np.any(np.diff(array) <= 0.0):
            raise InvalidInput("quantization levels must be strictly increasing")
        if array[-1] >= self.support_max:
            raise InvalidInput("the top level must lie below the support end")
        if self.gamma_design is not None and not self.gamma_design > 0:
            raise InvalidInput("design SNR must be positive")
        object.__setattr__(self, "levels", tuple(float(x) for x in array))
        object.__setattr__(self, "_array", array)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def array(self) -> np.ndarray:
        return self._array

    def boundaries(self) -> np.ndarray:
        """``[q_{-1}, q_0, ..., q_{N-1}, q_N]``."""
        return np.concatenate(([0.0], self._array, [self.support_max]))

    def to_dict(self) -> dict[str, Any]:
        support = "inf" if math.isinf(self.support_max) else self.support_max
        return {"gamma": self.gamma_design, "levels": list(self.levels), "support_max": support}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> QuantizationVector:
        try:
            levels = tuple(float(x) for x in data["levels"])
            support = data["support_max"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed quantization vector: {exc}") from exc
        support_max = math.inf if support == "inf" else float(support)
        gamma = data.get("gamma")
        return cls(
            levels=levels,
            gamma_design=None if gamma is None else float(gamma),
            support_max=support_max,
        )

    @classmethod
    def from_json(cls, text: str) -> QuantizationVector:
        return cls.from_dict(json.loads(text))


def _excess_sequence(s0: float, n: int) -> np.ndarray:
    excess = np.empty(n + 1)
    excess[0] = s0
    for i in range(1, n + 1):
        excess[i] = math.log1p(excess[i - 1])
    return excess


def iterate_ratios(r0: float, n: int) -> RatioSequence:
    if not r0 > 1.0:
        raise InvalidRatio(f"r0 must exceed 1, got {r0}")
    if n < 1:
        raise InvalidInput("ratio sequence length must be positive")
    return RatioSequence(tuple(_excess_sequence(r0 - 1.0, n)))


def design_ratios(
    n_levels: int,
    gamma: float,
    kappa: float,
    settings: Settings = DEFAULT_SETTINGS,
) -> RatioSequence:
    """Solve ``prod_{n=0}^{N} r_n = kappa * gamma + 1`` for ``r_0``.

    The product is increasing in ``r_0``, so a bracketed root in
    ``log(r_0 - 1)`` is always safe. The lower end ``target / (N + 1)`` keeps
    the product below the target since ``log1p(s) < s``.
    """
    if n_levels < 1:
        raise InvalidInput("number of levels must be positive")
    if not gamma > 0:
        raise InvalidInput("average SNR must be positive")
    if not kappa > 0:
        raise DegenerateKappa(f"kappa must be positive, got {kappa}")
    target = math.log1p(kappa * gamma)

    def excess_product(log_s0: float) -> float:
        excess = _excess_sequence(math.exp(log_s0), n_levels)
        return float(np.sum(np.log1p(excess))) - target

    low = math.log(target / (n_levels + 1))
    high = math.log(kappa * gamma)
    if not (excess_product(low) < 0.0 < excess_product(high)):
        raise DesignInfeasible(
            f"no root of the ratio product equation for N={n_levels}, gamma={gamma}"
        )
    try:
        log_s0 = brentq(
            excess_product,
            low,
            high,
            xtol=settings.root_xtol,
            rtol=settings.root_rtol,
            maxiter=500,
        )
    except ValueError as exc:
        raise DesignInfeasible(f"ratio product equation for N={n_levels}: {exc}") from exc
    except RuntimeError as exc:
        raise NoConvergence(f"ratio product equation for N={n_levels}: {exc}", math.nan) from exc
    excess = _excess_sequence(math.exp(log_s0), n_levels)
    logging.getLogger(__name__).debug(
        "r0=%.12g for N=%d gamma=%.6g kappa=%.6g", 1.0 + excess[0], n_levels, gamma, kappa
    )
    return RatioSequence(tuple(excess))


def levels_from_ratios(ratios: RatioSequence, gamma: float) -> np.ndarray:
    """``q_n = (prod_{i<=n} r_i - 1) / gamma`` for ``n = 0..N-1``."""
    cumulative = np.cumsum(np.log1p(np.asarray(ratios.excess)))
    return np.expm1(cumulative[:-1]) / gamma


def kappa_star(n_levels: int, dist: ChannelDistribution) -> float:
    """Top-of-range constant for the product equation.

    The uniform law pins ``q_N`` to its support end, the exact condition for
    that law. Every other law, tabulated ones included, uses
    ``F^{-1}(1 - 1/N)`` so the top level tracks the tail at the given N.
    """
    if n_levels < 2:
        raise TooFewLevels("the consistency constant needs N >= 2")
    if dist.kind == DistributionKind.UNIFORM:
        kappa = dist.support_max
    else:
        kappa = float(dist.quantile(1.0 - 1.0 / n_levels))
    if not kappa > 0:
        raise DegenerateKappa(f"kappa* = {kappa} for N={n_levels}")
    return kappa


def design_uniform(n_levels: int, gamma: float) -> QuantizationVector:
    ratios = design_ratios(n_levels, gamma, 2.0)
    return QuantizationVector(
        levels=tuple(levels_from_ratios(ratios, gamma)),
        gamma_design=gamma,
        support_max=2.0,
        method="uniform",
        ratios=ratios,
    )


def design_general(
    n_levels: int,
    gamma: float,
    dist: ChannelDistribution,
    kappa: float | None = None,
) -> QuantizationVector:
    if n_levels < 2:
        raise TooFewLevels("the general designer needs N >= 2")
    if kappa is None:
        kappa = kappa_star(n_levels, dist)
    elif not kappa > 0:
        raise DegenerateKappa(f"kappa must be positive, got {kappa}")
    ratios = design_ratios(n_levels, gamma, kappa)
    return QuantizationVector(
        levels=tuple(levels_from_ratios(ratios, gamma)),
        gamma_design=gamma,
        support_max=dist.support_max,
        method="general",
        ratios=ratios,
    )


def design_max_entropy(
    n_levels: int,
    dist: ChannelDistribution,
    gamma: float | None = None,
) -> QuantizationVector:
    if n_levels < 1:
        raise InvalidInput("number of levels must be positive")
    probabilities = np.arange(1, n_levels + 1) / (n_levels + 1)
    return QuantizationVector(
        levels=tuple(np.asarray(dist.quantile(probabilities), dtype=float)),
        gamma_design=gamma,
        support_max=dist.support_max,
        method="max-entropy",
    )


def optimality_residuals(
    q: QuantizationVector, gamma: float, dist: ChannelDistribution
) -> np.ndarray:
    """Relative residual of the stationarity condition at every level."""
    c = 1.0 / gamma
    bounds = q.boundaries()
    levels = bounds[1:-1]
    lower = bounds[:-2]
    upper_cdf = np.asarray(dist.cdf(np.minimum(bounds[2:], dist.support_max)), dtype=float)
    upper_cdf[-1] = 1.0
    lhs = (levels + c) * np.log((levels + c) / (lower + c))
    rhs = (upper_cdf - np.asarray(dist.cdf(levels))) / np.asarray(dist.pdf(levels))
    return np.abs(lhs - rhs) / np.abs(rhs)


def _solve_level(
    lower: float,
    upper: float,
    upper_cdf: float,
    c: float,
    dist: ChannelDistribution,
    settings: Settings,
) -> float:
    def stationarity(x: float) -> float:
        return (x + c) * math.log((x + c) / (lower + c)) - (
            upper_cdf - dist.cdf(x)
        ) / dist.pdf(x)

    if math.isinf(upper):
        upper = max(2.0 * lower, lower + 1.0)
        for _ in range(200):
            if stationarity(upper) > 0.0:
                break
            upper *= 2.0
        else:
            raise DesignInfeasible("could not bracket the top quantization level")
    try:
        return brentq(stationarity, lower, upper, xtol=1e-300, rtol=settings.root_rtol, maxiter=500)
    except ValueError as exc:
        raise DesignInfeasible(f"level between {lower:.6g} and {upper:.6g}: {exc}") from exc
    except RuntimeError as exc:
        raise NoConvergence(f"level between {lower:.6g} and {upper:.6g}: {exc}", math.nan) from exc


def design_fixed_point(
    n_levels: int,
    gamma: float,
    dist: ChannelDistribution,
    settings: Settings = DEFAULT_SETTINGS,
) -> QuantizationVector:
    """Levels satisfying the exact stationarity condition, by Gauss-Seidel sweeps.

    Each sweep re-solves level ``n`` with its two neighbours held fixed. The
    sweep starts from the closed-form design (max-entropy when N = 1).
    """
    if not gamma > 0:
        raise InvalidInput("average SNR must be positive")
    if n_levels >= 2:
        start = design_general(n_levels, gamma, dist)
    else:
        start = design_max_entropy(n_levels, dist, gamma)
    c = 1.0 / gamma
    levels = np.array(start.levels)
    residual = math.inf
    for sweep in range(1, settings.fixed_point_max_sweeps + 1):
        previous = levels.copy()
        for n in range(n_levels):
            lower = levels[n - 1] if n > 0 else 0.0
            if n < n_levels - 1:
                upper = levels[n + 1]
                upper_cdf = dist.cdf(upper)
            else:
                upper = dist.support_max
                upper_cdf = 1.0
            levels[n] = _solve_level(lower, upper, upper_cdf, c, dist, settings)
        change = float(np.max(np.abs(levels - previous) / previous))
        if change < settings.fixed_point_tol:
            candidate = QuantizationVector(
                levels=tuple(levels),
                gamma_design=gamma,
                support_max=dist.support_max,
                method="fixed-point",
            )
            residual = float(np.max(optimality_residuals(candidate, gamma, dist)))
            if residual < RESIDUAL_TOL:
                logging.getLogger(__name__).debug(
                    "Fixed point for N=%d gamma=%.6g after %d sweeps", n_levels, gamma, sweep
                )
                return candidate
        else:
            residual = change
    raise NoConvergence(
        f"fixed-point design did not converge in {settings.fixed_point_max_sweeps} sweeps",
        residual,
    )


def design_proposed(
    n_levels: int,
    gamma: float,
    dist: ChannelDistribution,
    settings: Settings = DEFAULT_SETTINGS,
) -> QuantizationVector:
    """SNR-adaptive quantizer.

    Up to ``settings.fixed_point_max_levels`` levels the closed form is refined
    to the exact stationary point; the plug-in ``kappa*`` puts the top levels
    too low at small N. N = 1 always uses the fixed point.
    """
    if n_levels < 2:
        return design_fixed_point(n_levels, gamma, dist, settings)
    if n_levels > settings.fixed_point_max_levels:
        return design_general(n_levels, gamma, dist)
    try:
        return design_fixed_point(n_levels, gamma, dist, settings)
    except NumericalError as exc:
        logging.getLogger(__name__).warning(
            "Keeping the closed-form design for N=%d gamma=%.6g: %s", n_levels, gamma, exc
        )
        return design_general(n_levels, gamma, dist)


def levels_for_bits(bits: int) -> int:
    if bits < 1:
        raise InvalidInput("a link needs at least one bit")
    return 2**bits - 1


def quantize(q: QuantizationVector, h: float) -> tuple[int, float]:
    if h < 0:
        raise InvalidInput("channel power must be nonnegative")
    index = int(np.searchsorted(q.array, h, side="right"))
    level = 0.0 if index == 0 else q.levels[index - 1]
    return index, level


def quantize_many(q: QuantizationVector, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    index = np.searchsorted(q.array, h, side="right")
    padded = np.concatenate(([0.0], q.array))
    return index, padded[index]
