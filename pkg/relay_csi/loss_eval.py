from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from relay_csi.channel_models import ChannelDistribution, LinkDistributions
from relay_csi.errors import InvalidInput, MissingQuantizer, QuadratureFailure
from relay_csi.quantizer import QuantizationVector, quantize_many
from relay_csi.resource_alloc import (
    PERFECT_LINK,
    LinkCsi,
    NetworkConfig,
    QuantizedCsi,
    max_sum_rate_batch,
)
from relay_csi.rng import trial_uniforms
from relay_csi.settings import DEFAULT_SETTINGS, Settings


@dataclass(frozen=True)
class LossBreakdown:
    delta_q: float
    interval_terms: tuple[float, ...]
    tail_mass: float
    abs_error: float = 0.0

    def to_dict(self) -> dict:
        data = asdict(self)
        data["interval_terms"] = list(self.interval_terms)
        return data


@dataclass(frozen=True)
class MonteCarloReport:
    n_trials: int
    mean_perfect_rate: float
    mean_quantized_rate: float
    mean_achieved_rate: float
    mean_delta: float
    delta_stderr: float
    percent_lost: float
    percent_stderr: float

    @property
    def percent_achieved(self) -> float:
        return 100.0 - self.percent_lost

    def to_dict(self) -> dict:
        return asdict(self)


def _interval_term(
    lower: float,
    upper: float,
    c: float,
    dist: ChannelDistribution,
    settings: Settings,
) -> tuple[float, float]:
    if upper <= lower:
        return 0.0, 0.0
    scale = lower + c

    def integrand(h: float) -> float:
        return math.log1p((h - lower) / scale) * dist.pdf(h)

    knots = dist.breakpoints()
    inner = knots[(knots > lower) & (knots < upper)]
    points = inner[: settings.quad_subdivisions // 2] if inner.size else None
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, error = quad(
                integrand,
                lower,
                upper,
                epsabs=settings.quad_abs_tol,
                epsrel=settings.quad_rel_tol,
                limit=settings.quad_subdivisions,
                points=points,
            )
        except IntegrationWarning as exc:
            raise QuadratureFailure(
                f"quadrature on [{lower:.6g}, {upper:.6g}] did not converge: {exc}"
            ) from exc
    return max(value, 0.0), error


def delta_q(
    q: QuantizationVector,
    gamma: float,
    dist: ChannelDistribution,
    settings: Settings = DEFAULT_SETTINGS,
) -> LossBreakdown:
    """Expected log-ratio loss of ``q`` at average SNR ``gamma``.

    Integrates ``ln((h + 1/gamma) / (q[h] + 1/gamma)) f(h)`` one quantization
    interval at a time. For unbounded laws the top interval stops at the
    ``1 - tail_probability`` quantile and the dropped tail is bounded by
    ``tail_first_moment(T) / (q_{N-1} + 1/gamma)``.
    """
    if not gamma > 0:
        raise InvalidInput("average SNR must be positive")
    if q.levels[-1] >= dist.support_max:
        raise InvalidInput("quantizer top level lies outside the channel support")
    c = 1.0 / gamma
    bounds = q.boundaries()
    top = q.levels[-1]
    truncation_error = 0.0
    if dist.finite_support:
        bounds[-1] = dist.support_max
    else:
        cut = max(dist.truncation_point(settings.tail_probability), top)
        bounds[-1] = cut
        truncation_error = dist.tail_first_moment(cut) / (top + c)
    terms = []
    abs_error = truncation_error
    for lower, upper in zip(bounds[:-1], bounds[1:]):
        value, error = _interval_term(float(lower), float(upper), c, dist, settings)
        terms.append(value)
        abs_error += error
    return LossBreakdown(
        delta_q=math.fsum(terms),
        interval_terms=tuple(terms),
        tail_mass=1.0 - float(dist.cdf(top)),
        abs_error=abs_error,
    )


def delta_sir_bound(
    q: QuantizationVector,
    gamma_sr: float,
    gamma_rd: float,
    dist_sr: ChannelDistribution,
    dist_rd: ChannelDistribution,
    settings: Settings = DEFAULT_SETTINGS,
) -> float:
    """Source-relay loss bound weighted by ``1 - F_RD(alpha q[h])``.

    ``q[h]`` is constant on each interval, so the weight factors out of every
    interval term; the zero interval keeps weight one.
    """
    if not gamma_rd > 0:
        raise InvalidInput("average SNR must be positive")
    breakdown = delta_q(q, gamma_sr, dist_sr, settings)
    alpha = gamma_rd / gamma_sr
    weights = np.concatenate(([1.0], 1.0 - np.asarray(dist_rd.cdf(alpha * q.array))))
    return math.fsum(w * term for w, term in zip(weights, breakdown.interval_terms))


def delta_rd_bound(
    q: QuantizationVector,
    gamma_rd: float,
    n_sources: int,
    dist_rd: ChannelDistribution,
    settings: Settings = DEFAULT_SETTINGS,
) -> float:
    """Relaxed relay-destination term: ``N_S * delta(q)`` at ``gamma_RD / N_S``."""
    if n_sources < 1:
        raise InvalidInput("network needs at least one source")
    return n_sources * delta_q(q, gamma_rd / n_sources, dist_rd, settings).delta_q


def loss_upper_bound(
    cfg: NetworkConfig,
    quantizers: QuantizedCsi,
    dists: LinkDistributions,
    settings: Settings = DEFAULT_SETTINGS,
) -> float:
    _check_links(cfg, quantizers, dists)
    total = []
    for link, gamma_sr, dist_sr in zip(quantizers.sr, cfg.gamma_sr, dists.sr):
        if isinstance(link, QuantizationVector):
            total.append(
                delta_sir_bound(link, gamma_sr, cfg.gamma_rd, dist_sr, dists.rd, settings)
            )
    if isinstance(quantizers.rd, QuantizationVector):
        total.append(
            delta_rd_bound(quantizers.rd, cfg.gamma_rd, cfg.n_sources, dists.rd, settings)
        )
    return math.fsum(total)


def _check_links(cfg: NetworkConfig, quantizers: QuantizedCsi, dists: LinkDistributions) -> None:
    if len(quantizers.sr) != cfg.n_sources or len(dists.sr) != cfg.n_sources:
        raise MissingQuantizer("one quantizer and one law per source link are required")
    labels = [f"S{i + 1}-R" for i in range(cfg.n_sources)] + ["R-D"]
    for label, link in zip(labels, (*quantizers.sr, quantizers.rd)):
        if link is None:
            raise MissingQuantizer(f"no quantizer for link {label}")
        if isinstance(link, str) and link != PERFECT_LINK:
            raise InvalidInput(f"unknown CSI marker {link!r} for link {label}")


def _reported(link: LinkCsi, h: np.ndarray) -> np.ndarray:
    if isinstance(link, QuantizationVector):
        return quantize_many(link, h)[1]
    return h


@dataclass(frozen=True)
class _Moments:
    """Count, mean vector and co-moment matrix of a block of samples."""

    count: int
    mean: np.ndarray
    comoment: np.ndarray

    @classmethod
    def empty(cls, width: int) -> _Moments:
        return cls(0, np.zeros(width), np.zeros((width, width)))

    @classmethod
    def of(cls, samples: np.ndarray) -> _Moments:
        mean = samples.mean(axis=0)
        centered = samples - mean
        return cls(samples.shape[0], mean, centered.T @ centered)

    def merge(self, other: _Moments) -> _Moments:
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        count = self.count + other.count
        shift = other.mean - self.mean
        return _Moments(
            count,
            self.mean + shift * (other.count / count),
            self.comoment
            + other.comoment
            + np.outer(shift, shift) * (self.count * other.count / count),
        )


# column order of the per-trial sample matrix
_PERFECT, _GUARANTEED, _DELTA, _ACHIEVED = range(4)


def _simulate_chunk(
    cfg: NetworkConfig,
    quantizers: QuantizedCsi,
    dists: LinkDistributions,
    seed: int,
    start: int,
    stop: int,
) -> _Moments:
    n = cfg.n_sources
    uniforms = trial_uniforms(seed, start, stop, n + 1)
    h_sr = np.empty((stop - start, n))
    for i, dist in enumerate(dists.sr):
        h_sr[:, i] = dist.quantile(uniforms[:, i])
    h_rd = np.asarray(dists.rd.quantile(uniforms[:, n]))
    gamma_sr = np.asarray(cfg.gamma_sr)

    caps = gamma_sr * h_sr
    _, perfect = max_sum_rate_batch(caps, cfg.gamma_rd * h_rd)

    q_sr = np.column_stack([_reported(link, h_sr[:, i]) for i, link in enumerate(quantizers.sr)])
    q_rd = _reported(quantizers.rd, h_rd)
    shares, guaranteed = max_sum_rate_batch(gamma_sr * q_sr, cfg.gamma_rd * q_rd)

    achieved = np.sum(np.minimum(np.log1p(caps), np.log1p(shares)), axis=1)

    samples = np.column_stack((perfect, guaranteed, perfect - guaranteed, achieved))
    return _Moments.of(samples)


def monte_carlo_delta(
    cfg: NetworkConfig,
    quantizers: QuantizedCsi,
    dists: LinkDistributions,
    n_trials: int,
    seed: int,
    workers: int = 1,
    settings: Settings = DEFAULT_SETTINGS,
) -> MonteCarloReport:
    """Monte Carlo estimate of the sum-rate loss caused by quantized CSI.

    Trials are cut into fixed chunks of ``settings.chunk_size``; each chunk
    draws its own counter range and chunk moments are merged in trial order,
    so the report does not depend on ``workers``.
    """
    if n_trials < 1:
        raise InvalidInput("n_trials must be positive")
    if workers < 1:
        raise InvalidInput("workers must be positive")
    _check_links(cfg, quantizers, dists)
    step = settings.chunk_size
    starts = range(0, n_trials, step)

    def run_chunk(start: int) -> _Moments:
        return _simulate_chunk(cfg, quantizers, dists, seed, start, min(start + step, n_trials))

    if workers == 1 or len(starts) == 1:
        chunks = [run_chunk(start) for start in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_chunk, starts))
    moments = _Moments.empty(4)
    for chunk in chunks:
        moments = moments.merge(chunk)

    count = moments.count
    mean = moments.mean
    covariance = moments.comoment / (count - 1) if count > 1 else np.zeros((4, 4))
    delta_stderr = math.sqrt(max(covariance[_DELTA, _DELTA], 0.0) / count)
    perfect = mean[_PERFECT]
    if perfect > 0:
        ratio = mean[_DELTA] / perfect
        # delta method for the ratio of two means
        spread = (
            covariance[_DELTA, _DELTA]
            - 2.0 * ratio * covariance[_DELTA, _PERFECT]
            + ratio * ratio * covariance[_PERFECT, _PERFECT]
        ) / (perfect * perfect)
        percent_lost = 100.0 * ratio
        percent_stderr = 100.0 * math.sqrt(max(spread, 0.0) / count)
    else:
        percent_lost = 0.0
        percent_stderr = 0.0
    report = MonteCarloReport(
        n_trials=count,
        mean_perfect_rate=float(perfect),
        mean_quantized_rate=float(mean[_GUARANTEED]),
        mean_achieved_rate=float(mean[_ACHIEVED]),
        mean_delta=float(mean[_DELTA]),
        delta_stderr=delta_stderr,
        percent_lost=float(percent_lost),
        percent_stderr=percent_stderr,
    )
    logging.getLogger(__name__).info(
        "MC %d trials: %.4f%% lost (+/- %.4f), seed %d",
        count,
        report.percent_lost,
        report.percent_stderr,
        seed,
    )
    return report
