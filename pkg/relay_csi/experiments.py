"""Experiment specs and the scenario runner.

A spec is one JSON document. ``run`` writes a CSV named after the scenario and
a ``manifest.json`` next to it; identical specs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np
from scipy.stats import linregress

from relay_csi import __version__
from relay_csi.bit_alloc import (
    BitAllocation,
    CentralNode,
    central_node_variant,
    greedy_allocate,
    loss_coefficients,
    nominal_r1,
    uniform_allocate,
)
from relay_csi.channel_models import (
    ChannelDistribution,
    DistributionKind,
    LinkDistributions,
    distribution_from_name,
    load_tabulated_csv,
)
from relay_csi.errors import InvalidInput, SpecValidation
from relay_csi.loss_eval import delta_q, loss_upper_bound, monte_carlo_delta
from relay_csi.quantizer import (
    QuantizationVector,
    design_general,
    design_max_entropy,
    design_proposed,
    design_uniform,
    levels_for_bits,
)
from relay_csi.resource_alloc import PERFECT_LINK, NetworkConfig, QuantizedCsi, db_to_linear
from relay_csi.settings import DEFAULT_SETTINGS, Settings

logger = logging.getLogger(__name__)

MAX_SEED = 2**64


class Scenario(StrEnum):
    ADAPTIVE_VS_FIXED = "AdaptiveVsFixed"
    LOSS_RATIO_VS_SNR = "LossRatioVsSnr"
    DECAY_VS_N = "DecayVsN"
    BIT_ALLOCATION_SWEEP = "BitAllocationSweep"
    CENTRAL_NODE_COMPARISON = "CentralNodeComparison"
    CUSTOM = "Custom"

    @property
    def file_stem(self) -> str:
        stem = "".join(f"_{ch.lower()}" if ch.isupper() else ch for ch in self.value)
        return stem.lstrip("_")


_COLUMNS = {
    Scenario.ADAPTIVE_VS_FIXED: (
        "scenario", "seed", "snr_db", "n_levels", "quantizer", "delta_nats", "delta_bits",
    ),
    Scenario.LOSS_RATIO_VS_SNR: (
        "scenario", "seed", "snr_db", "n_levels", "quantizer", "delta_nats", "delta_bits",
        "percent_lost", "stderr",
    ),
    Scenario.DECAY_VS_N: ("scenario", "seed", "snr_db", "n_levels", "delta_nats"),
    Scenario.BIT_ALLOCATION_SWEEP: (
        "scenario", "seed", "k_max", "allocator", "quantizer", "percent_achieved", "stderr",
    ),
    Scenario.CENTRAL_NODE_COMPARISON: (
        "scenario", "seed", "node", "k_max", "bound_value", "mc_percent_achieved", "stderr",
    ),
    Scenario.CUSTOM: (
        "scenario", "seed", "n_levels", "delta_nats", "delta_stderr", "percent_lost",
        "percent_stderr", "achieved_nats", "bound_nats",
    ),
}

# scenarios that need each grid
_USES_SNR = {
    Scenario.ADAPTIVE_VS_FIXED,
    Scenario.LOSS_RATIO_VS_SNR,
    Scenario.DECAY_VS_N,
}
_USES_N = {Scenario.ADAPTIVE_VS_FIXED, Scenario.DECAY_VS_N, Scenario.CUSTOM}
_USES_K = {Scenario.BIT_ALLOCATION_SWEEP, Scenario.CENTRAL_NODE_COMPARISON}
_USES_MC = {
    Scenario.LOSS_RATIO_VS_SNR,
    Scenario.BIT_ALLOCATION_SWEEP,
    Scenario.CENTRAL_NODE_COMPARISON,
    Scenario.CUSTOM,
}
# scenarios whose adaptive quantizer is the closed-form general design
_GENERAL_DESIGN = {Scenario.ADAPTIVE_VS_FIXED, Scenario.DECAY_VS_N}

_DEFAULT_SNR = {
    Scenario.ADAPTIVE_VS_FIXED: tuple(float(x) for x in range(0, 41, 2)),
    Scenario.LOSS_RATIO_VS_SNR: tuple(float(x) for x in range(10, 31, 2)),
    Scenario.DECAY_VS_N: (10.0, 20.0),
}
_DEFAULT_N = {
    Scenario.ADAPTIVE_VS_FIXED: (3, 7),
    Scenario.DECAY_VS_N: (4, 8, 16, 32, 64, 128, 256),
    Scenario.CUSTOM: (1, 3, 7, 15),
}
_DEFAULT_K = {
    Scenario.BIT_ALLOCATION_SWEEP: tuple(range(3, 19)),
    Scenario.CENTRAL_NODE_COMPARISON: tuple(range(3, 13)),
}
_DEFAULT_LAW = {
    Scenario.ADAPTIVE_VS_FIXED: "uniform",
}

_TOP_KEYS = {
    "scenario",
    "network",
    "distributions",
    "snr_grid_db",
    "n_grid",
    "k_max_grid",
    "n_trials",
    "master_seed",
    "fixed_design_snr_db",
    "bits_per_link",
    "r1",
    "target_percent",
}
_NETWORK_KEYS = {"gamma_sr_db", "gamma_rd_db"}
_DIST_KEYS = {"sr", "rd"}


@dataclass(frozen=True)
class SpecWarning:
    code: str
    field: str
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "field": self.field, "message": self.message}


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: Scenario
    network: NetworkConfig
    distributions: LinkDistributions
    snr_grid_db: tuple[float, ...] = ()
    n_grid: tuple[int, ...] = ()
    k_max_grid: tuple[int, ...] = ()
    n_trials: int = DEFAULT_SETTINGS.default_trials
    master_seed: int = 1
    fixed_design_snr_db: float = DEFAULT_SETTINGS.fixed_design_snr_db
    bits_per_link: int = 2
    r1: float | None = None
    target_percent: float = DEFAULT_SETTINGS.target_percent
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def digest(self) -> str:
        canonical = json.dumps(self.source, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunSummary:
    scenario: Scenario
    csv_path: Path
    manifest_path: Path
    rows: int
    warnings: tuple[SpecWarning, ...]
    details: dict[str, Any]

    def to_dict(self) -> dict:
        return {
            "scenario": str(self.scenario),
            "csv": self.csv_path.name,
            "rows": self.rows,
            "warnings": [w.to_dict() for w in self.warnings],
            "details": self.details,
        }


def _reject_unknown(data: dict, allowed: set[str], prefix: str) -> None:
    for key in data:
        if key not in allowed:
            raise SpecValidation(f"{prefix}{key}", "unknown key")


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecValidation(path, "expected a number")
    if not math.isfinite(value):
        raise SpecValidation(path, "expected a finite number")
    return float(value)


def _integer(value: Any, path: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecValidation(path, "expected an integer")
    if value < minimum:
        raise SpecValidation(path, f"must be at least {minimum}")
    return value


def _grid(data: dict, key: str, default: tuple, as_int: bool) -> tuple:
    if key not in data:
        return default
    values = data[key]
    if not isinstance(values, list):
        raise SpecValidation(key, "expected a list")
    if as_int:
        return tuple(_integer(v, f"{key}[{i}]") for i, v in enumerate(values))
    return tuple(_number(v, f"{key}[{i}]") for i, v in enumerate(values))


def _law(value: Any, path: str, base_dir: Path) -> ChannelDistribution:
    if isinstance(value, str):
        try:
            return distribution_from_name(value)
        except InvalidInput as exc:
            raise SpecValidation(path, str(exc)) from exc
    if isinstance(value, dict):
        _reject_unknown(value, {DistributionKind.TABULATED.value}, f"{path}.")
        table = value.get(DistributionKind.TABULATED.value)
        if not isinstance(table, str):
            raise SpecValidation(f"{path}.tabulated", "expected a CSV path")
        try:
            return load_tabulated_csv(base_dir / table)
        except (OSError, InvalidInput) as exc:
            raise SpecValidation(f"{path}.tabulated", str(exc)) from exc
    raise SpecValidation(path, "expected a law name or {\"tabulated\": <csv>}")


def _distributions(
    value: Any, n_sources: int, default: str, base_dir: Path
) -> LinkDistributions:
    if value is None:
        return LinkDistributions.identical(distribution_from_name(default), n_sources)
    if not isinstance(value, dict) or _DIST_KEYS.isdisjoint(value):
        law = _law(value, "distributions", base_dir)
        return LinkDistributions.identical(law, n_sources)
    _reject_unknown(value, _DIST_KEYS, "distributions.")
    sr = value.get("sr", default)
    if isinstance(sr, list):
        if len(sr) != n_sources:
            raise SpecValidation("distributions.sr", f"expected {n_sources} laws")
        sr_laws = tuple(
            _law(v, f"distributions.sr[{i}]", base_dir) for i, v in enumerate(sr)
        )
    else:
        sr_laws = (_law(sr, "distributions.sr", base_dir),) * n_sources
    rd = _law(value.get("rd", default), "distributions.rd", base_dir)
    return LinkDistributions(sr=sr_laws, rd=rd)


def parse_spec(data: Any, base_dir: Path = Path(".")) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise SpecValidation("<root>", "expected a JSON object")
    _reject_unknown(data, _TOP_KEYS, "")
    try:
        scenario = Scenario(data.get("scenario"))
    except ValueError as exc:
        choices = ", ".join(s.value for s in Scenario)
        raise SpecValidation("scenario", f"expected one of {choices}") from exc

    network = data.get("network", {})
    if not isinstance(network, dict):
        raise SpecValidation("network", "expected an object")
    _reject_unknown(network, _NETWORK_KEYS, "network.")
    gamma_sr_db = network.get("gamma_sr_db", [25.0, 25.0])
    if not isinstance(gamma_sr_db, list) or not gamma_sr_db:
        raise SpecValidation("network.gamma_sr_db", "expected a nonempty list")
    gamma_sr_db = tuple(
        _number(v, f"network.gamma_sr_db[{i}]") for i, v in enumerate(gamma_sr_db)
    )
    gamma_rd_db = _number(network.get("gamma_rd_db", 20.0), "network.gamma_rd_db")
    config = NetworkConfig.from_db(gamma_sr_db, gamma_rd_db)

    default_law = _DEFAULT_LAW.get(scenario, "rayleigh")
    distributions = _distributions(
        data.get("distributions"), config.n_sources, default_law, base_dir
    )

    seed = data.get("master_seed", 1)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < MAX_SEED:
        raise SpecValidation("master_seed", "expected a 64-bit unsigned integer")
    r1 = data.get("r1")
    if r1 is not None:
        r1 = _number(r1, "r1")
        if not r1 > 1.0:
            raise SpecValidation("r1", "must exceed 1")
    target = _number(data.get("target_percent", DEFAULT_SETTINGS.target_percent), "target_percent")
    if not 0.0 < target < 100.0:
        raise SpecValidation("target_percent", "must lie strictly between 0 and 100")

    return ExperimentSpec(
        scenario=scenario,
        network=config,
        distributions=distributions,
        snr_grid_db=_grid(data, "snr_grid_db", _DEFAULT_SNR.get(scenario, ()), as_int=False),
        n_grid=_grid(data, "n_grid", _DEFAULT_N.get(scenario, ()), as_int=True),
        k_max_grid=_grid(data, "k_max_grid", _DEFAULT_K.get(scenario, ()), as_int=True),
        n_trials=_integer(data.get("n_trials", DEFAULT_SETTINGS.default_trials), "n_trials"),
        master_seed=seed,
        fixed_design_snr_db=_number(
            data.get("fixed_design_snr_db", DEFAULT_SETTINGS.fixed_design_snr_db),
            "fixed_design_snr_db",
        ),
        bits_per_link=_integer(data.get("bits_per_link", 2), "bits_per_link"),
        r1=r1,
        target_percent=target,
        source=data,
    )


def load_spec(path: Path) -> ExperimentSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SpecValidation("<file>", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecValidation("<file>", f"{path} is not valid JSON: {exc}") from exc
    return parse_spec(data, base_dir=path.parent)


def _single_law(spec: ExperimentSpec) -> ChannelDistribution:
    return spec.distributions.sr[0]


def validate_spec(
    spec: ExperimentSpec, settings: Settings = DEFAULT_SETTINGS
) -> list[SpecWarning]:
    """Non-fatal advisories; structural problems raise ``SpecValidation``."""
    scenario = spec.scenario
    if scenario in _USES_SNR and not spec.snr_grid_db:
        raise SpecValidation("snr_grid_db", f"{scenario} needs at least one SNR point")
    if scenario in _USES_N and not spec.n_grid:
        raise SpecValidation("n_grid", f"{scenario} needs at least one level count")
    if scenario in _USES_K:
        if not spec.k_max_grid:
            raise SpecValidation("k_max_grid", f"{scenario} needs at least one budget")
        links = spec.network.n_sources + 1
        for i, k in enumerate(spec.k_max_grid):
            if k < links:
                raise SpecValidation(
                    f"k_max_grid[{i}]", f"budget {k} is below one bit for each of {links} links"
                )
    warnings: list[SpecWarning] = []
    if scenario in _USES_MC and spec.n_trials < settings.underpowered_trials:
        warnings.append(
            SpecWarning(
                "UnderpoweredMC",
                "n_trials",
                f"{spec.n_trials} trials give percent-level standard errors; "
                f"use at least {settings.underpowered_trials}",
            )
        )
    if scenario in _GENERAL_DESIGN and 1 in spec.n_grid:
        if _single_law(spec).kind != DistributionKind.UNIFORM:
            warnings.append(
                SpecWarning(
                    "DegenerateKappa",
                    "n_grid",
                    "the closed-form design needs N >= 2 for this law; N=1 dropped",
                )
            )
    if scenario in _USES_N and len(_design_grid(spec)) == 0:
        raise SpecValidation("n_grid", "no usable level count left")
    return warnings


def _design_grid(spec: ExperimentSpec) -> tuple[int, ...]:
    if spec.scenario in _GENERAL_DESIGN and _single_law(spec).kind != DistributionKind.UNIFORM:
        return tuple(n for n in spec.n_grid if n >= 2)
    return spec.n_grid


@lru_cache(maxsize=4096)
def _proposed(n_levels: int, gamma: float, dist: ChannelDistribution) -> QuantizationVector:
    return design_proposed(n_levels, gamma, dist)


def _adaptive(n_levels: int, gamma: float, dist: ChannelDistribution) -> QuantizationVector:
    if dist.kind == DistributionKind.UNIFORM:
        return design_uniform(n_levels, gamma)
    return design_general(n_levels, gamma, dist)


def _link_quantizers(
    network: NetworkConfig,
    dists: LinkDistributions,
    bits: tuple[int | None, ...],
    family: str,
) -> QuantizedCsi:
    """Quantizers for ``bits`` per link; the relay link is designed at ``gamma_RD / N_S``."""
    gammas = (*network.gamma_sr, network.gamma_rd / network.n_sources)
    laws = (*dists.sr, dists.rd)
    links = []
    for k, gamma, law in zip(bits, gammas, laws):
        if k is None:
            links.append(PERFECT_LINK)
        elif family == "max-entropy":
            links.append(design_max_entropy(levels_for_bits(k), law, gamma))
        else:
            links.append(_proposed(levels_for_bits(k), gamma, law))
    return QuantizedCsi(sr=tuple(links[:-1]), rd=links[-1])


def _equal_snr_network(n_sources: int, snr_db: float) -> NetworkConfig:
    gamma = db_to_linear(snr_db)
    return NetworkConfig(gamma_sr=(gamma,) * n_sources, gamma_rd=gamma)


def _first_crossing(k_values: list[int], percents: list[float], target: float) -> float | None:
    """k_max where the achieved percentage first reaches ``target``, linearly interpolated."""
    for i, (k, y) in enumerate(zip(k_values, percents)):
        if y >= target:
            if i == 0:
                return float(k)
            k_prev, y_prev = k_values[i - 1], percents[i - 1]
            return k_prev + (target - y_prev) * (k - k_prev) / (y - y_prev)
    return None


class _Runner:
    def __init__(self, spec: ExperimentSpec, workers: int, settings: Settings) -> None:
        self.spec = spec
        self.workers = workers
        self.settings = settings
        self.rows: list[dict[str, Any]] = []
        self.details: dict[str, Any] = {}

    def row(self, **values: Any) -> None:
        self.rows.append(
            {"scenario": str(self.spec.scenario), "seed": self.spec.master_seed, **values}
        )

    def monte_carlo(self, network: NetworkConfig, csi: QuantizedCsi, dists: LinkDistributions):
        return monte_carlo_delta(
            network,
            csi,
            dists,
            self.spec.n_trials,
            self.spec.master_seed,
            workers=self.workers,
            settings=self.settings,
        )

    def adaptive_vs_fixed(self) -> None:
        spec = self.spec
        law = _single_law(spec)
        gamma_fixed = db_to_linear(spec.fixed_design_snr_db)
        grid = _design_grid(spec)
        fixed = {n: _adaptive(n, gamma_fixed, law) for n in grid}
        for snr_db in spec.snr_grid_db:
            gamma = db_to_linear(snr_db)
            for n in grid:
                for name, q in (("adaptive", _adaptive(n, gamma, law)), ("fixed", fixed[n])):
                    loss = delta_q(q, gamma, law, self.settings).delta_q
                    self.row(
                        snr_db=snr_db,
                        n_levels=n,
                        quantizer=name,
                        delta_nats=loss,
                        delta_bits=loss / math.log(2.0),
                    )
        self.details["fixed_design_snr_db"] = spec.fixed_design_snr_db

    def loss_ratio_vs_snr(self) -> None:
        spec = self.spec
        n_sources = spec.network.n_sources
        bits = (spec.bits_per_link,) * (n_sources + 1)
        for snr_db in spec.snr_grid_db:
            network = _equal_snr_network(n_sources, snr_db)
            for family in ("optimal", "max-entropy"):
                csi = _link_quantizers(network, spec.distributions, bits, family)
                report = self.monte_carlo(network, csi, spec.distributions)
                self.row(
                    snr_db=snr_db,
                    n_levels=levels_for_bits(spec.bits_per_link),
                    quantizer=family,
                    delta_nats=report.mean_delta,
                    delta_bits=report.mean_delta / math.log(2.0),
                    percent_lost=report.percent_lost,
                    stderr=report.percent_stderr,
                )

    def decay_vs_n(self) -> None:
        spec = self.spec
        law = _single_law(spec)
        grid = _design_grid(spec)
        slopes = {}
        for snr_db in spec.snr_grid_db:
            gamma = db_to_linear(snr_db)
            losses = []
            for n in grid:
                loss = delta_q(_adaptive(n, gamma, law), gamma, law, self.settings).delta_q
                losses.append(loss)
                self.row(snr_db=snr_db, n_levels=n, delta_nats=loss)
            if len(grid) >= 2:
                fit = linregress(np.log(grid), np.log(losses))
                slopes[repr(snr_db)] = float(fit.slope)
        self.details["log_log_slope"] = slopes

    def _coefficients(self):
        spec = self.spec
        network, dists = spec.network, spec.distributions
        if spec.r1 is not None:
            r1 = spec.r1
        else:
            r1 = [
                nominal_r1(g, law, self.settings) for g, law in zip(network.gamma_sr, dists.sr)
            ]
        return loss_coefficients(network, r1, rd_heuristic=not dists.all_rayleigh)

    def bit_allocation_sweep(self) -> None:
        """Percent of the perfect-CSI rate against the total bit budget.

        The uniform baseline gives every link the same number of bits, so its
        curves only visit budgets that are a multiple of the link count.
        """
        spec = self.spec
        eta = self._coefficients()
        links = spec.network.n_sources + 1
        combos = (
            ("greedy", "proposed"),
            ("greedy", "max-entropy"),
            ("uniform", "proposed"),
            ("uniform", "max-entropy"),
        )
        curves: dict[str, tuple[list[int], list[float]]] = {
            f"{a}+{q}": ([], []) for a, q in combos
        }
        for k_max in spec.k_max_grid:
            allocations = {"greedy": greedy_allocate(eta, k_max)}
            if k_max % links == 0:
                allocations["uniform"] = uniform_allocate(eta, k_max)
            for allocator, family in combos:
                allocation: BitAllocation | None = allocations.get(allocator)
                if allocation is None:
                    continue
                csi = _link_quantizers(spec.network, spec.distributions, allocation.bits, family)
                report = self.monte_carlo(spec.network, csi, spec.distributions)
                k_values, percents = curves[f"{allocator}+{family}"]
                k_values.append(k_max)
                percents.append(report.percent_achieved)
                self.row(
                    k_max=k_max,
                    allocator=allocator,
                    quantizer=family,
                    percent_achieved=report.percent_achieved,
                    stderr=report.percent_stderr,
                )
        crossings = {
            name: _first_crossing(k_values, percents, spec.target_percent)
            for name, (k_values, percents) in curves.items()
        }
        self.details["target_percent"] = spec.target_percent
        self.details["k_max_at_target"] = crossings
        best = crossings["greedy+proposed"]
        baseline = crossings["uniform+max-entropy"]
        self.details["bits_saved_per_link"] = (
            None if best is None or baseline is None else (baseline - best) / links
        )
        self.details["eta"] = eta.to_dict()

    def central_node_comparison(self) -> None:
        spec = self.spec
        eta = self._coefficients()
        for k_max in spec.k_max_grid:
            for node in CentralNode:
                allocation = central_node_variant(spec.network, eta, k_max, node)
                csi = _link_quantizers(spec.network, spec.distributions, allocation.bits, "proposed")
                report = self.monte_carlo(spec.network, csi, spec.distributions)
                self.row(
                    node=str(node),
                    k_max=k_max,
                    bound_value=allocation.bound_value,
                    mc_percent_achieved=report.percent_achieved,
                    stderr=report.percent_stderr,
                )
        self.details["eta"] = eta.to_dict()

    def custom(self) -> None:
        spec = self.spec
        network, dists = spec.network, spec.distributions
        gammas = (*network.gamma_sr, network.gamma_rd / network.n_sources)
        laws = (*dists.sr, dists.rd)
        for n in _design_grid(spec):
            links = [_proposed(n, g, law) for g, law in zip(gammas, laws)]
            csi = QuantizedCsi(sr=tuple(links[:-1]), rd=links[-1])
            report = self.monte_carlo(network, csi, dists)
            self.row(
                n_levels=n,
                delta_nats=report.mean_delta,
                delta_stderr=report.delta_stderr,
                percent_lost=report.percent_lost,
                percent_stderr=report.percent_stderr,
                achieved_nats=report.mean_achieved_rate,
                bound_nats=loss_upper_bound(network, csi, dists, self.settings),
            )


_HANDLERS = {
    Scenario.ADAPTIVE_VS_FIXED: _Runner.adaptive_vs_fixed,
    Scenario.LOSS_RATIO_VS_SNR: _Runner.loss_ratio_vs_snr,
    Scenario.DECAY_VS_N: _Runner.decay_vs_n,
    Scenario.BIT_ALLOCATION_SWEEP: _Runner.bit_allocation_sweep,
    Scenario.CENTRAL_NODE_COMPARISON: _Runner.central_node_comparison,
    Scenario.CUSTOM: _Runner.custom,
}


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict[str, Any]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(column)) for column in columns])


def run(
    spec: ExperimentSpec,
    out_dir: Path,
    workers: int = 1,
    settings: Settings = DEFAULT_SETTINGS,
) -> RunSummary:
    warnings = validate_spec(spec, settings)
    for warning in warnings:
        logger.warning("%s (%s): %s", warning.code, warning.field, warning.message)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("Running %s with seed %d.", spec.scenario, spec.master_seed)

    runner = _Runner(spec, workers, settings)
    _HANDLERS[spec.scenario](runner)

    csv_path = out_dir / f"{spec.scenario.file_stem}.csv"
    _write_csv(csv_path, _COLUMNS[spec.scenario], runner.rows)
    summary = RunSummary(
        scenario=spec.scenario,
        csv_path=csv_path,
        manifest_path=out_dir / "manifest.json",
        rows=len(runner.rows),
        warnings=tuple(warnings),
        details=runner.details,
    )
    manifest = {
        "spec_sha256": spec.digest,
        "master_seed": spec.master_seed,
        "version": __version__,
        **summary.to_dict(),
    }
    summary.manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    logger.info("Wrote %d rows to %s.", summary.rows, csv_path)
    return summary
