"""Discrete-event simulation of Fork-Join access - configuration, results, replication.

PURPOSE:
Every analytic claim in the package (low-traffic closed forms, Split-Merge
and Fast-Split-Merge bounds, the M/G/1 approximations, the high-traffic
fractions) is checked against a simulator of the actual system: Poisson
arrivals, one FCFS exponential queue per server, forking to the systematic
server and every recovery group, and free instantaneous cancellation of the
remaining copies once a request completes.

ARCHITECTURE NOTES:
``SimConfig.mode`` picks the engine (``AccessMode.simulator``). An engine
returns a ``RunOutcome`` with raw per-run measurements; ``simulate`` and
``replicate`` turn outcomes into ``SimResult`` statistics. ``run_cells`` puts
every replication of every grid cell on one process pool when more than one
worker is requested; results are merged in grid and replication order so the
output never depends on scheduling.

Example:
    >>> config = SimConfig(mode=AccessMode.FA, layout=single_object_layout(1, 1),
    ...                    arrival_rate=1.0, n_arrivals=20_000, seed=7)
    >>> result = simulate(config)
    >>> 0.9 < result.mean_t < 1.1
    True
"""

import csv
import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from scipy import stats

from .code_domain import PopularityVector, StorageLayout
from .core_types import AccessMode, CompletionSource
from .distribution_domain import ServiceTypeVector, enumerate_types
from .error_domain import DegenerateInputError, InvalidParameterError
from .queueing_domain import TypeFrequencies

logger = logging.getLogger(__name__)

CONFIDENCE_LEVEL = 0.95


class SimConfig(BaseModel):
    """Description of one simulation run.

    ``server_rates`` overrides the uniform rate ``mu`` per server, which is
    how the ``gamma``/``alpha``/``beta`` systems are expressed. ``popularity``
    is only used in GA mode; the other modes always request
    ``fixed_object``.
    """

    model_config = ConfigDict(frozen=True)

    mode: AccessMode
    layout: StorageLayout
    popularity: PopularityVector | None = None
    arrival_rate: float = Field(gt=0.0)
    mu: float = Field(default=1.0, gt=0.0)
    server_rates: tuple[float, ...] | None = None
    n_arrivals: int = Field(ge=1)
    warmup_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    max_backlog: int = Field(default=100_000, ge=1)
    fixed_object: int = Field(default=0, ge=0)
    keep_trace: bool = False
    keep_samples: bool = True
    ccdf_grid: tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check_consistency(self) -> "SimConfig":
        params = self.layout.params
        if self.server_rates is not None:
            if len(self.server_rates) != params.n:
                raise InvalidParameterError(f"{len(self.server_rates)} server rates for {params.n} servers")
            if any(rate <= 0 for rate in self.server_rates):
                raise InvalidParameterError("server rates must be positive")
        if self.popularity is not None and self.popularity.k != params.k:
            raise InvalidParameterError(f"popularity over {self.popularity.k} objects, layout has {params.k}")
        if self.fixed_object >= params.k:
            raise InvalidParameterError(f"fixed object {self.fixed_object} outside [0, {params.k})")
        if any(x < 0 for x in self.ccdf_grid):
            raise InvalidParameterError("ccdf grid points must be non-negative")
        return self

    @property
    def rates(self) -> tuple[float, ...]:
        """Service rate of every server."""
        return self.server_rates or (self.mu,) * self.layout.params.n

    @property
    def request_popularity(self) -> PopularityVector:
        """Popularity actually driving the arrivals in this mode."""
        if self.mode.samples_popularity:
            return self.popularity or PopularityVector.uniform(self.layout.params.k)
        return PopularityVector.point_mass(self.layout.params.k, self.fixed_object)

    @computed_field
    @property
    def warmup_arrivals(self) -> int:
        """Number of leading arrivals excluded from statistics."""
        return int(self.n_arrivals * self.warmup_fraction)

    @property
    def records_types(self) -> bool:
        """Whether service types can be classified for this configuration."""
        params = self.layout.params
        groups = self.layout.placements[self.fixed_object].recovery_groups
        regular = len(groups) == params.t and all(
            group.threshold is None and len(group.servers) == params.r for group in groups
        )
        return self.mode.classifies_service_types and regular


class RequestRecord(BaseModel):
    """Life of one measured request."""

    model_config = ConfigDict(frozen=True)

    arrival: float = Field(ge=0.0)
    obj: int = Field(ge=0)
    hol_epoch: float | None = None
    departure: float
    service_type: ServiceTypeVector | None = None
    winner: CompletionSource
    group: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_order(self) -> "RequestRecord":
        start = self.hol_epoch if self.hol_epoch is not None else self.arrival
        if not self.arrival <= start <= self.departure:
            raise InvalidParameterError("need arrival <= hol_epoch <= departure")
        return self

    @computed_field
    @property
    def sojourn(self) -> float:
        """Download time ``departure - arrival``."""
        return self.departure - self.arrival


class RunOutcome(BaseModel):
    """Raw measurements of one run, produced by an engine."""

    model_config = ConfigDict(frozen=True)

    sojourns: tuple[float, ...]
    systematic_wins: int = Field(ge=0)
    recovery_wins: int = Field(ge=0)
    type_counts: tuple[int, ...] | None = None
    busy_time: tuple[float, ...]
    horizon: float = Field(ge=0.0)
    aborted: bool = False
    trace: tuple[RequestRecord, ...] = ()


class SimResult(BaseModel):
    """Latency statistics of one run or of a set of replications.

    Half-widths are Student-t 95% intervals across replications and zero for a
    single run.
    """

    model_config = ConfigDict(frozen=True)

    mode: AccessMode
    n_reps: int = Field(ge=1)
    n_completed: int = Field(ge=0)
    mean_t: float
    half_width: float = Field(default=0.0, ge=0.0)
    ccdf_grid: tuple[float, ...] = ()
    ccdf: tuple[float, ...] = ()
    type_frequencies: TypeFrequencies | None = None
    type_half_widths: tuple[float, ...] | None = None
    ws: float = Field(ge=0.0, le=1.0)
    ws_half_width: float = Field(default=0.0, ge=0.0)
    utilization: tuple[float, ...]
    aborted: bool = False
    rep_means: tuple[float, ...] = ()
    samples: tuple[float, ...] = ()
    trace: tuple[RequestRecord, ...] = ()

    @computed_field
    @property
    def wr(self) -> float:
        """Fraction of completions by a recovery group."""
        return 1.0 - self.ws


def simulate(config: SimConfig) -> SimResult:
    """Run one replication and summarize it.

    An aborted run (backlog beyond ``max_backlog``) is flagged and carries the
    statistics gathered until the abort.
    """
    outcome = config.mode.simulator(config)
    if outcome.aborted:
        logger.warning("%s run aborted at backlog %d (lambda=%g)", config.mode, config.max_backlog, config.arrival_rate)
    return _summarize(config, outcome)


def replicate(config: SimConfig, n_reps: int, seed_stride: int = 1, workers: int = 1) -> SimResult:
    """Run ``n_reps`` independent replications with seeds ``seed + j * seed_stride``.

    Args:
        config: Base configuration; its seed is the first replication's.
        n_reps: Number of replications, at least two.
        seed_stride: Seed increment between replications; zero repeats the run.
        workers: Process-pool size; 1 runs in-process, 0 uses one per CPU.

    Raises:
        InvalidParameterError: If ``n_reps < 2``.
    """
    if n_reps < 2:
        raise InvalidParameterError("replication needs n_reps >= 2")
    return run_cells([config], n_reps, seed_stride=seed_stride, workers=workers)[0]


def run_cells(
    configs: Sequence[SimConfig], n_reps: int = 1, seed_stride: int = 1, workers: int = 1
) -> list[SimResult]:
    """Simulate every grid cell, each ``n_reps`` times, on one shared process pool.

    Every replication of every cell is an independent task. Results come back
    in the order of ``configs`` regardless of which task finishes first; a
    cell with one replication is returned as ``simulate`` would return it.

    Args:
        configs: One configuration per grid cell.
        n_reps: Replications per cell.
        seed_stride: Seed increment between replications of a cell.
        workers: Process-pool size; 1 runs in-process, 0 uses one per CPU.
    """
    if n_reps < 1:
        raise InvalidParameterError("n_reps must be at least 1")
    tasks = [_replication_configs(config, n_reps, seed_stride) for config in configs]
    flat = [task for cell in tasks for task in cell]
    if workers == 1 or len(flat) < 2:
        results = [simulate(task) for task in flat]
    else:
        with ProcessPoolExecutor(max_workers=workers or os.cpu_count()) as pool:
            results = list(pool.map(simulate, flat))

    merged = []
    for position, config in enumerate(configs):
        cell = results[position * n_reps : (position + 1) * n_reps]
        merged.append(_merge(config, cell) if n_reps > 1 else cell[0])
    return merged


def empirical_ccdf(result: SimResult, grid: Sequence[float]) -> tuple[float, ...]:
    """Right-continuous empirical ``P(T > x)`` at each grid point.

    Raises:
        DegenerateInputError: If the result kept no samples.
    """
    return _ccdf(result.samples, grid)


def write_trace(result: SimResult, path: Path) -> None:
    """Write the per-request trace as CSV (arrival, object, hol_epoch, departure, type, winner)."""
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["arrival", "object", "hol_epoch", "departure", "type", "winner"])
        for record in result.trace:
            winner = record.winner.value if record.group is None else f"{record.winner.value}:{record.group}"
            writer.writerow(
                [
                    repr(record.arrival),
                    record.obj,
                    "" if record.hol_epoch is None else repr(record.hol_epoch),
                    repr(record.departure),
                    "" if record.service_type is None else record.service_type.label,
                    winner,
                ]
            )


def _ccdf(samples: Sequence[float], grid: Sequence[float]) -> tuple[float, ...]:
    if not samples:
        raise DegenerateInputError("no completed samples")
    ordered = np.sort(np.asarray(samples, dtype=np.float64))
    at_or_below = np.searchsorted(ordered, np.asarray(grid, dtype=np.float64), side="right")
    return tuple(float(value) for value in 1.0 - at_or_below / len(ordered))


def _summarize(config: SimConfig, outcome: RunOutcome) -> SimResult:
    n_completed = len(outcome.sojourns)
    wins = outcome.systematic_wins + outcome.recovery_wins
    frequencies = None
    if outcome.type_counts is not None and sum(outcome.type_counts) > 0:
        params = config.layout.params
        frequencies = TypeFrequencies.from_counts(params.r, params.t, outcome.type_counts)
    horizon = outcome.horizon or 1.0
    return SimResult(
        mode=config.mode,
        n_reps=1,
        n_completed=n_completed,
        mean_t=math.fsum(outcome.sojourns) / n_completed if n_completed else math.nan,
        ccdf_grid=config.ccdf_grid,
        ccdf=_ccdf(outcome.sojourns, config.ccdf_grid) if config.ccdf_grid and n_completed else (),
        type_frequencies=frequencies,
        ws=outcome.systematic_wins / wins if wins else 0.0,
        utilization=tuple(min(busy / horizon, 1.0) for busy in outcome.busy_time),
        aborted=outcome.aborted,
        rep_means=(),
        samples=outcome.sojourns if config.keep_samples else (),
        trace=outcome.trace,
    )


def _replication_configs(config: SimConfig, n_reps: int, seed_stride: int) -> list[SimConfig]:
    configs = [
        config.model_copy(update={"seed": (config.seed + j * seed_stride) % 2**64}) for j in range(n_reps)
    ]
    for j, rep_config in enumerate(configs[1:], start=1):
        logger.debug("replication %d seed %d", j, rep_config.seed)
    return configs


def _merge(config: SimConfig, results: list[SimResult]) -> SimResult:
    means = [result.mean_t for result in results]
    frequencies = [result.type_frequencies for result in results if result.type_frequencies is not None]
    merged_frequencies = None
    type_half_widths = None
    if len(frequencies) == len(results):
        columns = np.array([freq.f for freq in frequencies])
        averaged = columns.mean(axis=0)
        params = config.layout.params
        merged_frequencies = TypeFrequencies(r=params.r, t=params.t, f=tuple(float(v) for v in averaged / averaged.sum()))
        type_half_widths = tuple(_half_width(list(column)) for column in columns.T)
    samples = tuple(sample for result in results for sample in result.samples)
    return SimResult(
        mode=config.mode,
        n_reps=len(results),
        n_completed=sum(result.n_completed for result in results),
        mean_t=math.fsum(means) / len(means),
        half_width=_half_width(means),
        ccdf_grid=config.ccdf_grid,
        ccdf=_ccdf(samples, config.ccdf_grid) if config.ccdf_grid and samples else (),
        type_frequencies=merged_frequencies,
        type_half_widths=type_half_widths,
        ws=math.fsum(result.ws for result in results) / len(results),
        ws_half_width=_half_width([result.ws for result in results]),
        utilization=tuple(float(u) for u in np.mean([result.utilization for result in results], axis=0)),
        aborted=any(result.aborted for result in results),
        rep_means=tuple(means),
        samples=samples,
        trace=results[0].trace,
    )


def _half_width(values: Sequence[float]) -> float:
    """Student-t half-width of the mean of ``values``."""
    if len(values) < 2:
        return 0.0
    if not all(math.isfinite(value) for value in values):
        return math.inf
    spread = float(np.std(values, ddof=1))
    quantile = float(stats.t.ppf(0.5 + CONFIDENCE_LEVEL / 2, df=len(values) - 1))
    return quantile * spread / math.sqrt(len(values))


def type_labels(r: int, t: int) -> tuple[str, ...]:
    """Column labels of the service types for ``(r, t)``."""
    return tuple(nu.label for nu in enumerate_types(r, t))
