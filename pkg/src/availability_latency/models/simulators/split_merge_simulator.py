"""Single-queue engines for the bounding disciplines.

Split-Merge admits the next request only when every server is idle, so the
whole system is one FCFS queue whose service time is the race between the
systematic copy and the recovery groups started together. Fast-Split-Merge
serves every request as if each group had a single sub-copy left, which
makes the service exponential at the aggregate rate. Both reduce to the
Lindley recursion ``D_j = max(A_j, D_{j-1}) + S_j``.
"""

import logging
import math
from collections import deque
from collections.abc import Callable

from pydantic import BaseModel, ConfigDict, Field

from ..code_domain import ObjectPlacement
from ..core_types import CompletionSource
from ..simulation_domain import RequestRecord, RunOutcome, SimConfig
from .sim_utils import RandomStream, spawn_streams

logger = logging.getLogger(__name__)


class ServiceDraw(BaseModel):
    """One request's service time, its winner and how long each server worked on it."""

    model_config = ConfigDict(frozen=True)

    duration: float = Field(ge=0.0)
    winner: CompletionSource
    group: int | None = None
    busy: dict[int, float]


ServiceSampler = Callable[[ObjectPlacement, list[float], list[RandomStream]], ServiceDraw]


def draw_split_merge(placement: ObjectPlacement, rates: list[float], streams: list[RandomStream]) -> ServiceDraw:
    """Race the systematic copy against every group started at the same instant.

    A group finishes at the ``needed``-th smallest of its sub-copy times.
    """
    systematic = placement.systematic_server
    copy_times = {systematic: streams[systematic].exponential(rates[systematic])}
    group_times = []
    for group in placement.recovery_groups:
        times = [streams[server].exponential(rates[server]) for server in group.servers]
        copy_times.update(zip(group.servers, times, strict=True))
        group_times.append(sorted(times)[group.needed - 1])
    return _race(copy_times[systematic], group_times, copy_times)


def draw_fast_split_merge(placement: ObjectPlacement, rates: list[float], streams: list[RandomStream]) -> ServiceDraw:
    """Race the systematic copy against one remaining sub-copy per group.

    Each group's remaining sub-copy sits on its fastest server.
    """
    systematic = placement.systematic_server
    systematic_time = streams[systematic].exponential(rates[systematic])
    group_times = []
    for group in placement.recovery_groups:
        fastest = max(group.servers, key=lambda server: rates[server])
        group_times.append(streams[fastest].exponential(rates[fastest]))
    return _race(systematic_time, group_times, dict.fromkeys(placement.servers, math.inf))


def _race(systematic_time: float, group_times: list[float], copy_times: dict[int, float]) -> ServiceDraw:
    duration = min([systematic_time, *group_times])
    busy = {server: min(elapsed, duration) for server, elapsed in copy_times.items()}
    if systematic_time <= duration:
        return ServiceDraw(duration=duration, winner=CompletionSource.SYSTEMATIC, busy=busy)
    return ServiceDraw(
        duration=duration, winner=CompletionSource.RECOVERY, group=group_times.index(duration), busy=busy
    )


def run_lindley(config: SimConfig, sampler: ServiceSampler) -> RunOutcome:
    """Simulate one replication of a single-queue discipline with service times from ``sampler``."""
    arrival_stream, streams = spawn_streams(config.seed, config.layout.params.n)
    rates = list(config.rates)
    placement = config.layout.placements[config.fixed_object]
    busy_time = [0.0] * config.layout.params.n
    backlog: deque[float] = deque()
    sojourns: list[float] = []
    records: list[RequestRecord] = []
    systematic_wins = recovery_wins = 0
    arrival = last_departure = 0.0
    aborted = False

    for index in range(config.n_arrivals):
        arrival += arrival_stream.exponential(config.arrival_rate)
        while backlog and backlog[0] <= arrival:
            backlog.popleft()
        if len(backlog) >= config.max_backlog:
            aborted = True
            break
        draw = sampler(placement, rates, streams)
        start = max(arrival, last_departure)
        last_departure = start + draw.duration
        backlog.append(last_departure)
        for server, elapsed in draw.busy.items():
            busy_time[server] += elapsed
        if index < config.warmup_arrivals:
            continue
        sojourns.append(last_departure - arrival)
        if draw.winner.is_systematic:
            systematic_wins += 1
        else:
            recovery_wins += 1
        if config.keep_trace:
            records.append(
                RequestRecord(
                    arrival=arrival,
                    obj=config.fixed_object,
                    hol_epoch=start,
                    departure=last_departure,
                    winner=draw.winner,
                    group=draw.group,
                )
            )

    return RunOutcome(
        sojourns=tuple(sojourns),
        systematic_wins=systematic_wins,
        recovery_wins=recovery_wins,
        busy_time=tuple(busy_time),
        horizon=last_departure,
        aborted=aborted,
        trace=tuple(records),
    )


def run_split_merge(config: SimConfig) -> RunOutcome:
    """Simulate one replication of Split-Merge access."""
    logger.debug("split-merge run: lambda=%g seed=%d", config.arrival_rate, config.seed)
    return run_lindley(config, draw_split_merge)


def run_fast_split_merge(config: SimConfig) -> RunOutcome:
    """Simulate one replication of Fast-Split-Merge access."""
    logger.debug("fast-split-merge run: lambda=%g seed=%d", config.arrival_rate, config.seed)
    return run_lindley(config, draw_fast_split_merge)
