"""Event-driven Fork-Join engine for general (GA) and fixed-object (FA) access.

Each request forks a copy to its systematic server and a sub-copy to every
server of each recovery group. Servers are FCFS with exponential service.
The request completes when the systematic copy finishes or when a group has
``needed`` finished sub-copies; all of its other copies are then dropped at
no cost. Dropped queue entries are skipped lazily when a server looks for
its next job, and a dropped job in service is invalidated through the
server's service token.
"""

import logging
from collections import deque
from dataclasses import dataclass, field

from ..core_types import CompletionSource
from ..distribution_domain import ServiceTypeVector, enumerate_types
from ..simulation_domain import RequestRecord, RunOutcome, SimConfig
from .sim_utils import EventCalendar, RandomStream, popularity_sampler, sample_object, spawn_streams

logger = logging.getLogger(__name__)

SYSTEMATIC_GROUP = -1


@dataclass(slots=True)
class _Request:
    arrival: float
    obj: int
    groups_of: dict[int, int]
    remaining: list[int]
    finished: list[int]
    waiting: int
    live: set[int] = field(default_factory=set)
    hol_epoch: float | None = None
    type_nu: tuple[int, ...] | None = None


class _Server:
    __slots__ = ("busy_since", "busy_time", "in_service", "live", "queue", "rate", "stream", "token")

    def __init__(self, rate: float, stream: RandomStream) -> None:
        self.rate = rate
        self.stream = stream
        self.queue: deque[int] = deque()
        self.in_service: int | None = None
        self.token = 0
        self.live = 0
        self.busy_since = 0.0
        self.busy_time = 0.0


class _ForkJoinRun:
    """State of one replication."""

    def __init__(self, config: SimConfig) -> None:
        self.config = config
        arrival_stream, server_streams = spawn_streams(config.seed, config.layout.params.n)
        self.arrival_stream = arrival_stream
        self.servers = [_Server(rate, stream) for rate, stream in zip(config.rates, server_streams, strict=True)]
        self.calendar = EventCalendar()
        self.cumulative = popularity_sampler(config.request_popularity.p)
        self.requests: dict[int, _Request] = {}
        self.classify = config.records_types
        params = config.layout.params
        types = enumerate_types(params.r, params.t) if self.classify else ()
        self.type_positions = {nu.nu: position for position, nu in enumerate(types)}
        self.type_counts = [0] * len(self.type_positions)
        self.n_measured = config.n_arrivals - config.warmup_arrivals
        self.sojourns: list[float] = []
        self.records: list[RequestRecord] = []
        self.systematic_wins = 0
        self.recovery_wins = 0
        self.next_id = 0
        self.now = 0.0
        self.aborted = False

    def run(self) -> RunOutcome:
        self.calendar.schedule(self.arrival_stream.exponential(self.config.arrival_rate), EventCalendar.ARRIVAL)
        while self.calendar and len(self.sojourns) < self.n_measured and not self.aborted:
            self.now, server, token = self.calendar.pop()
            if server == EventCalendar.ARRIVAL:
                self._arrive()
            else:
                self._complete_copy(server, token)
        for server in self.servers:
            if server.in_service is not None:
                server.busy_time += self.now - server.busy_since
        return RunOutcome(
            sojourns=tuple(self.sojourns),
            systematic_wins=self.systematic_wins,
            recovery_wins=self.recovery_wins,
            type_counts=tuple(self.type_counts) if self.classify else None,
            busy_time=tuple(server.busy_time for server in self.servers),
            horizon=self.now,
            aborted=self.aborted,
            trace=tuple(self.records),
        )

    def _arrive(self) -> None:
        config = self.config
        obj = config.fixed_object
        if config.mode.samples_popularity:
            obj = sample_object(self.cumulative, self.arrival_stream.uniform())
        placement = config.layout.placements[obj]
        groups_of = {placement.systematic_server: SYSTEMATIC_GROUP}
        for index, group in enumerate(placement.recovery_groups):
            groups_of.update(dict.fromkeys(group.servers, index))
        request = _Request(
            arrival=self.now,
            obj=obj,
            groups_of=groups_of,
            remaining=[group.needed for group in placement.recovery_groups],
            finished=[0] * len(placement.recovery_groups),
            waiting=len(groups_of),
            live=set(groups_of),
        )
        request_id = self.next_id
        self.next_id += 1
        self.requests[request_id] = request
        for index in groups_of:
            server = self.servers[index]
            server.queue.append(request_id)
            server.live += 1
            if server.live > config.max_backlog:
                self.aborted = True
            if server.in_service is None:
                self._start_next(index)
        self.calendar.schedule(self.now + self.arrival_stream.exponential(config.arrival_rate), EventCalendar.ARRIVAL)

    def _start_next(self, index: int) -> None:
        server = self.servers[index]
        while server.queue:
            request_id = server.queue.popleft()
            request = self.requests.get(request_id)
            if request is None:
                continue
            server.in_service = request_id
            server.token += 1
            server.busy_since = self.now
            self.calendar.schedule(self.now + server.stream.exponential(server.rate), index, server.token)
            request.waiting -= 1
            if request.waiting == 0:
                self._reach_head_of_line(request)
            return

    def _reach_head_of_line(self, request: _Request) -> None:
        request.hol_epoch = self.now
        if not self.classify:
            return
        nu = [0] * self.config.layout.params.r
        for done in request.finished:
            nu[done] += 1
        request.type_nu = tuple(nu)

    def _complete_copy(self, index: int, token: int) -> None:
        server = self.servers[index]
        if server.in_service is None or token != server.token:
            return
        request_id = server.in_service
        request = self.requests[request_id]
        self._release(index)
        request.live.discard(index)
        group = request.groups_of[index]
        if group == SYSTEMATIC_GROUP:
            self._depart(request_id, CompletionSource.SYSTEMATIC, None)
        else:
            request.remaining[group] -= 1
            request.finished[group] += 1
            if request.remaining[group] == 0:
                self._depart(request_id, CompletionSource.RECOVERY, group)
        self._start_next(index)

    def _release(self, index: int) -> None:
        server = self.servers[index]
        server.busy_time += self.now - server.busy_since
        server.in_service = None
        server.token += 1
        server.live -= 1

    def _depart(self, request_id: int, winner: CompletionSource, group: int | None) -> None:
        request = self.requests.pop(request_id)
        for index in request.live:
            server = self.servers[index]
            if server.in_service == request_id:
                self._release(index)
                self._start_next(index)
            else:
                server.live -= 1
        if not self.config.warmup_arrivals <= request_id < self.config.n_arrivals:
            return
        self.sojourns.append(self.now - request.arrival)
        if winner.is_systematic:
            self.systematic_wins += 1
        else:
            self.recovery_wins += 1
        if request.type_nu is not None:
            self.type_counts[self.type_positions[request.type_nu]] += 1
        if self.config.keep_trace:
            params = self.config.layout.params
            service_type = None
            if request.type_nu is not None:
                service_type = ServiceTypeVector(nu=request.type_nu, r=params.r, t=params.t)
            self.records.append(
                RequestRecord(
                    arrival=request.arrival,
                    obj=request.obj,
                    hol_epoch=request.hol_epoch if self.config.mode.classifies_service_types else None,
                    departure=self.now,
                    service_type=service_type,
                    winner=winner,
                    group=group,
                )
            )


def run_fork_join(config: SimConfig) -> RunOutcome:
    """Simulate one replication of GA or FA access."""
    logger.debug("fork-join run: mode=%s lambda=%g seed=%d", config.mode, config.arrival_rate, config.seed)
    return _ForkJoinRun(config).run()
