"""Shared machinery of the event engines: event calendar and random streams.

Every server owns an independent counter-based random stream spawned from the
run seed, and one further stream drives arrivals and object sampling. Adding
a server therefore never perturbs the draws of the others.
"""

import heapq
import math

import numpy as np
import numpy.typing as npt

BATCH_SIZE = 4096


class EventCalendar:
    """Min-heap of ``(time, sequence, server, token)`` events.

    The sequence number breaks time ties in insertion order. ``server`` is
    ``ARRIVAL`` for arrivals; ``token`` lets a server discard a service
    completion that was preempted by a cancellation.
    """

    ARRIVAL = -1

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, int, int]] = []
        self._sequence = 0

    def schedule(self, time: float, server: int, token: int = 0) -> None:
        """Add an event."""
        heapq.heappush(self._heap, (time, self._sequence, server, token))
        self._sequence += 1

    def pop(self) -> tuple[float, int, int]:
        """Remove and return the earliest event as ``(time, server, token)``."""
        time, _, server, token = heapq.heappop(self._heap)
        return time, server, token

    def __bool__(self) -> bool:
        return bool(self._heap)


class RandomStream:
    """Buffered uniforms from one Philox stream, turned into exponentials by inversion."""

    def __init__(self, seed_sequence: np.random.SeedSequence) -> None:
        self._generator = np.random.Generator(np.random.Philox(seed_sequence))
        self._buffer: npt.NDArray[np.float64] = np.empty(0)
        self._position = 0

    def uniform(self) -> float:
        """Next uniform draw on ``[0, 1)``."""
        if self._position == len(self._buffer):
            self._buffer = self._generator.random(BATCH_SIZE)
            self._position = 0
        value = float(self._buffer[self._position])
        self._position += 1
        return value

    def exponential(self, rate: float) -> float:
        """Next exponential draw ``-ln(1 - U) / rate``."""
        return -math.log1p(-self.uniform()) / rate


def spawn_streams(seed: int, n_servers: int) -> tuple[RandomStream, list[RandomStream]]:
    """Arrival stream plus one stream per server, all derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n_servers + 1)
    return RandomStream(children[0]), [RandomStream(child) for child in children[1:]]


def popularity_sampler(p: tuple[float, ...]) -> npt.NDArray[np.float64]:
    """Cumulative popularity used to map a uniform draw to an object index."""
    cumulative = np.cumsum(np.asarray(p, dtype=np.float64))
    cumulative[-1] = 1.0
    return cumulative


def sample_object(cumulative: npt.NDArray[np.float64], uniform: float) -> int:
    """Object whose cumulative popularity first exceeds ``uniform``."""
    return int(np.searchsorted(cumulative, uniform, side="right"))
