"""Traffic models: backlogged sources, chunk-by-chunk transfers, and the
swarm model where M of N neighbor connections are active at a time."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

CHUNK_BYTES = 250_000


class TrafficMode(str, Enum):
    BACKLOGGED = "backlogged"
    CHUNK = "chunk"
    SWARM = "swarm"


@dataclass
class ChunkSource:
    """Data supply for one connection.

    In chunk mode a new chunk can only start once every packet of the
    current one has been acknowledged.
    """

    mode: TrafficMode = TrafficMode.BACKLOGGED
    chunk_size: int = CHUNK_BYTES
    packet_bytes: int = 1500
    sent_in_chunk: int = 0
    acked_in_chunk: int = 0
    chunks_done: int = 0

    @property
    def chunk_packets(self) -> int:
        return math.ceil(self.chunk_size / self.packet_bytes)

    @property
    def backlogged(self) -> bool:
        return self.mode is TrafficMode.BACKLOGGED

    @property
    def bytes_remaining_in_chunk(self) -> float:
        if self.backlogged:
            return math.inf
        return (self.chunk_packets - self.sent_in_chunk) * self.packet_bytes

    def has_data(self) -> bool:
        return self.backlogged or self.sent_in_chunk < self.chunk_packets

    def take(self) -> None:
        self.sent_in_chunk += 1

    def acked(self) -> bool:
        """Count one newly acked packet; True when it completes the chunk."""
        if self.backlogged:
            return False
        self.acked_in_chunk += 1
        return self.acked_in_chunk >= self.chunk_packets

    def next_chunk(self) -> None:
        if self.backlogged:
            raise RuntimeError("backlogged sources have no chunk boundaries")
        self.chunks_done += 1
        self.sent_in_chunk = 0
        self.acked_in_chunk = 0


@dataclass
class RttDistribution:
    """Per-neighbor path delays.

    Homogeneous paths share one RTT. Heterogeneous paths have a fixed
    forward delay plus a backward delay drawn once per neighbor, either
    from a truncated exponential with the configured mean or uniformly
    from an empirical sample list.
    """

    homogeneous: bool = True
    rtt: float = 0.050
    fwd_fixed: float = 0.025
    mean_backward: float = 0.0379
    max_backward: float = 0.200
    empirical: list[float] | None = None
    _scale: float | None = field(default=None, repr=False)

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> "RttDistribution":
        values = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                v = float(line)
                if v < 0:
                    raise ValueError(f"negative delay {v} in {path}")
                values.append(v)
        if not values:
            raise ValueError(f"no delays in {path}")
        return cls(homogeneous=False, empirical=values, **kw)

    def exponential_scale(self) -> float:
        """Scale of the untruncated exponential whose truncation to
        ``[0, max_backward]`` has mean ``mean_backward``."""
        if self._scale is None:
            self._scale = _truncated_exp_scale(self.mean_backward, self.max_backward)
        return self._scale


def _truncated_exp_scale(mean: float, cap: float) -> float:
    if mean <= 0:
        return 0.0
    if mean >= cap / 2:
        raise ValueError("truncated exponential mean must be below half the cap")

    def tmean(s):
        r = math.exp(-cap / s)
        return s - cap * r / (1.0 - r)

    lo, hi = mean, 50.0 * cap
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tmean(mid) < mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample_backward_delay(
    dist: RttDistribution, rng: random.Random, service_time: float = 0.0
) -> float:
    if dist.homogeneous:
        return max(0.0, dist.rtt - dist.fwd_fixed - service_time)
    if dist.empirical is not None:
        return rng.choice(dist.empirical)
    scale = dist.exponential_scale()
    if scale == 0.0:
        return 0.0
    while True:
        x = rng.expovariate(1.0 / scale)
        if x <= dist.max_backward:
            return x


@dataclass
class SwarmModel:
    n_neighbors: int = 10
    n_active: int = 5
    persistence: float = 1.0
    active: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.n_active < self.n_neighbors:
            raise ValueError("need 0 < n_active < n_neighbors")
        if not 0.0 <= self.persistence <= 1.0:
            raise ValueError("persistence must lie in [0, 1]")
        if not self.active:
            self.active = list(range(self.n_active))

    def inactive(self) -> list[int]:
        on = set(self.active)
        return [p for p in range(self.n_neighbors) if p not in on]


def pick_next_peer(swarm: SwarmModel, rng: random.Random, current: int) -> tuple[int, bool]:
    """Choose the destination of the next chunk after ``current`` finished one.

    Returns ``(peer, keep_cwnd)``. On a switch the old peer is deactivated
    and a uniformly random inactive neighbor takes its place.
    """
    if current not in swarm.active:
        raise ValueError(f"peer {current} is not active")
    if rng.random() < swarm.persistence:
        return current, True
    peer = rng.choice(swarm.inactive())
    swarm.active[swarm.active.index(current)] = peer
    return peer, False
