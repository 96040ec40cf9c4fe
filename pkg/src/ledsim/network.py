"""Single-bottleneck path: drop-tail FIFO link plus fixed propagation delays."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

PACKET_BYTES = 1500


def packets_per_second(capacity_bps: float, packet_bytes: int = PACKET_BYTES) -> float:
    return capacity_bps / (8.0 * packet_bytes)


@dataclass(slots=True)
class Packet:
    flow_id: int
    seq_no: int
    send_timestamp: float
    size: int = PACKET_BYTES
    is_data: bool = True


@dataclass(frozen=True)
class PathDelays:
    """One-way propagation delays in seconds.

    ``fwd_prop`` covers sender to receiver excluding bottleneck queueing and
    transmission; ``back_prop`` is the ack path.
    """

    fwd_prop: float
    back_prop: float

    def __post_init__(self):
        if self.fwd_prop < 0 or self.back_prop < 0:
            raise ValueError(f"negative propagation delay: {self}")

    @classmethod
    def from_rtt(cls, rtt: float, fwd_prop: float, service_time: float) -> "PathDelays":
        """Split an RTT budget: the ack path absorbs what the forward path and
        one transmission time leave over."""
        back = rtt - fwd_prop - service_time
        if back < -1e-12:
            raise ValueError(
                f"rtt={rtt} too small for fwd_prop={fwd_prop} + service={service_time}"
            )
        return cls(fwd_prop, max(back, 0.0))

    @property
    def base_rtt(self) -> float:
        return self.fwd_prop + self.back_prop


class BottleneckLink:
    """Drop-tail FIFO served at ``capacity`` packets/second.

    ``buffer_size`` bounds the number of packets *waiting*; the packet in
    transmission does not occupy a buffer slot. Service times are fixed, so
    each accepted packet's departure time is known on admission and no
    departure events are needed.
    """

    def __init__(self, capacity: float, buffer_size: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        if buffer_size < 1:
            raise ValueError("buffer_size must be at least 1 packet")
        self.capacity = float(capacity)
        self.buffer_size = int(buffer_size)
        self.service_time = 1.0 / self.capacity
        self._departures: deque[float] = deque()
        self.accepted = 0
        self.dropped = 0
        self.busy_until = 0.0

    def _purge(self, t: float) -> None:
        dq = self._departures
        while dq and dq[0] <= t:
            dq.popleft()

    def queue_length(self, t: float) -> int:
        """Packets waiting (not in service) at time ``t``."""
        self._purge(t)
        return max(0, len(self._departures) - 1)

    def in_system(self, t: float) -> int:
        self._purge(t)
        return len(self._departures)

    def busy(self, t: float) -> bool:
        return self.in_system(t) > 0

    def enqueue(self, pkt: Packet | None, t: float) -> float | None:
        """Admit a packet arriving at ``t``.

        Returns its departure time (end of transmission), or ``None`` when
        the buffer is full and the packet is dropped.
        """
        dq = self._departures
        while dq and dq[0] <= t:
            dq.popleft()
        if len(dq) - 1 >= self.buffer_size:
            self.dropped += 1
            return None
        start = dq[-1] if dq else t
        if start < t:
            start = t
        depart = start + self.service_time
        dq.append(depart)
        self.accepted += 1
        self.busy_until = depart
        return depart


def one_way_delay(pkt: Packet, recv_time: float) -> float:
    """Receiver-side delay sample; clocks are synchronized in simulation."""
    if recv_time < pkt.send_timestamp:
        raise ValueError("packet received before it was sent")
    return recv_time - pkt.send_timestamp
