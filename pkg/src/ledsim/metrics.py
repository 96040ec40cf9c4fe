"""Fairness, efficiency and protocol-share metrics over simulation traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RateSample:
    window: tuple[float, float]
    per_flow_bytes: dict[int, float]
    per_flow_protocol: dict[int, str]

    def __post_init__(self):
        if not self.window[1] > self.window[0]:
            raise ValueError("window must have positive length")

    @property
    def duration(self) -> float:
        return self.window[1] - self.window[0]

    def rates(self) -> np.ndarray:
        """Per-flow rates in bytes/s, ordered by flow id."""
        return np.array([self.per_flow_bytes[k] for k in sorted(self.per_flow_bytes)]) / self.duration


def jain_index(rates) -> float:
    """Jain's fairness index; an all-zero vector counts as perfectly fair."""
    x = np.asarray(rates, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one rate")
    if np.any(x < 0):
        raise ValueError("rates must be non-negative")
    top = float(x.max())
    if top == 0.0:
        return 1.0
    x = x / top  # the index is scale-free; normalizing avoids under/overflow
    s = float(np.sum(x))
    return s * s / (x.size * float(np.sum(x * x)))


def efficiency(rates, capacity: float) -> float:
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    return float(np.sum(rates)) / capacity


def protocol_breakdown(sample: RateSample, protocol) -> float | None:
    """Share of bytes carried by ``protocol``; ``None`` when nothing was sent."""
    name = getattr(protocol, "value", protocol)
    total = sum(sample.per_flow_bytes.values())
    if total <= 0:
        return None
    mine = sum(b for k, b in sample.per_flow_bytes.items() if sample.per_flow_protocol[k] == name)
    return mine / total


def stationary_window(trace, discard: float, end: float | None = None) -> RateSample:
    """Bytes acked per flow between ``discard`` and ``end`` (default: trace end).

    ``trace`` is a :class:`~ledsim.simulation.SimResult`; boundaries snap to
    the nearest sample at or after the requested time.
    """
    t = trace.t
    t_end = t[-1] if end is None else end
    if discard >= t_end or discard >= t[-1]:
        raise ValueError(f"discard={discard} leaves no data (trace ends at {t[-1]})")
    i0 = int(np.searchsorted(t, discard - 1e-9))
    i1 = min(int(np.searchsorted(t, t_end - 1e-9)), len(t) - 1)
    if i1 <= i0:
        raise ValueError("empty measurement window")
    pkts = trace.acked[:, i1] - trace.acked[:, i0]
    per_bytes = {k: float(pkts[k]) * trace.packet_bytes for k in range(trace.n_units)}
    protos = {k: trace.protocols[k] for k in range(trace.n_units)}
    return RateSample((float(t[i0]), float(t[i1])), per_bytes, protos)


def mean_queue(trace, t0: float, t1: float | None = None) -> float:
    t = trace.t
    t1 = t[-1] if t1 is None else t1
    m = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
    return float(trace.queue[m].mean())


def mean_queueing_delay(trace, t0: float, t1: float | None = None) -> float:
    """Mean per-packet waiting time at the bottleneck for packets admitted
    in ``(t0, t1]``."""
    t = trace.t
    t1 = t[-1] if t1 is None else t1
    m = (t > t0 + 1e-9) & (t <= t1 + 1e-9)
    n = trace.arrivals[m].sum()
    return float(trace.wait_sum[m].sum() / n) if n else 0.0


@dataclass
class Summary:
    fairness: float
    efficiency: float
    breakdown: float | None
    mean_queue_pkts: float
    rates_pps: np.ndarray


def summarize(trace, t0: float, t1: float | None = None, protocol: str = "fledbat") -> Summary:
    sample = stationary_window(trace, t0, t1)
    bps = sample.rates()
    pps = bps / trace.packet_bytes
    return Summary(
        fairness=jain_index(pps),
        efficiency=efficiency(pps, trace.capacity_pps),
        breakdown=protocol_breakdown(sample, protocol),
        mean_queue_pkts=mean_queue(trace, sample.window[0], sample.window[1]),
        rates_pps=pps,
    )


def mean_std(values) -> tuple[float, float]:
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0
