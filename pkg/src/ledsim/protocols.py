"""Per-ack congestion window rules for LEDBAT, fLEDBAT and TCP Reno.

All windows are in packets and real-valued; transmission uses the floor.
Delays are in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

MIN_CWND = 1.0
INITIAL_CWND = 2.0
DEFAULT_TARGET = 0.025
DEFAULT_GAIN = 1.0


class Protocol(str, Enum):
    LEDBAT = "ledbat"
    FLEDBAT = "fledbat"
    RENO = "reno"

    @classmethod
    def parse(cls, value: "str | Protocol") -> "Protocol":
        if isinstance(value, Protocol):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown protocol {value!r}; expected one of {[p.value for p in cls]}"
            ) from None


@dataclass
class BaseDelayEstimator:
    """All-time minimum of the observed one-way delays."""

    d_min: float = math.inf

    def update(self, owd: float) -> float:
        if owd < self.d_min:
            self.d_min = owd
        return self.d_min

    def queuing_delay(self, owd: float) -> float:
        return owd - self.d_min


@dataclass
class FlowState:
    protocol: Protocol
    cwnd: float = INITIAL_CWND
    tau: float = DEFAULT_TARGET
    alpha: float = DEFAULT_GAIN
    zeta: float = 0.1
    base: BaseDelayEstimator = field(default_factory=BaseDelayEstimator)
    in_flight: int = 0
    last_halve_time: float = -math.inf
    ssthresh: float = math.inf
    # read the LEDBAT gain as alpha*(tau - delta)/tau instead of -alpha*delta/tau
    ledbat_literal: bool = False
    # TCP-like slow start for the LEDBAT family (off by default)
    slow_start: bool = False

    def __post_init__(self):
        self.protocol = Protocol.parse(self.protocol)
        if self.protocol is not Protocol.RENO and self.tau <= 0:
            raise ValueError("target tau must be positive")
        if self.cwnd < MIN_CWND:
            self.cwnd = MIN_CWND


def compute_offset(owd: float, flow: FlowState) -> float:
    """Update the base delay with ``owd`` and return the offset from target.

    Negative offsets mean the queuing delay is below target.
    """
    d_min = flow.base.update(owd)
    return (owd - d_min) - flow.tau


def ledbat_on_ack(flow: FlowState, delta: float) -> float:
    if flow.ledbat_literal:
        gain = (flow.tau - delta) / flow.tau
    else:
        gain = -delta / flow.tau
    if flow.slow_start and flow.cwnd < flow.ssthresh and gain > 0:
        flow.cwnd += 1.0
    else:
        flow.cwnd += flow.alpha * gain / flow.cwnd
    if flow.cwnd < MIN_CWND:
        flow.cwnd = MIN_CWND
    return flow.cwnd


def fledbat_on_ack(flow: FlowState, delta: float) -> float:
    if flow.slow_start and flow.cwnd < flow.ssthresh and delta <= 0:
        flow.cwnd += 1.0
        return flow.cwnd
    cwnd = flow.cwnd + flow.alpha / flow.cwnd
    if delta > 0:
        if flow.slow_start:
            flow.ssthresh = min(flow.ssthresh, flow.cwnd)
        cwnd -= flow.zeta / flow.tau * delta
    flow.cwnd = cwnd if cwnd > MIN_CWND else MIN_CWND
    return flow.cwnd


def reno_on_ack(flow: FlowState) -> float:
    if flow.cwnd < flow.ssthresh:
        flow.cwnd += 1.0
    else:
        flow.cwnd += 1.0 / flow.cwnd
    return flow.cwnd


def on_ack(flow: FlowState, owd: float) -> float:
    """Dispatch one ack carrying delay sample ``owd``; returns the offset."""
    delta = compute_offset(owd, flow)
    if flow.protocol is Protocol.FLEDBAT:
        fledbat_on_ack(flow, delta)
    elif flow.protocol is Protocol.LEDBAT:
        ledbat_on_ack(flow, delta)
    else:
        reno_on_ack(flow)
    return delta


def on_loss(flow: FlowState, now: float, rtt: float) -> bool:
    """Halve the window, at most once per ``rtt``. Returns True if halved."""
    if now - flow.last_halve_time < rtt:
        return False
    flow.last_halve_time = now
    half = flow.cwnd / 2.0
    flow.cwnd = half if half > MIN_CWND else MIN_CWND
    if flow.protocol is Protocol.RENO or flow.slow_start:
        flow.ssthresh = flow.cwnd
    return True


def on_timeout(flow: FlowState, now: float) -> None:
    """Retransmission timeout: collapse to the minimum window."""
    flow.ssthresh = max(flow.cwnd / 2.0, MIN_CWND)
    flow.cwnd = MIN_CWND
    flow.last_halve_time = now


def transmit_window(flow: FlowState) -> int:
    """Number of packets that may be injected now."""
    budget = math.floor(flow.cwnd) - flow.in_flight
    return budget if budget > 0 else 0
