"""Packet-level simulation of flows sharing one drop-tail bottleneck.

Each data packet is admitted to the bottleneck at its send instant (the
bottleneck is the sender's access link). Its departure time follows from
FIFO service, the receiver sees it ``fwd_prop`` later and the ack reaches
the sender after ``back_prop``. Acks are per packet and carry the one-way
delay of the packet that triggered them.

Loss recovery: a packet is declared lost once three packets sent after it
have been acknowledged (the triple-duplicate-ack rule expressed per packet,
valid because the path never reorders), or when nothing is acknowledged for
``rto_rtts`` smoothed RTTs.
"""

from __future__ import annotations

import copy
import math
import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .engine import Engine, EventKind
from .network import BottleneckLink, PathDelays, packets_per_second
from .protocols import FlowState, Protocol, on_ack, on_loss, on_timeout, transmit_window
from .traffic import (
    ChunkSource,
    RttDistribution,
    SwarmModel,
    TrafficMode,
    pick_next_peer,
    sample_backward_delay,
)

DUPTHRESH = 3
INITIAL_RTO = 1.0


class Connection:
    """Sender state for one transport connection."""

    def __init__(self, conn_id, unit, flow: FlowState, path: PathDelays, source: ChunkSource):
        self.id = conn_id
        self.unit = unit
        self.flow = flow
        self.path = path
        self.source = source
        self.active = False
        self.next_seq = 0
        self.next_order = 0
        self.outstanding: deque = deque()  # [order, seq, send_time]
        self.suspects: list = []  # [seq, gap_since_ack_count]
        self.lost: deque = deque()
        self.acked_set: set = set()
        self.acked_pkts = 0
        self.ack_count = 0
        self.srtt: float | None = None
        self.rto_deadline = math.inf
        self.rto_backoff = 1.0
        self.timer = None
        self.halvings = 0
        self.timeouts = 0
        self.retransmits = 0

    @property
    def rtt_estimate(self) -> float:
        return self.srtt if self.srtt is not None else self.path.base_rtt


@dataclass
class SimResult:
    """Sampled time series of one run.

    ``acked`` holds cumulative acked packets per measurement unit (a flow,
    or an active slot in the swarm model), sampled on ``t``.
    """

    config: ScenarioConfig
    seed: int
    t: np.ndarray
    queue: np.ndarray
    acked: np.ndarray
    cwnd: np.ndarray
    protocols: list[str]
    starts: list[float]
    capacity_pps: float
    packet_bytes: int
    wait_sum: np.ndarray
    arrivals: np.ndarray
    drops: int = 0
    ack_records: list = field(default_factory=list)
    chunk_records: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def n_units(self) -> int:
        return self.acked.shape[0]


class Simulation:
    def __init__(self, config: ScenarioConfig, seed: int | None = None):
        self.config = config.validate()
        self.seed = config.seed if seed is None else seed
        self.engine = Engine(self.seed)
        self.rng: random.Random = self.engine.rng
        link = config.link
        self.capacity = packets_per_second(link.capacity_bps, link.packet_bytes)
        self.link = BottleneckLink(self.capacity, link.buffer_pkts)
        self.mode = TrafficMode(config.traffic.mode)
        self.rto_rtts = config.rto_rtts
        self.connections: list[Connection] = []
        self.unit_protocols: list[str] = []
        self.unit_starts: list[float] = []
        self.unit_conn: list[Connection | None] = []
        self.ack_records: list = []
        self.chunk_records: list = []
        self.record_acks = config.record_acks
        self.swarm: SwarmModel | None = None
        self.neighbor_paths: list[PathDelays] = []
        self._samples: list = []
        self._wait_acc = 0.0
        self._arr_acc = 0
        self._build()

    # -- construction ---------------------------------------------------------

    def _rtt_distribution(self) -> RttDistribution:
        r = self.config.rtt
        kw = dict(
            rtt=r.rtt_ms / 1e3,
            fwd_fixed=r.fwd_ms / 1e3,
            mean_backward=r.mean_backward_ms / 1e3,
            max_backward=r.max_backward_ms / 1e3,
        )
        if r.mode == "homogeneous":
            return RttDistribution(homogeneous=True, **kw)
        if r.empirical_file:
            return RttDistribution.from_file(r.empirical_file, **kw)
        return RttDistribution(homogeneous=False, **kw)

    def _new_path(self, dist: RttDistribution) -> PathDelays:
        back = sample_backward_delay(dist, self.rng, self.link.service_time)
        return PathDelays(dist.fwd_fixed, back)

    def _source(self) -> ChunkSource:
        mode = TrafficMode.CHUNK if self.mode is TrafficMode.SWARM else self.mode
        return ChunkSource(mode, self.config.traffic.chunk_size_bytes, self.config.link.packet_bytes)

    def _flow_state(self, protocol, tau_ms, alpha, zeta, cwnd=None) -> FlowState:
        fs = FlowState(
            Protocol.parse(protocol),
            tau=tau_ms / 1e3,
            alpha=alpha,
            zeta=zeta,
            ledbat_literal=self.config.ledbat_literal_eq2,
            slow_start=self.config.slow_start,
        )
        if cwnd is not None:
            fs.cwnd = float(cwnd)
        return fs

    def _build(self):
        cfg = self.config
        dist = self._rtt_distribution()
        eng = self.engine
        eng.on(EventKind.ACK_DELIVERED, self._on_ack)
        eng.on(EventKind.FLOW_START, self._on_start)
        eng.on(EventKind.FLOW_STOP, self._on_stop)
        eng.on(EventKind.TIMEOUT, self._on_timeout)
        eng.on(EventKind.SAMPLE, self._on_sample)
        eng.on(EventKind.CHUNK_DONE, self._on_chunk_done)

        if self.mode is TrafficMode.SWARM:
            sw = cfg.swarm
            self.swarm = SwarmModel(sw.n_neighbors, sw.n_active, sw.persistence)
            self.neighbor_paths = [self._new_path(dist) for _ in range(sw.n_neighbors)]
            for slot in range(sw.n_active):
                peer = self.swarm.active[slot]
                conn = self._connect(slot, peer, cwnd=None)
                start = self.rng.uniform(0.0, sw.start_spread_s)
                self.unit_protocols.append(Protocol.parse(sw.protocol).value)
                self.unit_starts.append(start)
                self.unit_conn.append(conn)
                eng.schedule(start, EventKind.FLOW_START, conn)
        else:
            for i, f in enumerate(cfg.flows):
                path = self._new_path(dist)
                fs = self._flow_state(f.protocol, f.tau_ms, f.alpha, f.zeta)
                conn = Connection(i, i, fs, path, self._source())
                self.connections.append(conn)
                start = f.start_s
                if cfg.start_jitter_s > 0:
                    start += self.rng.uniform(0.0, cfg.start_jitter_s)
                self.unit_protocols.append(fs.protocol.value)
                self.unit_starts.append(start)
                self.unit_conn.append(conn)
                eng.schedule(start, EventKind.FLOW_START, conn)
                if f.stop_s is not None:
                    eng.schedule(max(f.stop_s, start), EventKind.FLOW_STOP, conn)
        self._n_units = len(self.unit_conn)
        self._unit_acked = [0] * self._n_units
        self._sample_dt = cfg.sample_ms / 1e3
        self._n_samples = int(round(cfg.duration_s / self._sample_dt))
        eng.schedule(0.0, EventKind.SAMPLE, 0)

    def _connect(self, slot, peer, cwnd):
        sw = self.config.swarm
        fs = self._flow_state(sw.protocol, sw.tau_ms, sw.alpha, sw.zeta, cwnd)
        conn = Connection(len(self.connections), slot, fs, self.neighbor_paths[peer], self._source())
        conn.peer = peer
        self.connections.append(conn)
        return conn

    # -- event handlers -------------------------------------------------------

    def _on_start(self, eng, ev):
        conn = ev.payload
        conn.active = True
        self._pump(conn, eng.now)

    def _on_stop(self, eng, ev):
        conn = ev.payload
        conn.active = False
        if conn.timer is not None:
            eng.cancel(conn.timer)
            conn.timer = None

    def _on_sample(self, eng, ev):
        k = ev.payload
        t = eng.now
        cw = [c.flow.cwnd if c is not None and c.active else 0.0 for c in self.unit_conn]
        self._samples.append(
            (t, self.link.queue_length(t), tuple(self._unit_acked), tuple(cw), self._wait_acc, self._arr_acc)
        )
        self._wait_acc = 0.0
        self._arr_acc = 0
        if k < self._n_samples:
            nxt = k + 1
            at = self.config.duration_s if nxt == self._n_samples else nxt * self._sample_dt
            eng.schedule(at, EventKind.SAMPLE, nxt)

    def _send(self, conn: Connection, seq: int, now: float) -> None:
        order = conn.next_order
        conn.next_order += 1
        conn.outstanding.append([order, seq, now])
        depart = self.link.enqueue(None, now)
        if depart is None:
            return
        self._wait_acc += depart - self.link.service_time - now
        self._arr_acc += 1
        path = conn.path
        owd = depart + path.fwd_prop - now
        self.engine.schedule(
            depart + path.fwd_prop + path.back_prop,
            EventKind.ACK_DELIVERED,
            (conn, seq, order, owd, now),
        )

    def _pump(self, conn: Connection, now: float) -> None:
        if not conn.active:
            return
        flow = conn.flow
        flow.in_flight = len(conn.outstanding) + len(conn.suspects)
        budget = transmit_window(flow)
        lost = conn.lost
        src = conn.source
        sent = False
        while budget > 0:
            if lost:
                seq = lost.popleft()
                if seq in conn.acked_set:
                    continue
                conn.retransmits += 1
            elif src.has_data():
                seq = conn.next_seq
                conn.next_seq += 1
                src.take()
            else:
                break
            self._send(conn, seq, now)
            budget -= 1
            sent = True
        flow.in_flight = len(conn.outstanding) + len(conn.suspects)
        if sent or flow.in_flight:
            self._arm_timer(conn, now)

    def _rto(self, conn: Connection) -> float:
        if conn.srtt is None:
            return INITIAL_RTO * conn.rto_backoff
        return self.rto_rtts * conn.srtt * conn.rto_backoff

    def _arm_timer(self, conn: Connection, now: float) -> None:
        if conn.rto_deadline == math.inf:
            conn.rto_deadline = now + self._rto(conn)
        if conn.timer is None:
            conn.timer = self.engine.schedule(conn.rto_deadline, EventKind.TIMEOUT, conn)

    def _on_timeout(self, eng, ev):
        conn = ev.payload
        conn.timer = None
        if not conn.active:
            return
        now = eng.now
        if not conn.outstanding and not conn.suspects:
            conn.rto_deadline = math.inf
            return
        if now < conn.rto_deadline:
            conn.timer = eng.schedule(conn.rto_deadline, EventKind.TIMEOUT, conn)
            return
        pending = sorted(
            [seq for _, seq, _ in conn.outstanding] + [seq for seq, _ in conn.suspects]
        )
        conn.outstanding.clear()
        conn.suspects.clear()
        conn.lost = deque(sorted(set(pending) | set(conn.lost)))
        on_timeout(conn.flow, now)
        conn.timeouts += 1
        conn.rto_backoff = min(conn.rto_backoff * 2.0, 64.0)
        conn.rto_deadline = math.inf
        self._pump(conn, now)

    def _on_ack(self, eng, ev):
        conn, seq, order, owd, sent_at = ev.payload
        if not conn.active:
            return
        now = eng.now
        conn.ack_count += 1
        sample = now - sent_at
        conn.srtt = sample if conn.srtt is None else 0.875 * conn.srtt + 0.125 * sample
        conn.rto_backoff = 1.0

        out = conn.outstanding
        while out and out[0][0] < order:
            conn.suspects.append([out.popleft()[1], conn.ack_count])
        if out and out[0][0] == order:
            out.popleft()

        flow = conn.flow
        fresh = seq not in conn.acked_set
        delta = None
        if fresh:
            conn.acked_set.add(seq)
            conn.acked_pkts += 1
            self._unit_acked[conn.unit] += 1
            delta = on_ack(flow, owd)
            if self.record_acks:
                self.ack_records.append(
                    (now, conn.unit, flow.cwnd, delta, flow.base.d_min, "ack")
                )

        if conn.suspects:
            self._detect_losses(conn, now)

        conn.rto_deadline = now + self._rto(conn) if (out or conn.suspects) else math.inf

        if fresh and conn.source.acked():
            self.chunk_records.append((now, conn.unit, conn.id, conn.source.chunks_done))
            self._chunk_complete(conn, now)
            return
        self._pump(conn, now)

    def _detect_losses(self, conn: Connection, now: float) -> None:
        still = []
        newly = []
        for item in conn.suspects:
            seq, since = item
            if seq in conn.acked_set:
                continue
            if conn.ack_count - since >= DUPTHRESH - 1:
                newly.append(seq)
            else:
                still.append(item)
        if not newly:
            conn.suspects = still
            return
        conn.suspects = still
        conn.lost.extend(newly)
        if on_loss(conn.flow, now, conn.rtt_estimate):
            conn.halvings += 1
            if self.record_acks:
                f = conn.flow
                self.ack_records.append((now, conn.unit, f.cwnd, math.nan, f.base.d_min, "loss"))

    def _chunk_complete(self, conn: Connection, now: float) -> None:
        self.engine.schedule(now, EventKind.CHUNK_DONE, conn)

    def _on_chunk_done(self, eng, ev):
        conn = ev.payload
        if not conn.active:
            return
        now = eng.now
        if self.swarm is None:
            conn.source.next_chunk()
            self._pump(conn, now)
            return
        peer, keep = pick_next_peer(self.swarm, self.rng, conn.peer)
        if keep:
            conn.source.next_chunk()
            self._pump(conn, now)
            return
        conn.active = False
        if conn.timer is not None:
            eng.cancel(conn.timer)
            conn.timer = None
        fresh = self._connect(conn.unit, peer, cwnd=1.0)
        fresh.active = True
        self.unit_conn[conn.unit] = fresh
        self._pump(fresh, now)

    # -- run ------------------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.config
        self.engine.run_until(cfg.duration_s)
        rows = self._samples
        t = np.array([r[0] for r in rows])
        queue = np.array([r[1] for r in rows], dtype=float)
        acked = np.array([r[2] for r in rows], dtype=float).T.reshape(self._n_units, len(rows))
        cwnd = np.array([r[3] for r in rows], dtype=float).T.reshape(self._n_units, len(rows))
        wait = np.array([r[4] for r in rows])
        arr = np.array([r[5] for r in rows], dtype=float)
        stats = {
            "events": self.engine.fired,
            "accepted": self.link.accepted,
            "dropped": self.link.dropped,
            "halvings": sum(c.halvings for c in self.connections),
            "timeouts": sum(c.timeouts for c in self.connections),
            "retransmits": sum(c.retransmits for c in self.connections),
            "connections": len(self.connections),
        }
        return SimResult(
            config=copy.deepcopy(cfg),
            seed=self.seed,
            t=t,
            queue=queue,
            acked=acked,
            cwnd=cwnd,
            protocols=list(self.unit_protocols),
            starts=list(self.unit_starts),
            capacity_pps=self.capacity,
            packet_bytes=cfg.link.packet_bytes,
            wait_sum=wait,
            arrivals=arr,
            drops=self.link.dropped,
            ack_records=self.ack_records,
            chunk_records=self.chunk_records,
            stats=stats,
        )


def simulate(config: ScenarioConfig, seed: int | None = None) -> SimResult:
    return Simulation(config, seed).run()
