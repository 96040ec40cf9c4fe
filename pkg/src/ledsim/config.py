"""Scenario configuration and its flat dotted-key text format.

Grammar, one assignment per line::

    # comment
    link.capacity_bps = 10000000.0
    flows.0.protocol = "fledbat"
    flows.0.stop_s = null

Keys are dot-separated paths; an integer segment indexes a list. Values
are JSON literals (numbers, quoted strings, true/false/null, lists); an
unquoted value that is not valid JSON is read as a bare string.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .protocols import Protocol
from .traffic import TrafficMode


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class LinkConfig:
    capacity_bps: float = 10e6
    buffer_pkts: int = 100
    packet_bytes: int = 1500


@dataclass
class FlowConfig:
    protocol: str = "fledbat"
    start_s: float = 0.0
    stop_s: float | None = None
    tau_ms: float = 25.0
    alpha: float = 1.0
    zeta: float = 0.1


@dataclass
class TrafficConfig:
    mode: str = "backlogged"
    chunk_size_bytes: int = 250_000


@dataclass
class SwarmConfig:
    n_neighbors: int = 10
    n_active: int = 5
    persistence: float = 1.0
    protocol: str = "fledbat"
    zeta: float = 0.1
    tau_ms: float = 25.0
    alpha: float = 1.0
    # active connections start uniformly at random in [0, start_spread_s]
    start_spread_s: float = 10.0


@dataclass
class RttConfig:
    mode: str = "homogeneous"
    rtt_ms: float = 50.0
    fwd_ms: float = 25.0
    mean_backward_ms: float = 37.9
    max_backward_ms: float = 200.0
    empirical_file: str | None = None


@dataclass
class MeasureConfig:
    start_s: float = 0.0
    end_s: float | None = None
    breakdown_protocol: str = "fledbat"


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    link: LinkConfig = field(default_factory=LinkConfig)
    flows: list[FlowConfig] = field(default_factory=list)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    rtt: RttConfig = field(default_factory=RttConfig)
    measure: MeasureConfig = field(default_factory=MeasureConfig)
    duration_s: float = 60.0
    sample_ms: float = 10.0
    seed: int = 1
    repetitions: int = 10
    # each flow start is shifted by U[0, start_jitter_s], drawn from the run seed
    start_jitter_s: float = 0.0
    ledbat_literal_eq2: bool = False
    slow_start: bool = False
    record_acks: bool = False
    rto_rtts: float = 4.0

    def validate(self) -> "ScenarioConfig":
        problems = validation_problems(self)
        if problems:
            raise ConfigError(problems)
        return self

    def to_text(self) -> str:
        return dump_text(self)

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        return parse_text(text)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return parse_text(Path(path).read_text())

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def validation_problems(cfg: ScenarioConfig) -> list[str]:
    out = []

    def positive(name, value):
        if not (isinstance(value, (int, float)) and value > 0):
            out.append(f"{name} must be positive (got {value!r})")

    def nonneg(name, value):
        if not (isinstance(value, (int, float)) and value >= 0):
            out.append(f"{name} must be non-negative (got {value!r})")

    positive("link.capacity_bps", cfg.link.capacity_bps)
    positive("link.buffer_pkts", cfg.link.buffer_pkts)
    positive("link.packet_bytes", cfg.link.packet_bytes)
    positive("duration_s", cfg.duration_s)
    positive("sample_ms", cfg.sample_ms)
    positive("repetitions", cfg.repetitions)
    positive("rto_rtts", cfg.rto_rtts)
    nonneg("start_jitter_s", cfg.start_jitter_s)
    try:
        mode = TrafficMode(cfg.traffic.mode)
    except ValueError:
        out.append(f"traffic.mode must be one of {[m.value for m in TrafficMode]}")
        mode = None
    positive("traffic.chunk_size_bytes", cfg.traffic.chunk_size_bytes)

    if cfg.rtt.mode not in ("homogeneous", "heterogeneous"):
        out.append("rtt.mode must be 'homogeneous' or 'heterogeneous'")
    positive("rtt.rtt_ms", cfg.rtt.rtt_ms)
    nonneg("rtt.fwd_ms", cfg.rtt.fwd_ms)
    nonneg("rtt.mean_backward_ms", cfg.rtt.mean_backward_ms)
    positive("rtt.max_backward_ms", cfg.rtt.max_backward_ms)
    if isinstance(cfg.rtt.rtt_ms, (int, float)) and isinstance(cfg.rtt.fwd_ms, (int, float)):
        if cfg.rtt.fwd_ms > cfg.rtt.rtt_ms:
            out.append("rtt.fwd_ms cannot exceed rtt.rtt_ms")

    if mode is TrafficMode.SWARM:
        sw = cfg.swarm
        positive("swarm.n_neighbors", sw.n_neighbors)
        positive("swarm.n_active", sw.n_active)
        if isinstance(sw.n_active, int) and isinstance(sw.n_neighbors, int):
            if sw.n_active >= sw.n_neighbors:
                out.append("swarm.n_active must be smaller than swarm.n_neighbors")
        if not (isinstance(sw.persistence, (int, float)) and 0 <= sw.persistence <= 1):
            out.append("swarm.persistence must lie in [0, 1]")
        _check_protocol(out, "swarm.protocol", sw.protocol)
        positive("swarm.zeta", sw.zeta)
        positive("swarm.tau_ms", sw.tau_ms)
        positive("swarm.alpha", sw.alpha)
        nonneg("swarm.start_spread_s", sw.start_spread_s)
    elif not cfg.flows:
        out.append("flows must list at least one flow")
    for i, f in enumerate(cfg.flows):
        _check_protocol(out, f"flows.{i}.protocol", f.protocol)
        nonneg(f"flows.{i}.start_s", f.start_s)
        positive(f"flows.{i}.tau_ms", f.tau_ms)
        positive(f"flows.{i}.alpha", f.alpha)
        positive(f"flows.{i}.zeta", f.zeta)
        if f.stop_s is not None and not (
            isinstance(f.stop_s, (int, float)) and f.stop_s > f.start_s
        ):
            out.append(f"flows.{i}.stop_s must be after start_s")

    m = cfg.measure
    nonneg("measure.start_s", m.start_s)
    if isinstance(m.start_s, (int, float)) and isinstance(cfg.duration_s, (int, float)):
        end = cfg.duration_s if m.end_s is None else m.end_s
        if isinstance(end, (int, float)) and not (m.start_s < end <= cfg.duration_s):
            out.append("measurement window must satisfy start_s < end_s <= duration_s")
    _check_protocol(out, "measure.breakdown_protocol", m.breakdown_protocol)
    return out


def _check_protocol(out, name, value):
    try:
        Protocol.parse(value)
    except ValueError:
        out.append(f"{name} must be one of {[p.value for p in Protocol]} (got {value!r})")


# --- text format -------------------------------------------------------------


def dump_text(cfg: ScenarioConfig) -> str:
    rows: list[tuple[str, Any]] = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for g in dataclasses.fields(value):
                rows.append((f"{f.name}.{g.name}", getattr(value, g.name)))
        elif f.name == "flows":
            for i, flow in enumerate(value):
                for g in dataclasses.fields(flow):
                    rows.append((f"flows.{i}.{g.name}", getattr(flow, g.name)))
        else:
            rows.append((f.name, value))
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in rows)


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_text(text: str) -> ScenarioConfig:
    cfg = ScenarioConfig()
    flows: dict[int, dict[str, Any]] = {}
    problems = []
    sections = {f.name: f for f in dataclasses.fields(cfg)}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, raw = stripped.split("=", 1)
        key = key.strip()
        value = _parse_value(raw)
        parts = key.split(".")
        head = parts[0]
        if head == "flows":
            if len(parts) != 3 or not parts[1].isdigit():
                problems.append(f"line {lineno}: flow keys look like flows.<i>.<field>")
                continue
            names = {g.name for g in dataclasses.fields(FlowConfig)}
            if parts[2] not in names:
                problems.append(f"line {lineno}: unknown flow field {parts[2]!r}")
                continue
            flows.setdefault(int(parts[1]), {})[parts[2]] = value
        elif head in sections:
            current = getattr(cfg, head)
            if dataclasses.is_dataclass(current):
                names = {g.name for g in dataclasses.fields(current)}
                if len(parts) != 2 or parts[1] not in names:
                    problems.append(f"line {lineno}: unknown key {key!r}")
                    continue
                setattr(current, parts[1], _coerce(current, parts[1], value))
            elif len(parts) == 1:
                setattr(cfg, head, _coerce(cfg, head, value))
            else:
                problems.append(f"line {lineno}: unknown key {key!r}")
        else:
            problems.append(f"line {lineno}: unknown key {key!r}")
    if flows:
        idx = sorted(flows)
        if idx != list(range(len(idx))):
            problems.append("flow indices must be contiguous starting at 0")
        cfg.flows = [FlowConfig(**{k: _coerce(FlowConfig, k, v) for k, v in flows[i].items()}) for i in idx]
    if problems:
        raise ConfigError(problems)
    return cfg


def _coerce(owner, name: str, value: Any) -> Any:
    # ints written where floats are expected stay numerically equal; keep
    # declared float fields as float so dump/parse round-trips exactly
    default = next(f for f in dataclasses.fields(owner) if f.name == name)
    if isinstance(value, int) and not isinstance(value, bool) and "float" in str(default.type):
        return float(value)
    return value
