"""Named experiment presets.

Each preset expands to a list of points; a point is one scenario config
plus the sweep coordinates that produced it. ``fluid-vs-sim`` also carries
a fluid-model job on the same time grid.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .config import (
    FlowConfig,
    MeasureConfig,
    RttConfig,
    ScenarioConfig,
    SwarmConfig,
    TrafficConfig,
)
from .fluid import FluidParams

# half-decade log grid over [1e-4, 10], plus 5 to resolve the upper crossover region
ZETA_GRID = tuple(sorted({float(z) for z in np.round(np.logspace(-4, 1, 11), 12)} | {5.0}))
FAIRNESS_ZETAS = (0.01, 0.1, 0.2, 0.5)
PERSISTENCE_GRID = tuple(round(0.1 * k, 1) for k in range(11))


@dataclass
class FluidJob:
    params: FluidParams
    t_end: float
    dt: float


@dataclass
class PresetPoint:
    label: str
    config: ScenarioConfig
    coords: dict = field(default_factory=dict)
    fluid: FluidJob | None = None


def _latecomer_ledbat():
    cfg = ScenarioConfig(
        name="latecomer-ledbat",
        flows=[FlowConfig("ledbat", 0.0), FlowConfig("ledbat", 10.0, stop_s=50.0)],
        duration_s=80.0,
        # steady state of the contention phase; the takeover lasts ~10 s
        measure=MeasureConfig(20.0, 50.0, "ledbat"),
    )
    return [PresetPoint("latecomer-ledbat", cfg)]


def _fluid_vs_sim():
    zeta = 0.1
    cfg = ScenarioConfig(
        name="fluid-vs-sim",
        flows=[FlowConfig("fledbat", 0.0, zeta=zeta), FlowConfig("fledbat", 2.0, zeta=zeta)],
        duration_s=60.0,
        measure=MeasureConfig(20.0, 60.0, "fledbat"),
    )
    C = cfg.link.capacity_bps / (8.0 * cfg.link.packet_bytes)
    params = FluidParams(
        N=2, C=C, R=cfg.rtt.rtt_ms / 1e3, tau=0.025, alpha=1.0, zeta=zeta, start_times=(0.0, 2.0)
    )
    job = FluidJob(params, cfg.duration_s, cfg.sample_ms / 1e3)
    return [PresetPoint("fluid-vs-sim", cfg, {"zeta": zeta}, job)]


def _time_series(name, mode, zeta):
    cfg = ScenarioConfig(
        name=name,
        flows=[FlowConfig("fledbat", 0.0, zeta=zeta), FlowConfig("fledbat", 10.0, zeta=zeta)],
        traffic=TrafficConfig(mode),
        duration_s=100.0,
        measure=MeasureConfig(20.0, 100.0, "fledbat"),
    )
    return [PresetPoint(name, cfg, {"zeta": zeta})]


def _sensitivity(name, other, mode, starts, jitter):
    points = []
    for z in ZETA_GRID:
        cfg = ScenarioConfig(
            name=name,
            flows=[
                FlowConfig("fledbat", starts[0], zeta=z),
                FlowConfig(other, starts[1], zeta=z),
            ],
            traffic=TrafficConfig(mode),
            duration_s=100.0,
            start_jitter_s=jitter,
            measure=MeasureConfig(20.0, 100.0, "fledbat"),
        )
        points.append(PresetPoint(f"{name}-z{z:g}", cfg, {"zeta": z}))
    return points


def _fairness_vs_n():
    points = []
    for n in range(2, 11):
        last = 10.0 * (n - 1)
        for z in FAIRNESS_ZETAS:
            cfg = ScenarioConfig(
                name="fairness-vs-n",
                flows=[FlowConfig("fledbat", 10.0 * k, zeta=z) for k in range(n)],
                traffic=TrafficConfig("chunk"),
                duration_s=last + 70.0,
                measure=MeasureConfig(last + 10.0, None, "fledbat"),
            )
            points.append(PresetPoint(f"fairness-vs-n-n{n}-z{z:g}", cfg, {"n": n, "zeta": z}))
    return points


def _swarm_realistic():
    points = []
    for rtt_mode in ("homogeneous", "heterogeneous"):
        for proto in ("fledbat", "ledbat"):
            for pp in PERSISTENCE_GRID:
                cfg = ScenarioConfig(
                    name="swarm-realistic",
                    traffic=TrafficConfig("swarm"),
                    swarm=SwarmConfig(persistence=pp, protocol=proto, zeta=0.1),
                    rtt=RttConfig(mode=rtt_mode),
                    duration_s=100.0,
                    measure=MeasureConfig(20.0, None, proto),
                )
                points.append(
                    PresetPoint(
                        f"swarm-{rtt_mode}-{proto}-pp{pp:g}",
                        cfg,
                        {"rtt": rtt_mode, "protocol": proto, "persistence": pp},
                    )
                )
    return points


_PRESETS = {
    "latecomer-ledbat": _latecomer_ledbat,
    "fluid-vs-sim": _fluid_vs_sim,
    "chunk-time": lambda: _time_series("chunk-time", "chunk", 0.01),
    "backlogged-time": lambda: _time_series("backlogged-time", "backlogged", 5.0),
    # two persistent sources: a chunked TCP idles one RTT per chunk and
    # cannot fill the pipe alone, so the TCP sweep uses backlogged traffic
    "sens-tcp": lambda: _sensitivity("sens-tcp", "reno", "backlogged", (0.0, 0.0), 0.0),
    "sens-ledbat": lambda: _sensitivity("sens-ledbat", "ledbat", "chunk", (0.0, 0.0), 10.0),
    "sens-fledbat": lambda: _sensitivity("sens-fledbat", "fledbat", "chunk", (0.0, 10.0), 0.0),
    "fairness-vs-n": _fairness_vs_n,
    "swarm-realistic": _swarm_realistic,
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> list[PresetPoint]:
    try:
        build = _PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}") from None
    points = build()
    for p in points:
        p.config.validate()
    return copy.deepcopy(points)
