"""Run presets or config files and write their artifacts.

Layout of an artifact directory::

    manifest.json          config echo, seeds, package version
    summary.csv            one row per (point, seed)
    configs/<label>.cfg    each point's config in the text format
    runs/<label>_s<seed>.csv
    fluid/<label>.csv      fluid trajectory, when the point has one

CSV files start with a ``# <schema> v<version>`` comment line.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .config import ScenarioConfig
from .fluid import FluidTrajectory, empty_state, integrate
from .metrics import mean_std, summarize
from .presets import PRESET_NAMES, PresetPoint, preset
from .simulation import SimResult, simulate

SCHEMA_VERSION = 1
OUT_ENV = "LEDSIM_OUT"
SUMMARY_FIELDS = ("scenario_id", "seed", "F", "eta", "breakdown", "mean_queue_pkts")


def output_root(explicit: str | os.PathLike | None = None) -> Path:
    if explicit is not None:
        return Path(explicit)
    return Path(os.environ.get(OUT_ENV, "ledsim-out"))


def resolve_points(target: str) -> list[PresetPoint]:
    """A preset name, or a path to a config file (one point)."""
    if target in PRESET_NAMES:
        return preset(target)
    path = Path(target)
    if not path.exists():
        raise FileNotFoundError(f"{target!r} is neither a preset ({', '.join(PRESET_NAMES)}) nor a file")
    cfg = ScenarioConfig.load(path).validate()
    return [PresetPoint(cfg.name, cfg)]


def run_seeds(config: ScenarioConfig, seeds) -> list[SimResult]:
    return [simulate(config, s) for s in seeds]


def measured(result: SimResult):
    m = result.config.measure
    return summarize(result, m.start_s, m.end_s, m.breakdown_protocol)


@dataclass
class SummaryRow:
    scenario_id: str
    seed: int
    F: float
    eta: float
    breakdown: float | None
    mean_queue_pkts: float

    def as_csv(self):
        b = "" if self.breakdown is None else f"{self.breakdown:.6f}"
        return [self.scenario_id, self.seed, f"{self.F:.6f}", f"{self.eta:.6f}", b, f"{self.mean_queue_pkts:.4f}"]


def summary_row(label: str, result: SimResult) -> SummaryRow:
    s = measured(result)
    return SummaryRow(label, result.seed, s.fairness, s.efficiency, s.breakdown, s.mean_queue_pkts)


def _write_csv(path: Path, schema: str, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# {schema} v{SCHEMA_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_timeseries(path: Path, r: SimResult) -> None:
    n = r.n_units
    header = ["t", "queue_pkts"] + [f"acked_{i + 1}" for i in range(n)] + [f"cwnd_{i + 1}" for i in range(n)]
    rows = (
        [f"{r.t[k]:.6f}", f"{r.queue[k]:g}"]
        + [f"{r.acked[i, k]:g}" for i in range(n)]
        + [f"{r.cwnd[i, k]:.4f}" for i in range(n)]
        for k in range(len(r.t))
    )
    _write_csv(path, "ledsim-timeseries", header, rows)


def write_fluid(path: Path, traj: FluidTrajectory) -> None:
    n = traj.X.shape[1]
    header = ["t"] + [f"X_{i + 1}" for i in range(n)] + ["Q"]
    rows = (
        [f"{traj.t[k]:.6f}"] + [f"{x:.6f}" for x in traj.X[k]] + [f"{traj.Q[k]:.6f}"]
        for k in range(len(traj.t))
    )
    _write_csv(path, "ledsim-fluid", header, rows)


def read_csv(path: str | os.PathLike) -> tuple[str, list[dict]]:
    """Returns ``(schema_line, rows)`` for a file written by this module."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing schema header")
        return first.lstrip("# "), list(csv.DictReader(fh))


def run_fluid(point: PresetPoint) -> FluidTrajectory:
    job = point.fluid
    if job is None:
        raise ValueError(f"point {point.label!r} has no fluid job")
    return integrate(job.params, empty_state(job.params), job.t_end, dt=job.dt)


def run_scenario(
    target: str | ScenarioConfig,
    out_dir: str | os.PathLike | None = None,
    seeds=None,
    reps: int | None = None,
    write_runs: bool = True,
) -> Path:
    """Run every point of a preset/config for each seed; return the artifact dir.

    Seeds default to ``config.seed + k`` for ``k < repetitions``.
    """
    if isinstance(target, ScenarioConfig):
        points = [PresetPoint(target.name, target.validate())]
    else:
        points = resolve_points(target)
    name = points[0].config.name
    out = output_root(out_dir) / name
    out.mkdir(parents=True, exist_ok=True)

    rows: list[SummaryRow] = []
    manifest = {"version": __version__, "schema": SCHEMA_VERSION, "scenario": name, "points": []}
    for p in points:
        cfg = p.config
        n = cfg.repetitions if reps is None else reps
        run_seeds_ = list(seeds) if seeds is not None else [cfg.seed + k for k in range(n)]
        (out / "configs").mkdir(exist_ok=True)
        (out / "configs" / f"{p.label}.cfg").write_text(cfg.to_text())
        for s in run_seeds_:
            r = simulate(cfg, s)
            rows.append(summary_row(p.label, r))
            if write_runs:
                write_timeseries(out / "runs" / f"{p.label}_s{s}.csv", r)
        entry = {"label": p.label, "coords": p.coords, "seeds": run_seeds_, "config": cfg.to_text()}
        if p.fluid is not None:
            write_fluid(out / "fluid" / f"{p.label}.csv", run_fluid(p))
            fp = p.fluid.params
            entry["fluid"] = {
                "N": fp.N, "C": fp.C, "R": fp.R, "tau": fp.tau, "alpha": fp.alpha,
                "zeta": fp.zeta, "start_times": list(fp.starts), "t_end": p.fluid.t_end, "dt": p.fluid.dt,
            }
        manifest["points"].append(entry)

    _write_csv(out / "summary.csv", "ledsim-summary", SUMMARY_FIELDS, (r.as_csv() for r in rows))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def report(directory: str | os.PathLike) -> list[dict]:
    """Mean and standard deviation per scenario point from ``summary.csv``."""
    _, rows = read_csv(Path(directory) / "summary.csv")
    groups: dict[str, list[dict]] = {}
    for r in rows:
        groups.setdefault(r["scenario_id"], []).append(r)
    out = []
    for sid, rs in groups.items():
        entry = {"scenario_id": sid, "runs": len(rs)}
        for key in ("F", "eta", "breakdown", "mean_queue_pkts"):
            vals = [float(r[key]) for r in rs if r[key] not in ("", None)]
            entry[key] = mean_std(vals)
        out.append(entry)
    return out


def format_report(entries: list[dict]) -> str:
    def ms(v):
        m, s = v
        return "n/a" if math.isnan(m) else f"{m:.3f}±{s:.3f}"

    width = max([len(e["scenario_id"]) for e in entries] + [11])
    lines = [f"{'scenario_id':<{width}}  runs  {'F':>13}  {'eta':>13}  {'breakdown':>13}  {'queue':>13}"]
    for e in entries:
        lines.append(
            f"{e['scenario_id']:<{width}}  {e['runs']:>4}  {ms(e['F']):>13}  {ms(e['eta']):>13}"
            f"  {ms(e['breakdown']):>13}  {ms(e['mean_queue_pkts']):>13}"
        )
    return "\n".join(lines)

