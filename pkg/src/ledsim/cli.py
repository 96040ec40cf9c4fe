"""Command line front end: ``ledsim run|fluid|report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from .fluid import equilibrium, params_from_link
from .presets import PRESET_NAMES, FluidJob, PresetPoint, preset
from .protocols import Protocol
from .runner import format_report, output_root, report, run_fluid, run_scenario, write_fluid

EXIT_INVALID = 2
EXIT_FAILURE = 1


def _error(kind: str, message: str, problems=None) -> None:
    # single JSON line so callers can parse failures
    payload = {"error": kind, "message": message}
    if problems:
        payload["problems"] = problems
    print(json.dumps(payload), file=sys.stderr)


def _fluid_point(target: str) -> PresetPoint:
    if target in PRESET_NAMES:
        points = [p for p in preset(target) if p.fluid is not None]
        if not points:
            raise ConfigError([f"preset {target!r} has no fluid model"])
        return points[0]
    cfg = ScenarioConfig.load(target).validate()
    if not all(Protocol.parse(f.protocol) is Protocol.FLEDBAT for f in cfg.flows):
        raise ConfigError(["the fluid model covers fLEDBAT flows only"])
    f0 = cfg.flows[0]
    if any((f.zeta, f.tau_ms, f.alpha) != (f0.zeta, f0.tau_ms, f0.alpha) for f in cfg.flows):
        raise ConfigError(["the fluid model needs identical zeta, tau_ms and alpha on every flow"])
    params = params_from_link(
        len(cfg.flows),
        cfg.link.capacity_bps,
        cfg.rtt.rtt_ms / 1e3,
        cfg.link.packet_bytes,
        tau=f0.tau_ms / 1e3,
        alpha=f0.alpha,
        zeta=f0.zeta,
        start_times=[f.start_s for f in cfg.flows],
        buffer=float(cfg.link.buffer_pkts),
    )
    return PresetPoint(cfg.name, cfg, fluid=FluidJob(params, cfg.duration_s, cfg.sample_ms / 1e3))


def cmd_run(args) -> int:
    seeds = None
    if args.seed is not None:
        n = args.reps if args.reps is not None else 1
        seeds = [args.seed + k for k in range(n)]
    out = run_scenario(args.target, args.out, seeds=seeds, reps=args.reps, write_runs=not args.no_runs)
    print(format_report(report(out)))
    print(f"artifacts: {out}")
    return 0


def cmd_fluid(args) -> int:
    point = _fluid_point(args.target)
    traj = run_fluid(point)
    out = output_root(args.out) / point.config.name / "fluid" / f"{point.label}.csv"
    write_fluid(out, traj)
    eq = equilibrium(point.fluid.params)
    print(f"X*={eq.X_star[0]:.4f} pkt/s per flow  Q*={eq.Q_star:.4f} pkt  theta={eq.theta:.4f} 1/s")
    print(f"final X={traj.X[-1].round(4).tolist()}  Q={traj.Q[-1]:.4f}")
    print(f"artifacts: {out}")
    return 0


def cmd_report(args) -> int:
    d = Path(args.directory)
    if not (d / "summary.csv").exists():
        _error("not_found", f"no summary.csv in {d}")
        return EXIT_FAILURE
    print(format_report(report(d)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ledsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a preset or a config file")
    r.add_argument("target", help=f"preset ({', '.join(PRESET_NAMES)}) or config file")
    r.add_argument("--seed", type=int, help="first seed (overrides the config)")
    r.add_argument("--reps", type=int, help="number of seeded repetitions")
    r.add_argument("--out", help="output root (default: $LEDSIM_OUT or ./ledsim-out)")
    r.add_argument("--no-runs", action="store_true", help="skip per-run time-series CSVs")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fluid", help="integrate the fluid model for a config file")
    f.add_argument("target", help="config file of fLEDBAT flows, or a preset with a fluid job")
    f.add_argument("--out", help="output root")
    f.set_defaults(func=cmd_fluid)

    p = sub.add_parser("report", help="summarize an artifact directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "reps", None) is not None and args.reps < 1:
        _error("validation", "invalid arguments", ["--reps must be positive"])
        return EXIT_INVALID
    try:
        return args.func(args)
    except ConfigError as exc:
        _error("validation", "invalid configuration", exc.problems)
        return EXIT_INVALID
    except (FileNotFoundError, KeyError) as exc:
        _error("not_found", str(exc.args[0]) if exc.args else str(exc))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
