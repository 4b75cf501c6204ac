"""Command-line entry point.

Exit status: 0 on success, 1 for invalid input or an infeasible design, 2 when
a simulation run faults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import RunFault, ValidationError

log = logging.getLogger("apfsmc")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="default", help="profile name or TOML file (default: %(default)s)")
    p.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config value by dotted key, e.g. sim.duration=600 (repeatable)",
    )
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apfsmc",
        description="Constrained attitude maneuvers: potential-field guidance with sliding-mode control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("envelope", help="momentum/torque sphere radii and the rate bound")
    _common(p)

    p = sub.add_parser("gains", help="guidance gains and switching-gain synthesis")
    _common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default: %(default)s)")

    p = sub.add_parser("simulate", help="run one closed-loop maneuver")
    _common(p)
    p.add_argument("--out", type=Path, default=Path("runs/nominal"), help="output directory (default: %(default)s)")
    p.add_argument("--no-plots", action="store_true", help="skip SVG figures")

    p = sub.add_parser("campaign", help="Monte Carlo campaign around the configured scenario")
    _common(p)
    p.add_argument("--runs", type=int, default=100, help="number of runs (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="campaign seed (default: %(default)s)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default: %(default)s)")
    p.add_argument("--out", type=Path, default=Path("runs/campaign"), help="output directory (default: %(default)s)")
    p.add_argument("--rest-to-rest", action="store_true", help="start every run at zero angular rate")
    p.add_argument("--no-plots", action="store_true", help="skip SVG band figures")

    p = sub.add_parser("report", help="render figures from a saved telemetry CSV")
    _common(p)
    p.add_argument("telemetry", type=Path, help="telemetry.csv written by 'simulate'")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: next to the CSV)")
    return parser


def _write_rows(rows: list, stream=None) -> None:
    stream = stream or sys.stdout
    w = csv.writer(stream, lineterminator="\n")
    for row in rows:
        w.writerow(row)


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def cmd_envelope(args) -> int:
    from .config import load_scenario
    from .rw_cluster import envelope_radius, omega_max

    cfg = load_scenario(args.config, args.overrides)
    H = envelope_radius(cfg.cluster, "momentum")
    tau = envelope_radius(cfg.cluster, "torque")
    w = omega_max(H, cfg.disturbance, cfg.inertia)
    _write_rows([
        ["H_bar", "tau_bar", "omega_bar", "h_d_bar", "orbit_period"],
        [_num(H), _num(tau), _num(w), _num(cfg.disturbance.h_d_bar), _num(cfg.disturbance.period)],
    ])
    return 0


def cmd_gains(args) -> int:
    from .config import load_scenario
    from .sim import derive_design

    cfg = load_scenario(args.config, args.overrides)
    d = derive_design(cfg)
    g = d.gains
    out = {
        "omega_bar": d.omega_bar,
        "eps_e_bar": d.apf.eps_e_bar,
        "alpha1": d.apf.alpha1,
        "alpha2": d.apf.alpha2,
        "eps_floor": g.eps_floor if g.eps_floor is not None else float("nan"),
        "psi": g.psi,
        "delta_hat_norm": g.delta_hat_norm,
        "delta_hat_max": float(g.delta_hat.max()),
        "delta_hat_istar_norm1": g.delta_hat_istar_norm1,
        "k": g.k,
        "k_lower": 1.0,
        "k_upper": g.k_upper,
        "gamma_synth": g.gamma,
        "gamma_ceiling": g.ceiling,
        "gamma_within_ceiling": g.within_ceiling,
        "tau_required": g.tau_required,
        "tau_bar": g.tau_bar,
        "torque_feasible": g.feasible,
        "gamma_used": d.smc.gamma,
        "accuracy_bound": d.smc.sigma_bar / d.smc.lam,
    }
    if args.format == "json":
        print(json.dumps({k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in out.items()},
                         indent=2))
    else:
        _write_rows([["key", "value"]] + [[k, _num(v)] for k, v in out.items()])
    if not g.feasible:
        log.error("torque feasibility fails: need %.4g N m, have %.4g N m", g.tau_required, g.tau_bar)
        return 1
    if not g.within_ceiling:
        log.error("synthesised gain %.4g exceeds the ceiling %.4g", g.gamma, g.ceiling)
        return 1
    return 0


def cmd_simulate(args) -> int:
    from .config import load_scenario
    from .sim import export_csv, run_scenario

    cfg = load_scenario(args.config, args.overrides)
    res = run_scenario(cfg)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    export_csv(res.log, out / "telemetry.csv")
    row = res.metrics.as_row()
    with (out / "metrics.csv").open("w", newline="") as fh:
        _write_rows([list(row), [_num(v) for v in row.values()]], fh)
    if not args.no_plots:
        from .plotting import export_svg_plots

        floor = cfg.zones[0].theta_floor if cfg.zones else None
        for p in export_svg_plots(res.log, out / "run", cfg.sigma_bar, floor):
            log.info("wrote %s", p)
    _write_rows([list(row), [_num(v) for v in row.values()]])
    return 0


def cmd_campaign(args) -> int:
    from .campaign import CampaignSpec, report_csv, run_campaign
    from .config import load_scenario

    cfg = load_scenario(args.config, args.overrides)
    spec = CampaignSpec(cfg, n_runs=args.runs, seed=args.seed, omega0_range=0.0 if args.rest_to_rest else 1e-3)
    report = run_campaign(spec, workers=args.workers)
    for p in report_csv(report, args.out):
        log.info("wrote %s", p)
    if not args.no_plots:
        from .plotting import export_band_plots

        for p in export_band_plots(report, args.out):
            log.info("wrote %s", p)
    _write_rows([["key", "value"]] + [[k, _num(v)] for k, v in report.summary().items()])
    return 0


def cmd_report(args) -> int:
    from ._kernels import COL_THETA0
    from .config import load_scenario
    from .plotting import export_svg_plots
    from .sim import TelemetryLog, read_csv

    cfg = load_scenario(args.config, args.overrides)
    try:
        columns, data = read_csv(args.telemetry)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read telemetry {args.telemetry}: {exc}") from exc
    n_zones = len(columns) - COL_THETA0
    if n_zones < 0:
        raise ValidationError(f"{args.telemetry} is not a telemetry file")
    dt = float(data[1, 0] - data[0, 0]) if data.shape[0] > 1 else cfg.dt
    tl = TelemetryLog(data, n_zones, dt, cfg.sigma_bar)
    out = args.out or args.telemetry.parent
    floor = cfg.zones[0].theta_floor if cfg.zones else None
    paths = export_svg_plots(tl, Path(out) / "run", cfg.sigma_bar, floor)
    _write_rows([["figure"]] + [[str(p)] for p in paths])
    return 0


COMMANDS = {
    "envelope": cmd_envelope,
    "gains": cmd_gains,
    "simulate": cmd_simulate,
    "campaign": cmd_campaign,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return COMMANDS[args.command](args)
    except RunFault as exc:
        log.error("run fault: %s", exc)
        return 2
    except ValidationError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
