"""Monte Carlo robustness campaign over initial conditions, zones and plant uncertainty."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .apf import ForbiddenZone, pointing_margins
from .config import ScenarioConfig
from .errors import ApfSmcError, RejectionExhausted, ValidationError
from .quaternion import normalize
from .rigid_body import InertiaModel, sample_inertia
from .sim import Metrics, TelemetryLog, run_scenario

# violation depth histogram edges, degrees; the first bin holds safe runs
HIST_EDGES = (0.0, 0.25, 0.5, 1.0, math.inf)
BAND_SIGNALS = ("q", "tau_w", "h_w", "theta")


@dataclass(frozen=True)
class CampaignSpec:
    """Perturbation ranges around ``base``.

    Attributes:
        q0_frac: componentwise relative perturbation of ``q0`` before renormalising.
        omega0_range: per-axis bound on the initial rate (rad/s).
        zone_cone_deg: half-angle of the cap each zone axis is redrawn in.
        inertia_frac: elementwise bound of the true-inertia offset, fraction of ``|I*|``.
        randomize_disturbance: redraw per-axis sign and phase of the disturbance.
        trace_stride: seconds between samples kept for the envelope bands.
    """

    base: ScenarioConfig
    n_runs: int = 100
    seed: int = 0
    q0_frac: float = 0.1
    omega0_range: float = 1e-3
    zone_cone_deg: float = 15.0
    inertia_frac: float = 0.2
    randomize_disturbance: bool = True
    trace_stride: float = 1.0
    max_tries: int = 100

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValidationError("a campaign needs at least one run")
        for name in ("q0_frac", "omega0_range", "zone_cone_deg", "inertia_frac"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.trace_stride <= 0:
            raise ValidationError("trace_stride must be positive")


def run_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for run ``index``, fixed by the campaign seed alone."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _cap_direction(n: np.ndarray, half_angle: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw on the spherical cap of ``half_angle`` around ``n``."""
    if half_angle == 0:
        return n.copy()
    cos_t = rng.uniform(math.cos(half_angle), 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return cos_t * n + sin_t * (math.cos(phi) * e1 + math.sin(phi) * e2)


def _draw(spec: CampaignSpec, rng: np.random.Generator) -> ScenarioConfig:
    base = spec.base
    q0 = base.q0 * (1.0 + rng.uniform(-spec.q0_frac, spec.q0_frac, 4)) if spec.q0_frac else base.q0
    omega0 = base.omega0 + (rng.uniform(-spec.omega0_range, spec.omega0_range, 3) if spec.omega0_range else 0.0)
    cone = math.radians(spec.zone_cone_deg)
    zones = base.zones
    if cone:
        zones = tuple(ForbiddenZone(_cap_direction(z.n_hat, cone, rng), z.theta_floor) for z in base.zones)
    inertia = base.inertia
    if spec.inertia_frac:
        box = InertiaModel.nominal(base.inertia.I_star, spec.inertia_frac)
        inertia = base.inertia.with_true(sample_inertia(box, rng, spec.max_tries).I_true)
    dist = base.disturbance
    if spec.randomize_disturbance:
        sign = rng.choice((-1.0, 1.0), 3)
        dist = replace(dist, bias=sign * dist.bias, amp=sign * dist.amp, phase=rng.uniform(0.0, 2.0 * math.pi, 3))
    return replace(base, q0=normalize(q0), omega0=np.asarray(omega0, dtype=float), zones=zones,
                   inertia=inertia, disturbance=dist)


def _valid_start(cfg: ScenarioConfig) -> bool:
    return all(
        math.sin(0.5 * th) > z.eps_floor for (th, _), z in zip(pointing_margins(cfg.q0, cfg.m_hat, cfg.zones), cfg.zones)
    )


def generate_runs(spec: CampaignSpec) -> list:
    """Perturbed scenarios, one per run.

    Draws that put the boresight inside a zone at start are redrawn from the
    same run stream, since the guidance guarantees assume a safe start.
    """
    runs = []
    for i in range(spec.n_runs):
        rng = run_rng(spec.seed, i)
        for _ in range(spec.max_tries):
            cfg = _draw(spec, rng)
            if cfg.allow_invalid_start or _valid_start(cfg):
                break
        else:
            raise RejectionExhausted(f"run {i}: no safe start attitude in {spec.max_tries} draws")
        runs.append(cfg)
    return runs


@dataclass
class RunRecord:
    index: int
    metrics: Metrics
    trace_t: np.ndarray = field(repr=False)
    traces: dict = field(repr=False)


def failed_metrics(cfg: ScenarioConfig, message: str) -> Metrics:
    """Placeholder metrics for a run that raised; counted as a full-depth violation."""
    nan = float("nan")
    floor = max((z.theta_floor for z in cfg.zones), default=0.0)
    return Metrics(
        duration=nan, settling_time=nan, converged=False, goal_settling_time=nan, goal_converged=False,
        reaching_time=nan, max_sigma_after_reach=nan, min_theta=np.full(len(cfg.zones), nan),
        violation_depth=floor, max_tau_w=nan, max_h_w=nan, max_tau_body=nan, tau_sat_steps=0,
        h_sat_steps=0, max_omega_star=nan, omega_star_exceed_ticks=0, final_q=np.full(4, nan),
        final_goal_error=np.full(4, nan), final_tracking_error=np.full(3, nan),
        steady_tracking_error=nan, eigenaxis_deviation=nan, failed=True, fault=message,
    )


def _traces(log: TelemetryLog, stride: int) -> dict:
    return {name: getattr(log, name)[::stride].copy() for name in BAND_SIGNALS}


def _execute(args) -> RunRecord:
    index, cfg, stride_s = args
    stride = max(1, int(round(stride_s / cfg.dt)))
    t = np.arange(0, cfg.n_steps + 1, stride) * cfg.dt
    try:
        res = run_scenario(cfg)
    except ApfSmcError as exc:
        return RunRecord(index, failed_metrics(cfg, str(exc)), t, {})
    return RunRecord(index, res.metrics, t, _traces(res.log, stride))


@dataclass
class CampaignReport:
    """Per-run metrics and the aggregates computed from them.

    ``bands[name]`` is ``(lo, hi)``, the elementwise min and max of that
    signal over all completed runs at the times in ``band_t``.
    """

    seed: int
    records: list
    band_t: np.ndarray
    bands: dict

    @property
    def metrics(self) -> list:
        return [r.metrics for r in self.records]

    @property
    def n_runs(self) -> int:
        return len(self.records)

    @property
    def n_failed(self) -> int:
        return sum(m.failed for m in self.metrics)

    @property
    def depths_deg(self) -> np.ndarray:
        return np.array([math.degrees(m.violation_depth) for m in self.metrics])

    @property
    def violation_count(self) -> int:
        return int(np.sum(self.depths_deg > 0))

    @property
    def violation_fraction(self) -> float:
        return self.violation_count / self.n_runs

    @property
    def max_violation_deg(self) -> float:
        return float(self.depths_deg.max(initial=0.0))

    @property
    def convergence_rate(self) -> float:
        return float(np.mean([m.goal_converged for m in self.metrics]))

    def histogram(self) -> list:
        """``(label, count)`` for violation depth bins; counts sum to ``n_runs``."""
        d = self.depths_deg
        out = [("none", int(np.sum(d <= 0)))]
        for lo, hi in zip(HIST_EDGES[:-1], HIST_EDGES[1:]):
            label = f"({lo:g},{hi:g}]" if math.isfinite(hi) else f"({lo:g},inf)"
            out.append((label, int(np.sum((d > lo) & (d <= hi)))))
        return out

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "n_runs": self.n_runs,
            "n_failed": self.n_failed,
            "violation_count": self.violation_count,
            "violation_fraction": self.violation_fraction,
            "max_violation_deg": self.max_violation_deg,
            "convergence_rate": self.convergence_rate,
        }


def _bands(records: list) -> dict:
    ok = [r for r in records if r.traces]
    if not ok:
        return {}
    return {
        name: (np.min([r.traces[name] for r in ok], axis=0), np.max([r.traces[name] for r in ok], axis=0))
        for name in BAND_SIGNALS
    }


def run_campaign(spec: CampaignSpec, workers: int = 1) -> CampaignReport:
    """Run every scenario of the campaign; results do not depend on ``workers``."""
    runs = generate_runs(spec)
    jobs = [(i, cfg, spec.trace_stride) for i, cfg in enumerate(runs)]
    if workers <= 1:
        records = [_execute(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_execute, jobs, chunksize=1))
    band_t = records[0].trace_t
    return CampaignReport(spec.seed, records, band_t, _bands(records))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def report_csv(report: CampaignReport, out_dir) -> list:
    """Write ``summary.csv``, ``runs.csv`` and ``histogram.csv``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "summary.csv", out / "runs.csv", out / "histogram.csv"]

    with paths[0].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for k, v in report.summary().items():
            w.writerow([k, _fmt(v)])

    rows = [{"run": r.index, **r.metrics.as_row(), "fault": r.metrics.fault} for r in report.records]
    with paths[1].open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})

    with paths[2].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["depth_deg", "count"])
        for label, count in report.histogram():
            w.writerow([label, count])
    return paths
