"""Multi-rate closed loop: 1 Hz guidance, 20 Hz control, 100 Hz plant.

The plant, wheel and controller steps run inside the compiled kernel
``_kernels.advance``; guidance is evaluated here in Python once per guidance
period and its rate is held in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .apf import ApfParams, apf_params, pointing_margins, reference_rate
from .config import ScenarioConfig
from .errors import RunFault, ValidationError
from .rigid_body import disturbance_at
from .rw_cluster import RwFilter, envelope_radius, omega_max
from .smc import GainReport, SmcParams, accuracy_bound, gain_report, synthesize_gains


@dataclass(frozen=True)
class Design:
    """Quantities derived from a scenario before anything is simulated."""

    H_bar: float
    tau_bar: float
    omega_bar_eq: float
    omega_bar: float
    apf: ApfParams
    gains: GainReport
    smc: SmcParams


def derive_design(cfg: ScenarioConfig) -> Design:
    H_bar = envelope_radius(cfg.cluster, "momentum")
    tau_bar = envelope_radius(cfg.cluster, "torque")
    w_eq = omega_max(H_bar, cfg.disturbance, cfg.inertia)
    w_bar = cfg.omega_bar if cfg.omega_bar is not None else w_eq
    apf = apf_params(w_bar, tau_bar, cfg.inertia, cfg.zones)
    eps_floor = min((z.eps_floor for z in cfg.zones), default=None)
    report = gain_report(
        cfg.inertia, w_bar, H_bar, tau_bar, cfg.disturbance.d_bar,
        cfg.lam, cfg.k, apf.eps_e_bar, eps_floor,
    )
    if cfg.gamma is None:
        smc = synthesize_gains(
            cfg.inertia, w_bar, H_bar, tau_bar, cfg.disturbance.d_bar,
            cfg.lam, cfg.k, apf.eps_e_bar, eps_floor, cfg.sigma_bar,
        )
    else:
        smc = SmcParams(cfg.lam, cfg.gamma, cfg.sigma_bar, cfg.k, report.psi)
    return Design(H_bar, tau_bar, w_eq, w_bar, apf, report, smc)


def _columns(n_zones: int) -> list:
    names = ["t"]
    names += [f"q{i}" for i in range(4)]
    names += [f"w{i + 1}" for i in range(3)]
    names += [f"qs{i}" for i in range(4)]
    names += [f"ws{i + 1}" for i in range(3)]
    names += [f"sigma{i + 1}" for i in range(3)]
    names += [f"u{i + 1}" for i in range(3)]
    names += [f"tau{i + 1}" for i in range(3)]
    names += [f"tau_w{i + 1}" for i in range(4)]
    names += [f"h_w{i + 1}" for i in range(4)]
    names += ["tau_sat", "h_sat"]
    names += [f"theta{j + 1}" for j in range(n_zones)]
    return names


@dataclass
class TelemetryLog:
    """One row per plant step; angles in radians.

    Row ``k`` holds the state at ``t_k`` and the inputs held over the
    following step.
    """

    data: np.ndarray
    n_zones: int
    dt: float
    sigma_bar: float = float("nan")

    @property
    def columns(self) -> list:
        return _columns(self.n_zones)

    t = property(lambda s: s.data[:, K.COL_T])
    q = property(lambda s: s.data[:, K.COL_Q])
    omega = property(lambda s: s.data[:, K.COL_W])
    q_star = property(lambda s: s.data[:, K.COL_QS])
    omega_star = property(lambda s: s.data[:, K.COL_WS])
    sigma = property(lambda s: s.data[:, K.COL_SIGMA])
    u = property(lambda s: s.data[:, K.COL_U])
    tau = property(lambda s: s.data[:, K.COL_TAU])
    tau_w = property(lambda s: s.data[:, K.COL_TAU_W])
    h_w = property(lambda s: s.data[:, K.COL_H_W])
    tau_sat = property(lambda s: s.data[:, K.COL_TAU_SAT] > 0.5)
    h_sat = property(lambda s: s.data[:, K.COL_H_SAT] > 0.5)

    @property
    def theta(self) -> np.ndarray:
        return self.data[:, K.COL_THETA0:K.COL_THETA0 + self.n_zones]

    @property
    def sigma_out(self) -> np.ndarray:
        """Flag rows with ``||sigma|| > sigma_bar``."""
        return np.linalg.norm(self.sigma, axis=1) > self.sigma_bar


def quat_error_rows(q_ref: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise ``conj(q_ref) (x) q``; ``q_ref`` may be a single quaternion."""
    r = np.broadcast_to(q_ref, q.shape)
    a0, a1, a2, a3 = r[:, 0], -r[:, 1], -r[:, 2], -r[:, 3]
    b0, b1, b2, b3 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=1,
    )


def boresight_inertial(q: np.ndarray, m_body) -> np.ndarray:
    """Row-wise ``R(q)^T m`` for an array of quaternions."""
    m = np.asarray(m_body, dtype=float)
    eta, eps = q[:, :1], q[:, 1:]
    return (
        (eta**2 - np.sum(eps**2, axis=1, keepdims=True)) * m
        + 2.0 * eps * (eps @ m)[:, None]
        + 2.0 * eta * np.cross(eps, m)
    )


def _first_time_forever(ok: np.ndarray, t: np.ndarray) -> float:
    """Earliest time after which ``ok`` holds for every remaining row (nan if never)."""
    if ok.size == 0 or not ok[-1]:
        return float("nan")
    bad = np.flatnonzero(~ok)
    return float(t[0] if bad.size == 0 else t[bad[-1] + 1])


@dataclass
class Metrics:
    """Scalar summary of one run; angles in radians, times in seconds.

    ``settling_time`` refers to the tracking error against the reference
    attitude, ``goal_settling_time`` to the error against the goal attitude;
    both use the accuracy bound ``sigma_bar / lambda``.
    """

    duration: float
    settling_time: float
    converged: bool
    goal_settling_time: float
    goal_converged: bool
    reaching_time: float
    max_sigma_after_reach: float
    min_theta: np.ndarray
    violation_depth: float
    max_tau_w: float
    max_h_w: float
    max_tau_body: float
    tau_sat_steps: int
    h_sat_steps: int
    max_omega_star: float
    omega_star_exceed_ticks: int
    final_q: np.ndarray
    final_goal_error: np.ndarray
    final_tracking_error: np.ndarray
    steady_tracking_error: float
    eigenaxis_deviation: float
    failed: bool = False
    fault: str = ""

    @property
    def min_theta_all(self) -> float:
        return float(np.min(self.min_theta)) if self.min_theta.size else float("nan")

    def as_row(self) -> dict:
        """Flat ``name -> float`` view for CSV reports."""
        row = {
            "failed": int(self.failed),
            "duration": self.duration,
            "settling_time": self.settling_time,
            "converged": int(self.converged),
            "goal_settling_time": self.goal_settling_time,
            "goal_converged": int(self.goal_converged),
            "reaching_time": self.reaching_time,
            "max_sigma_after_reach": self.max_sigma_after_reach,
            "min_theta_deg": math.degrees(self.min_theta_all),
            "violation_depth_deg": math.degrees(self.violation_depth),
            "max_tau_w": self.max_tau_w,
            "max_h_w": self.max_h_w,
            "max_tau_body": self.max_tau_body,
            "tau_sat_steps": self.tau_sat_steps,
            "h_sat_steps": self.h_sat_steps,
            "max_omega_star": self.max_omega_star,
            "omega_star_exceed_ticks": self.omega_star_exceed_ticks,
            "steady_tracking_error": self.steady_tracking_error,
            "eigenaxis_deviation_deg": math.degrees(self.eigenaxis_deviation),
        }
        for j, th in enumerate(self.min_theta):
            row[f"min_theta{j + 1}_deg"] = math.degrees(th)
        for i in range(4):
            row[f"final_q{i}"] = self.final_q[i]
        return row


def compute_metrics(log: TelemetryLog, cfg: ScenarioConfig, smc: SmcParams, omega_bar: float) -> Metrics:
    t = log.t
    n = t.size
    bound = accuracy_bound(smc)
    tail = slice(int(math.floor(0.9 * (n - 1))), n)

    e_track = quat_error_rows(log.q_star, log.q)[:, 1:]
    ok_track = np.linalg.norm(e_track, axis=1) <= bound
    e_goal = quat_error_rows(cfg.q_d, log.q)
    ok_goal = np.linalg.norm(e_goal[:, 1:], axis=1) <= bound

    s_norm = np.linalg.norm(log.sigma, axis=1)
    inside = np.flatnonzero(s_norm <= smc.sigma_bar)
    if inside.size:
        t_r = float(t[inside[0]])
        max_after = float(s_norm[inside[0]:].max())
    else:
        t_r = max_after = float("nan")

    theta = log.theta
    min_theta = theta.min(axis=0) if n else np.zeros(0)
    floors = np.array([z.theta_floor for z in cfg.zones])
    depth = float(np.max(np.maximum(floors - min_theta, 0.0), initial=0.0))

    ws_norm = np.linalg.norm(log.omega_star, axis=1)
    apf_rows = ws_norm[:: cfg.apf_every]

    # boresight seen from the goal frame rotates on a cone about the initial error axis
    m_goal = boresight_inertial(quat_error_rows(cfg.q_d, log.q), cfg.m_hat)
    axis = e_goal[0, 1:]
    if np.linalg.norm(axis) > 1e-9:
        axis = axis / np.linalg.norm(axis)
        cone = np.arccos(np.clip(m_goal @ axis, -1.0, 1.0))
        eig_dev = float(np.max(np.abs(cone - cone[0])))
    else:
        eig_dev = 0.0

    return Metrics(
        duration=float(t[-1]),
        settling_time=_first_time_forever(ok_track, t),
        converged=bool(ok_track[tail].all()),
        goal_settling_time=_first_time_forever(ok_goal, t),
        goal_converged=bool(ok_goal[tail].all()),
        reaching_time=t_r,
        max_sigma_after_reach=max_after,
        min_theta=min_theta,
        violation_depth=depth,
        max_tau_w=float(np.abs(log.tau_w).max()),
        max_h_w=float(np.abs(log.h_w).max()),
        max_tau_body=float(np.linalg.norm(cfg.inertia.I_star @ log.u.T, axis=0).max()),
        tau_sat_steps=int(log.tau_sat.sum()),
        h_sat_steps=int(log.h_sat.sum()),
        max_omega_star=float(ws_norm.max()),
        omega_star_exceed_ticks=int(np.sum(apf_rows > omega_bar * (1 + 1e-12))),
        final_q=log.q[-1].copy(),
        final_goal_error=e_goal[-1].copy(),
        final_tracking_error=e_track[-1].copy(),
        steady_tracking_error=float(np.abs(e_track[tail]).max()),
        eigenaxis_deviation=eig_dev,
    )


@dataclass
class RunResult:
    log: TelemetryLog
    metrics: Metrics
    design: Design = field(repr=False)


def check_start(cfg: ScenarioConfig) -> None:
    """Reject a start attitude whose boresight is inside or on a forbidden cone."""
    if cfg.allow_invalid_start:
        return
    for j, (theta, _) in enumerate(pointing_margins(cfg.q0, cfg.m_hat, cfg.zones)):
        zone = cfg.zones[j]
        if math.sin(0.5 * theta) <= zone.eps_floor:
            raise ValidationError(
                f"initial boresight is {math.degrees(theta):.3f} deg from zone {j + 1}, "
                f"not outside its {math.degrees(zone.theta_floor):.3f} deg cone"
            )


def run_scenario(cfg: ScenarioConfig, design: Design | None = None) -> RunResult:
    """Simulate one maneuver.

    Raises:
        ValidationError: invalid start attitude or infeasible design.
        RunFault: the run could not continue; the message carries the time.
    """
    if design is None:
        design = derive_design(cfg)
    check_start(cfg)

    dt = cfg.dt
    n = cfg.n_steps
    nz = len(cfg.zones)
    apf_every = cfg.apf_every
    smc = design.smc
    filt = RwFilter(dt)
    inertia = cfg.inertia.I_true
    inertia_inv = np.linalg.inv(inertia)
    zones = np.array([z.n_hat for z in cfg.zones], dtype=float).reshape(nz, 3)

    rec = np.zeros((n + 1, K.COL_THETA0 + nz))
    d_table = disturbance_at(np.arange(n) * dt, cfg.disturbance)
    x = np.concatenate((cfg.q0, cfg.omega0)).astype(float)
    qs = cfg.q0.copy()
    hw = np.zeros(4)
    fstate = np.zeros((4, 2))
    cmd = np.zeros(4)
    u = np.zeros(3)
    ws = np.zeros(3)
    flags = np.zeros(2)

    for k0 in range(0, n, apf_every):
        t = k0 * dt
        ws = reference_rate(x[:4], cfg.q_d, cfg.m_hat, cfg.zones, design.apf, t)
        k1 = min(k0 + apf_every, n)
        K.advance(
            k0, k1, k1 == n,
            x, qs, hw, fstate, cmd, u, ws, flags,
            d_table, inertia, inertia_inv, cfg.inertia.I_star,
            cfg.cluster.Z, cfg.cluster.Z_pinv, filt.b, filt.a,
            cfg.cluster.tau_w_max, cfg.cluster.h_w_max,
            smc.gamma, smc.lam, smc.S, dt, cfg.smc_every,
            cfg.m_hat, zones, rec,
        )
        if not np.all(np.isfinite(x)):
            raise RunFault("state became non-finite", k1 * dt)

    log = TelemetryLog(rec, nz, dt, smc.sigma_bar)
    return RunResult(log, compute_metrics(log, cfg, smc, design.omega_bar), design)


def export_csv(log: TelemetryLog, path) -> Path:
    """Write the log as CSV with a header row and 17 significant digits."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write(",".join(log.columns) + "\n")
            if log.data.size:
                np.savetxt(fh, log.data, fmt="%.17g", delimiter=",")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> tuple:
    """``(columns, data)`` from a file written by ``export_csv``."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data.reshape(-1, len(header))
