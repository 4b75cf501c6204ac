"""Scenario configuration: TOML profiles, dotted-key overrides, validation."""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .apf import ForbiddenZone
from .errors import ValidationError
from .quaternion import as_quat
from .rigid_body import DisturbanceModel, InertiaModel, sample_inertia
from .rw_cluster import RwCluster

PROFILES = ("default",)


def load_profile(name_or_path: str | Path = "default") -> dict:
    """Raw config tree from a shipped profile name or a TOML file path."""
    if str(name_or_path) in PROFILES:
        text = resources.files("apfsmc").joinpath(f"profiles/{name_or_path}.toml").read_text()
        return tomllib.loads(text)
    path = Path(name_or_path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    # a user file is layered over the defaults so it may be partial
    return merge(load_profile("default"), tree, source=str(path))


def merge(base: dict, update: dict, source: str = "config", prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        dotted = f"{prefix}{key}"
        if key not in out:
            raise ValidationError(f"{source}: unknown key '{dotted}'")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ValidationError(f"{source}: '{dotted}' must be a table")
            out[key] = merge(out[key], value, source, dotted + ".")
        else:
            out[key] = value
    return out


def parse_value(text: str) -> Any:
    """Interpret an override value as a TOML literal, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(tree: dict, overrides: Iterable[str]) -> dict:
    """Apply ``section.key=value`` strings; unknown keys are rejected by name."""
    tree = copy.deepcopy(tree)
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override '{item}' is not of the form key=value")
        key, text = item.split("=", 1)
        key = key.strip()
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ValidationError(f"unknown config key '{key}'")
            node = node[part]
        if parts[-1] not in node or isinstance(node[parts[-1]], dict):
            raise ValidationError(f"unknown config key '{key}'")
        node[parts[-1]] = parse_value(text.strip())
    return tree


def _auto_or_float(value, key: str) -> float | None:
    if value == "auto":
        return None
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"'{key}' must be a number or \"auto\"") from None
    if not v > 0:
        raise ValidationError(f"'{key}' must be positive")
    return v


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated scenario.

    ``omega_bar`` and ``gamma`` are ``None`` when they are to be derived from
    the design equations.
    """

    inertia: InertiaModel
    cluster: RwCluster
    disturbance: DisturbanceModel
    zones: tuple
    q0: np.ndarray
    omega0: np.ndarray
    q_d: np.ndarray
    m_hat: np.ndarray
    omega_bar: float | None
    lam: float
    k: float
    sigma_bar: float
    gamma: float | None
    dt: float
    smc_period: float
    apf_period: float
    duration: float
    seed: int
    allow_invalid_start: bool = False

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def smc_every(self) -> int:
        return int(round(self.smc_period / self.dt))

    @property
    def apf_every(self) -> int:
        return int(round(self.apf_period / self.dt))

    def with_changes(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


def _multiple(period: float, dt: float, name: str) -> None:
    n = period / dt
    if n < 1 - 1e-9 or abs(n - round(n)) > 1e-6 * max(1.0, n):
        raise ValidationError(f"sim.{name} = {period} is not an integer multiple of sim.dt = {dt}")


def _vec(value, n: int, key: str) -> np.ndarray:
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"'{key}' must be numeric") from None
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise ValidationError(f"'{key}' must be {n} finite numbers")
    return v


def scenario_from_tree(tree: dict) -> ScenarioConfig:
    """Build and validate a scenario from a raw config tree."""
    try:
        inn, cl, di, zo = tree["inertia"], tree["cluster"], tree["disturbance"], tree["zones"]
        at, gu, co, si = tree["attitude"], tree["guidance"], tree["controller"], tree["sim"]
    except KeyError as exc:
        raise ValidationError(f"missing config section {exc}") from None

    I_star = np.asarray(inn["I_star"], dtype=float)
    if I_star.shape != (3, 3):
        raise ValidationError("'inertia.I_star' must be a 3x3 matrix")
    frac = float(inn["delta_fraction"])
    if not 0 <= frac < 1:
        raise ValidationError("'inertia.delta_fraction' must lie in [0, 1)")
    inertia = InertiaModel.nominal(I_star, frac)
    seed = int(si["seed"])
    if inn["I_true"] == "sample":
        inertia = sample_inertia(inertia, np.random.default_rng(seed))
    elif inn["I_true"] != "nominal":
        inertia = inertia.with_true(np.asarray(inn["I_true"], dtype=float).reshape(3, 3))

    cluster = RwCluster.from_degrees(
        float(cl["alpha_deg"]), float(cl["beta_deg"]), float(cl["tau_w_max"]), float(cl["h_w_max"])
    )
    dist = DisturbanceModel(
        bias=_vec(di["bias"], 3, "disturbance.bias"),
        amp=_vec(di["amp"], 3, "disturbance.amp"),
        freq=float(di["freq"]),
        phase=_vec(di["phase"], 3, "disturbance.phase"),
        d_bar=float(di["d_bar"]),
        d1_bar=float(di["d1_bar"]),
        d2_bar=float(di["d2_bar"]),
        period=float(di["period"]),
    )
    zones: tuple = ()
    if zo["enabled"]:
        floor = math.radians(float(zo["theta_floor_deg"]))
        zones = tuple(ForbiddenZone(_vec(n, 3, "zones.directions"), floor) for n in zo["directions"])

    m_hat = _vec(at["m_hat"], 3, "attitude.m_hat")
    if abs(np.linalg.norm(m_hat) - 1.0) > 1e-2:
        raise ValidationError("'attitude.m_hat' must be a unit vector")
    m_hat = m_hat / np.linalg.norm(m_hat)

    dt = float(si["dt"])
    duration = float(si["duration"])
    if dt <= 0 or duration <= 0:
        raise ValidationError("sim.dt and sim.duration must be positive")
    _multiple(float(si["smc_period"]), dt, "smc_period")
    _multiple(float(si["apf_period"]), dt, "apf_period")
    _multiple(duration, dt, "duration")

    return ScenarioConfig(
        inertia=inertia,
        cluster=cluster,
        disturbance=dist,
        zones=zones,
        q0=as_quat(at["q0"]),
        omega0=_vec(at["omega0"], 3, "attitude.omega0"),
        q_d=as_quat(at["q_d"]),
        m_hat=m_hat,
        omega_bar=_auto_or_float(gu["omega_bar"], "guidance.omega_bar"),
        lam=float(co["lam"]),
        k=float(co["k"]),
        sigma_bar=float(co["sigma_bar"]),
        gamma=_auto_or_float(co["gamma"], "controller.gamma"),
        dt=dt,
        smc_period=float(si["smc_period"]),
        apf_period=float(si["apf_period"]),
        duration=duration,
        seed=seed,
        allow_invalid_start=bool(si["allow_invalid_start"]),
    )


def load_scenario(name_or_path: str | Path = "default", overrides: Iterable[str] = ()) -> ScenarioConfig:
    return scenario_from_tree(apply_overrides(load_profile(name_or_path), overrides))
