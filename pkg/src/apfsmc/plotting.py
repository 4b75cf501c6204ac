"""SVG figures for single runs and campaign envelopes."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed hash salt keeps the SVG output byte-identical across runs
plt.rcParams["svg.hashsalt"] = "apfsmc"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _lines(t, y, labels, title, ylabel, path, band=None, hlines=()):
    fig, ax = plt.subplots(figsize=(7, 3.6), layout="constrained")
    for i in range(y.shape[1]):
        ax.plot(t, y[:, i], lw=1.0, label=labels[i])
    if band is not None:
        ax.axhspan(-band, band, color="0.85", zorder=0, label=f"+-{band:g}")
    for value, label in hlines:
        ax.axhline(value, color="k", ls="--", lw=0.8, label=label)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=4)
    return _save(fig, path)


def export_svg_plots(log, prefix, sigma_bar: float | None = None, theta_floor: float | None = None) -> list:
    """Write wheel torque, wheel momentum, quaternion, sliding variable and zone-angle plots.

    Files are named ``<prefix>_<kind>.svg``.
    """
    prefix = Path(prefix)
    t = log.t
    base = prefix.parent / prefix.name
    out = [
        _lines(t, log.tau_w, [f"wheel {i + 1}" for i in range(4)], "Wheel torque", "tau_w [N m]",
               base.with_name(base.name + "_wheel_torque.svg")),
        _lines(t, log.h_w, [f"wheel {i + 1}" for i in range(4)], "Wheel momentum", "h_w [N m s]",
               base.with_name(base.name + "_wheel_momentum.svg")),
        _lines(t, log.q, ["eta", "eps1", "eps2", "eps3"], "Attitude quaternion", "q [-]",
               base.with_name(base.name + "_quaternion.svg")),
        _lines(t, log.sigma, ["sigma1", "sigma2", "sigma3"], "Sliding variable", "sigma [rad/s]",
               base.with_name(base.name + "_sigma.svg"), band=sigma_bar),
    ]
    if log.n_zones:
        hl = [(math.degrees(theta_floor), "floor")] if theta_floor else []
        out.append(
            _lines(t, np.degrees(log.theta), [f"zone {j + 1}" for j in range(log.n_zones)],
                   "Boresight to zone axes", "theta [deg]",
                   base.with_name(base.name + "_zone_angles.svg"), hlines=hl)
        )
    return out


def export_band_plots(report, out_dir) -> list:
    """Min/max envelopes over the campaign runs, one SVG per signal."""
    out_dir = Path(out_dir)
    t = report.band_t
    titles = {
        "q": ("Quaternion envelope", "q [-]", ["eta", "eps1", "eps2", "eps3"], 1.0),
        "tau_w": ("Wheel torque envelope", "tau_w [N m]", [f"wheel {i + 1}" for i in range(4)], 1.0),
        "h_w": ("Wheel momentum envelope", "h_w [N m s]", [f"wheel {i + 1}" for i in range(4)], 1.0),
        "theta": ("Boresight to zone axes envelope", "theta [deg]", None, 180.0 / math.pi),
    }
    paths = []
    for name, (lo, hi) in report.bands.items():
        title, ylabel, labels, scale = titles[name]
        fig, ax = plt.subplots(figsize=(7, 3.6), layout="constrained")
        for i in range(lo.shape[1]):
            label = labels[i] if labels else f"zone {i + 1}"
            ax.fill_between(t, scale * lo[:, i], scale * hi[:, i], alpha=0.35, lw=0, label=label)
        ax.set_xlabel("t [s]")
        ax.set_ylabel(ylabel)
        ax.set_title(f"{title} ({report.n_runs} runs)")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=7, ncol=4)
        paths.append(_save(fig, out_dir / f"band_{name}.svg"))
    return paths
