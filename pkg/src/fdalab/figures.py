"""Figure rendering for run directories.

The report path draws what the delimited outputs contain: physical
profiles, observable histories against the decay bound, per-check margins,
and the rescaled-orbit convergence picture.  Everything is written to PNG
files next to the CSV/JSON output; nothing opens a display.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .profiles import Params, barenblatt
from .textio import load_profile, load_snapshot

__all__ = ["render_run_figures"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_FIG_SIZE = (6.4, 6.4 * _GOLDEN)

_RC = {
    "figure.figsize": _FIG_SIZE,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path)
    plt.close(fig)
    return path


def _fig_profiles(run_dir: Path, report: dict) -> Path | None:
    snap_files = sorted((run_dir / "snapshots").glob("snapshot_*.txt"))
    if not snap_files:
        return None
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for path in snap_files:
            snap, _ = load_snapshot(path)
            r = snap.field.grid.centers
            pos = snap.field.values > 0.0
            if not pos.any():
                continue
            ax.loglog(r[pos], snap.field.values[pos], label=f"t={snap.t:g}")
        ax.set_xlabel("r")
        ax.set_ylabel("u(t, r)")
        ax.set_title("radial profiles")
        if len(snap_files) <= 12:
            ax.legend(fontsize=7)
        return _save(fig, run_dir / "fig_profiles.png")


def _fig_observables(run_dir: Path, report: dict) -> Path | None:
    obs = report.get("observables")
    if not obs or not obs.get("t"):
        return None
    t = np.asarray(obs["t"], dtype=float)
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(_FIG_SIZE[0] * 1.6, _FIG_SIZE[1]))
        positive = t > 0.0
        ax1.loglog(t[positive], np.asarray(obs["sup"])[positive], "o-", label="sup u")
        bound = report.get("flat_decay_bound")
        if bound:
            ax1.loglog(t[positive], np.asarray(bound)[positive], "k--", label="decay bound")
        ax1.set_xlabel("t")
        ax1.set_ylabel("sup norm")
        ax1.legend(fontsize=7)
        ax2.plot(t, obs["mass"], "o-")
        ax2.set_xlabel("t")
        ax2.set_ylabel("mass")
        if positive.any() and t[positive].max() / max(t[positive].min(), 1e-300) > 100:
            ax2.set_xscale("log")
        fig.suptitle("observables")
        return _save(fig, run_dir / "fig_observables.png")


def _fig_margins(run_dir: Path, report: dict) -> Path | None:
    checks = report.get("checks", [])
    if not checks:
        return None
    names = [c["check_name"] for c in checks]
    margins = [c["worst_margin"] for c in checks]
    tols = [c["tol"] for c in checks]
    colors = ["tab:green" if c["passed"] else "tab:red" for c in checks]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ypos = np.arange(len(names))
        finite = [m if math.isfinite(m) else -max(abs(x) for x in margins if math.isfinite(x) or 1)
                  for m in margins]
        ax.barh(ypos, finite, color=colors)
        for i, tol in enumerate(tols):
            ax.plot([-tol, -tol], [i - 0.4, i + 0.4], "k:", linewidth=1.0)
        ax.set_yticks(ypos, names, fontsize=7)
        ax.axvline(0.0, color="k", linewidth=0.8)
        ax.set_xlabel("worst margin (dotted: -tol)")
        ax.set_title("check margins")
        return _save(fig, run_dir / "fig_margins.png")


def _fig_rescaled(run_dir: Path, report: dict) -> Path | None:
    prof_files = sorted((run_dir / "profiles").glob("profile_*.txt"))
    extras = report.get("extras", {})
    if not prof_files and "estimate_A" not in extras:
        return None
    params = Params(**report["params"])
    a_star = extras.get("a_star")
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(_FIG_SIZE[0] * 1.6, _FIG_SIZE[1]))
        for path in prof_files[-6:]:
            prof, _ = load_profile(path)
            window = prof.y <= 0.5 * prof.y[-1]
            ax1.plot(prof.y[window], prof.values[window], label=f"s={prof.s:.2f}")
        if a_star and prof_files:
            prof, _ = load_profile(prof_files[-1])
            window = prof.y <= 0.5 * prof.y[-1]
            ax1.plot(
                prof.y[window], barenblatt(a_star, prof.y[window], params),
                "k--", label="attractor",
            )
        ax1.set_xlabel("y")
        ax1.set_ylabel("v(s, y)")
        ax1.legend(fontsize=6)
        trend = extras.get("estimate_A")
        if trend:
            ax2.plot(trend["s"], trend["A"], "o-", label="amplitude estimate")
            if a_star:
                ax2.axhline(a_star, color="k", linestyle="--", label="A*")
            ax2.set_xlabel("s")
            ax2.set_ylabel("A(s)")
            ax2.legend(fontsize=7)
        fig.suptitle("rescaled orbit")
        return _save(fig, run_dir / "fig_rescaled.png")


def render_run_figures(run_dir) -> list[Path]:
    """Render every figure the run directory has data for; returns written paths."""
    run_dir = Path(run_dir)
    report_path = run_dir / "report.json"
    report = json.loads(report_path.read_text()) if report_path.exists() else {}
    written = []
    for renderer in (_fig_profiles, _fig_observables, _fig_margins, _fig_rescaled):
        path = renderer(run_dir, report)
        if path is not None:
            written.append(path)
    return written
