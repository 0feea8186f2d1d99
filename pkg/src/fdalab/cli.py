"""Command-line interface: solve, verify, astar, sweep, report.

Exit codes are a stable contract:

    0  success / all checks passed
    2  configuration error (unreadable file, unknown keys, bad parameters)
    3  solver failure
    4  at least one check failed (reports are still written)
    5  sweep with partial run failures

The verify pipeline writes delimited observables, snapshot and profile
text files, a flat one-line-per-check report and a structured JSON
document; the report command renders figures from those files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import CHECK_NAMES, CheckSettings, ConfigError, RunConfig, parse_config
from .profiles import (
    ParameterError,
    Params,
    compute_a_star,
    derive_constants,
    flat_decay_bound,
    positivity_transform,
)
from .rescale import to_selfsimilar
from .solver import (
    IndicatorIC,
    SolverConfig,
    SolverFailure,
    build_grid,
    init_field,
    solve,
)
from .textio import save_profile, save_snapshot
from .verifier import (
    BoundReport,
    CheckAborted,
    boundary_influence,
    check_gradient_estimate,
    check_lower_bound,
    check_positivity_transform,
    check_quadratic_envelope,
    check_residual_sign,
    check_upper_bound,
    convergence_metric,
    estimate_amplitude,
    fit_tail_exponent,
    search_sandwich,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4
EXIT_SWEEP = 5


def _fmt(x) -> str:
    return repr(float(x))


def _write_observables(out_dir: Path, snaps, formats) -> None:
    rows = [(s.t, s.mass, s.sup, s.center_value) for s in snaps]
    if "csv" in formats:
        lines = ["t,mass,sup,center_value"]
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        (out_dir / "observables.csv").write_text("\n".join(lines) + "\n")
    if "json" in formats:
        doc = {
            "t": [r[0] for r in rows],
            "mass": [r[1] for r in rows],
            "sup": [r[2] for r in rows],
            "center_value": [r[3] for r in rows],
        }
        (out_dir / "observables.json").write_text(json.dumps(doc, indent=1) + "\n")


def _write_snapshots(out_dir: Path, snaps, params, solver_cfg) -> None:
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    for i, snap in enumerate(snaps):
        save_snapshot(snap_dir / f"snapshot_{i:04d}.txt", snap, params, solver_cfg)


def _write_profiles(out_dir: Path, profiles, params) -> None:
    prof_dir = out_dir / "profiles"
    prof_dir.mkdir(parents=True, exist_ok=True)
    for i, prof in enumerate(profiles):
        save_profile(prof_dir / f"profile_{i:04d}.txt", prof, params)


def _failed_report(name: str, reason: str) -> BoundReport:
    return BoundReport(
        check_name=name,
        times=(),
        worst_margin=-math.inf,
        worst_location=math.nan,
        tol=0.0,
        passed=False,
        notes=f"aborted: {reason}",
    )


def _retol(report: BoundReport, tol: float) -> BoundReport:
    return dataclasses.replace(report, tol=tol, passed=bool(report.worst_margin >= -tol))


def _resolve_tol(setting, margin_main: float, margin_fine, default: float) -> float:
    if setting == "auto":
        if margin_fine is None or not math.isfinite(margin_main):
            return default
        return max(5.0 * abs(margin_main - margin_fine), 1e-12)
    return float(setting)


class _VerifyRun:
    """One full verification pipeline over a parsed configuration."""

    def __init__(self, cfg: RunConfig, tol_override: float | None = None):
        self.cfg = cfg
        self.tol_override = tol_override
        self.params = cfg.params
        self.grid = build_grid(cfg.params.N, cfg.grid.r_max, cfg.grid.n_cells, cfg.grid.stretch)
        self.u0 = init_field(self.grid, cfg.ic, cfg.params)
        self.sup_u0 = float(self.u0.values.max())
        self.snaps = solve(cfg.solver, self.grid, self.u0, cfg.schedule)
        self._fine_snaps = None
        self._fde_pair = None
        self.reports: list[BoundReport] = []
        self.extras: dict = {}
        self.profiles = []

    # -- companion runs -------------------------------------------------

    def _fine(self):
        """Same schedule at doubled resolution (h/2, dt/2) for calibration."""
        if self._fine_snaps is None:
            cfg = self.cfg
            grid = build_grid(cfg.params.N, cfg.grid.r_max, 2 * cfg.grid.n_cells, cfg.grid.stretch)
            solver = dataclasses.replace(
                cfg.solver, dt_init=cfg.solver.dt_init / 2.0, dt_max=cfg.solver.dt_max / 2.0
            )
            self._fine_snaps = solve(solver, grid, init_field(grid, cfg.ic, cfg.params), cfg.schedule)
        return self._fine_snaps

    def _fde_runs(self, fine: bool):
        """Absorption-free companions scheduled at the transformed times."""
        if self._fde_pair is None:
            cfg = self.cfg
            _, s_times = positivity_transform(
                np.asarray([s.t for s in self.snaps]), self.sup_u0, self.params
            )
            s_times = np.atleast_1d(s_times)
            free = dataclasses.replace(cfg.solver, absorption_mode="off")
            main = solve(free, self.grid, self.u0, s_times)
            self._fde_pair = {"main": main, "fine": None, "s_times": s_times}
        if fine and self._fde_pair["fine"] is None:
            cfg = self.cfg
            grid = build_grid(cfg.params.N, cfg.grid.r_max, 2 * cfg.grid.n_cells, cfg.grid.stretch)
            free = dataclasses.replace(
                cfg.solver, absorption_mode="off",
                dt_init=cfg.solver.dt_init / 2.0, dt_max=cfg.solver.dt_max / 2.0,
            )
            self._fde_pair["fine"] = solve(
                free, grid, init_field(grid, cfg.ic, cfg.params), self._fde_pair["s_times"]
            )
        return self._fde_pair

    def _series(self):
        """Rescaled orbit at every positive scheduled time."""
        if not self.profiles:
            T = self.cfg.checks.rescale_T
            self.profiles = [
                to_selfsimilar(s, T, self.params) for s in self.snaps if s.t > 0.0
            ]
        return self.profiles

    # -- individual checks ----------------------------------------------

    def _margin_pair(self, runner, setting, default_tol):
        rep_main = runner(self.snaps)
        margin_fine = None
        if setting == "auto":
            margin_fine = runner(self._fine()).worst_margin
        tol = self._tol(setting, rep_main.worst_margin, margin_fine, default_tol)
        return _retol(rep_main, tol)

    def _tol(self, setting, margin_main, margin_fine, default) -> float:
        if self.tol_override is not None:
            return self.tol_override
        return _resolve_tol(setting, margin_main, margin_fine, default)

    def check_upper(self, setting):
        return self._margin_pair(
            lambda snaps: check_upper_bound(snaps, self.sup_u0, self.params, 0.0),
            setting, 1e-8,
        )

    def check_gradient(self, setting):
        return self._margin_pair(
            lambda snaps: check_gradient_estimate(snaps, self.sup_u0, self.params, 0.0),
            setting, 1e-3,
        )

    def check_lower(self, setting):
        return self._margin_pair(
            lambda snaps: check_lower_bound(snaps, self.sup_u0, self.params, 0.0),
            setting, 1e-3,
        )

    def check_tail_fit(self, setting):
        allowed = 0.15 if setting == "auto" else float(setting)
        if self.tol_override is not None:
            allowed = self.tol_override
        window = self.cfg.checks.tail_window
        if window is None:
            if isinstance(self.cfg.ic, IndicatorIC):
                r_lo = 3.0 * self.cfg.ic.radius
            else:
                r_lo = 0.1 * self.grid.r_max
            window = (r_lo, 0.5 * self.grid.r_max)
        target = 2.0 / (1.0 - self.params.m)
        candidates = [s for s in self.snaps if s.t > 0.0]
        snap = min(candidates, key=lambda s: abs(s.t - 1.0))
        fitted = fit_tail_exponent(snap, window)
        deviation = abs(fitted - target) / target
        return BoundReport(
            check_name="tail_fit",
            times=(snap.t,),
            worst_margin=allowed - deviation,
            worst_location=window[0],
            tol=0.0,
            passed=bool(deviation <= allowed),
            notes=f"fitted={fitted!r} target={target!r} window={window}",
        )

    def check_envelope(self, setting):
        eps = self.cfg.checks.envelope_eps
        tau, kappa, rep = check_quadratic_envelope(self.snaps, eps, self.params, 0.0)
        tol = 0.0 if setting == "auto" else float(setting)
        if self.tol_override is not None:
            tol = self.tol_override
        self.extras["envelope"] = {"tau": tau, "kappa": kappa, "eps": eps}
        if rep.passed or math.isfinite(rep.worst_margin):
            return _retol(rep, tol)
        return rep

    def check_residual_sign(self, setting):
        ck = self.cfg.checks
        sub_grid = np.linspace(*ck.sub_A[:2], int(ck.sub_A[2]))
        super_grid = np.linspace(*ck.super_A[:2], int(ck.super_A[2]))
        c = derive_constants(self.params)
        s_grid = [max(s, c.s0) for s in ck.residual_s]
        out = []
        for kind, grid in (("sub", sub_grid), ("super", super_grid)):
            adm_coarse, rep_coarse = check_residual_sign(
                kind, grid, s_grid, ck.y_max, self.params, 0.0, n_y=400
            )
            adm, rep = check_residual_sign(
                kind, grid, s_grid, ck.y_max, self.params, 0.0, n_y=800
            )
            tol = self._tol(setting, rep.worst_margin, rep_coarse.worst_margin, 1e-4)
            adm, rep = check_residual_sign(
                kind, grid, s_grid, ck.y_max, self.params, tol, n_y=800
            )
            self.extras.setdefault("residual_sign", {})[kind] = {
                "admissible": [float(a) for a in adm],
                "s_grid": [float(s) for s in s_grid],
            }
            out.append(rep)
        return out

    def check_positivity(self, setting):
        pair = self._fde_runs(fine=(setting == "auto"))

        def runner(snaps, fde):
            return check_positivity_transform(snaps, fde, self.sup_u0, self.params, 0.0)

        rep_main = runner(self.snaps, pair["main"])
        margin_fine = None
        if setting == "auto":
            margin_fine = runner(self._fine(), pair["fine"]).worst_margin
        tol = self._tol(setting, rep_main.worst_margin, margin_fine, 1e-3)
        return _retol(rep_main, tol)

    def check_sandwich(self, setting):
        ck = self.cfg.checks
        series = self._series()
        smin = ck.sandwich_smin
        if math.isnan(smin):
            smin = float(np.median([p.s for p in series]))
        kept = [p for p in series if p.s >= smin]
        if len(kept) < 3:
            return _failed_report("sandwich", f"only {len(kept)} profiles at s >= {smin}")
        a1_cands = list(ck.A1_candidates)
        a2_cands = list(ck.A2_candidates)
        rs = self.extras.get("residual_sign")
        if rs:
            sub_adm = rs["sub"]["admissible"]
            super_adm = rs["super"]["admissible"]
            if sub_adm:
                a1_cands = [a for a in a1_cands if a >= min(sub_adm)] or a1_cands
            if super_adm:
                a2_cands = [a for a in a2_cands if a <= max(super_adm)] or a2_cands
        tol = 1e-6 if setting == "auto" else float(setting)
        if self.tol_override is not None:
            tol = self.tol_override
        A1, A2, gamma, rep = search_sandwich(
            kept, self.params, tol, a1_cands, a2_cands, ck.gamma_candidates,
            y_cap=ck.sandwich_ymax,
        )
        self.extras["sandwich"] = {"A1": A1, "A2": A2, "gamma_T": gamma, "s_min": smin}
        return rep

    def check_convergence(self, setting):
        ck = self.cfg.checks
        series = self._series()
        a_star = compute_a_star(self.params, 1e-10)
        amps = []
        metrics = []
        s_values = []
        for prof in series:
            if prof.values[0] <= 0.0:
                continue
            s_values.append(prof.s)
            amps.append(estimate_amplitude(prof, self.params))
            metrics.append(convergence_metric(prof, a_star, self.params, y_cap=ck.sandwich_ymax))
        self.extras["a_star"] = a_star
        self.extras["estimate_A"] = {"s": s_values, "A": amps}
        self.extras["convergence_metric"] = {"s": s_values, "value": metrics}
        if len(amps) < max(3, 2):
            return _failed_report("convergence", "not enough positive-center profiles")
        gaps = [abs(a - a_star) / a_star for a in amps]
        k = min(ck.trend_points, len(gaps) - 1)
        trend_margin = min(gaps[i] - gaps[i + 1] for i in range(len(gaps) - 1 - k, len(gaps) - 1))
        metric_margin = min(
            (metrics[i] - metrics[i + 1]) / max(metrics[-3:]) for i in range(len(metrics) - 3, len(metrics) - 1)
        )
        gap_margin = ck.final_gap - gaps[-1]
        worst = min(trend_margin, metric_margin, gap_margin)
        tol = 0.0 if setting == "auto" else float(setting)
        if self.tol_override is not None:
            tol = self.tol_override
        return BoundReport(
            check_name="convergence",
            times=tuple(s_values),
            worst_margin=float(worst),
            worst_location=float(s_values[-1]),
            tol=tol,
            passed=bool(worst >= -tol),
            notes=(
                f"A_final={amps[-1]!r} a_star={a_star!r} gap={gaps[-1]!r} "
                f"trend_margin={trend_margin!r} metric_margin={metric_margin!r}"
            ),
        )

    # -- pipeline ---------------------------------------------------------

    def run_checks(self) -> list[BoundReport]:
        requested = self.cfg.checks.requested
        runners = {
            "upper": self.check_upper,
            "gradient": self.check_gradient,
            "lower": self.check_lower,
            "tail_fit": self.check_tail_fit,
            "envelope": self.check_envelope,
            "residual_sign": self.check_residual_sign,
            "positivity": self.check_positivity,
            "sandwich": self.check_sandwich,
            "convergence": self.check_convergence,
        }
        for name in CHECK_NAMES:
            if name not in requested:
                continue
            try:
                result = runners[name](requested[name])
            except (CheckAborted, ValueError) as exc:
                result = _failed_report(name, str(exc))
            if isinstance(result, list):
                self.reports.extend(result)
            else:
                self.reports.append(result)
        if self.cfg.checks.boundary_monitor:
            deviation = boundary_influence(
                self.cfg.solver, self.grid, self.cfg.ic, [float(self.cfg.schedule[-1])]
            )
            self.extras["boundary_influence"] = deviation
            if deviation > self.cfg.checks.boundary_tol:
                print(
                    f"warning: boundary influence {deviation:.3e} exceeds "
                    f"{self.cfg.checks.boundary_tol:.1e}; tail-sensitive checks unreliable",
                    file=sys.stderr,
                )
                flagged = []
                for rep in self.reports:
                    if rep.check_name in ("lower_bound", "tail_fit"):
                        rep = dataclasses.replace(
                            rep, notes=rep.notes + f" [unreliable: boundary influence {deviation:.2e}]"
                        )
                    flagged.append(rep)
                self.reports = flagged
        return self.reports

    def report_doc(self) -> dict:
        return {
            "version": 1,
            "params": {
                "N": self.params.N,
                "m": self.params.m,
                "q": self.params.q,
                "critical": self.params.critical,
            },
            "grid": dataclasses.asdict(self.cfg.grid),
            "schedule": [float(t) for t in self.cfg.schedule],
            "observables": {
                "t": [s.t for s in self.snaps],
                "mass": [s.mass for s in self.snaps],
                "sup": [s.sup for s in self.snaps],
                "center_value": [s.center_value for s in self.snaps],
            },
            "flat_decay_bound": [
                float(flat_decay_bound(s.t, self.sup_u0, self.params)) for s in self.snaps
            ],
            "checks": [dataclasses.asdict(r) for r in self.reports],
            "extras": self.extras,
            "passed": all(r.passed for r in self.reports),
        }


def _out_dir(args, cfg: RunConfig | None) -> Path:
    if args.out_dir:
        out = Path(args.out_dir)
    elif cfg is not None and cfg.out_dir:
        out = Path(cfg.out_dir)
    else:
        out = Path("fdalab_run")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _formats(args, cfg: RunConfig | None) -> tuple:
    if args.format:
        return (args.format,)
    return cfg.formats if cfg is not None else ("csv",)


def cmd_solve(args) -> int:
    try:
        cfg = parse_config(args.config)
        grid = build_grid(cfg.params.N, cfg.grid.r_max, cfg.grid.n_cells, cfg.grid.stretch)
        u0 = init_field(grid, cfg.ic, cfg.params)
    except (ConfigError, ParameterError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        snaps = solve(cfg.solver, grid, u0, cfg.schedule)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = _out_dir(args, cfg)
    _write_observables(out, snaps, _formats(args, cfg))
    _write_snapshots(out, snaps, cfg.params, cfg.solver)
    print(f"wrote {len(snaps)} snapshots to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        cfg = parse_config(args.config)
        run = _VerifyRun(cfg, tol_override=args.tol)
    except (ConfigError, ParameterError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    try:
        reports = run.run_checks()
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = _out_dir(args, cfg)
    _write_observables(out, run.snaps, _formats(args, cfg))
    _write_snapshots(out, run.snaps, cfg.params, cfg.solver)
    if run.profiles:
        _write_profiles(out, run.profiles, cfg.params)
    lines = [rep.line() for rep in reports]
    (out / "report.txt").write_text("\n".join(lines) + "\n" if lines else "")
    (out / "report.json").write_text(json.dumps(run.report_doc(), indent=1, sort_keys=True) + "\n")
    for line in lines:
        print(line)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def cmd_astar(args) -> int:
    try:
        params = Params(N=args.N, m=args.m, critical=True)
        value = compute_a_star(params, args.tol if args.tol else 1e-10)
    except (ParameterError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(_fmt(value))
    return EXIT_OK


def _sweep_point(base: RunConfig, N: int, m: float, out_root: Path, tol_override):
    tag = f"N{N}_m{m:g}"
    try:
        params = Params(N=N, m=m, critical=True)
        cfg = dataclasses.replace(
            base,
            params=params,
            solver=dataclasses.replace(base.solver, params=params),
            out_dir=str(out_root / tag),
            sweep_N=None,
            sweep_m=None,
        )
    except ParameterError as exc:
        return (N, m, math.nan, "config_error", {}, str(exc))
    try:
        run = _VerifyRun(cfg, tol_override=tol_override)
        reports = run.run_checks()
    except SolverFailure as exc:
        return (N, m, params.q, "solver_error", {}, str(exc))
    except (ValueError, ParameterError) as exc:
        return (N, m, params.q, "config_error", {}, str(exc))
    status = "ok" if all(r.passed for r in reports) else "check_fail"
    detail = {r.check_name: r for r in reports}
    return (N, m, params.q, status, detail, "")


def cmd_sweep(args) -> int:
    try:
        cfg = parse_config(args.config)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.sweep_N is None:
        print("config error: sweep requires a [sweep] section", file=sys.stderr)
        return EXIT_CONFIG
    points = sorted(set((n, m) for n in cfg.sweep_N for m in cfg.sweep_m))
    out = _out_dir(args, cfg)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(
            pool.map(lambda p: _sweep_point(cfg, p[0], p[1], out, args.tol), points)
        )
    results.sort(key=lambda row: (row[0], row[1]))
    check_cols = sorted({name for row in results for name in row[4]})
    header = ["N", "m", "q", "status"]
    for name in check_cols:
        header += [f"{name}_margin", f"{name}_pass"]
    lines = [",".join(header)]
    for N, m, q, status, detail, note in results:
        row = [str(N), _fmt(m), _fmt(q) if not math.isnan(q) else "", status]
        for name in check_cols:
            rep = detail.get(name)
            if rep is None:
                row += ["", ""]
            else:
                row += [_fmt(rep.worst_margin), "pass" if rep.passed else "FAIL"]
        lines.append(",".join(row))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote sweep results for {len(results)} points to {out / 'sweep.csv'}")
    failures = [r for r in results if r[3] in ("config_error", "solver_error")]
    for N, m, _, status, _, note in failures:
        print(f"  failed point N={N} m={m}: {status}: {note}", file=sys.stderr)
    if failures:
        return EXIT_SWEEP
    if any(r[3] == "check_fail" for r in results):
        return EXIT_CHECK
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.out_dir or "fdalab_run")
    report_path = run_dir / "report.json"
    if not report_path.exists():
        print(f"config error: no report.json under {run_dir}", file=sys.stderr)
        return EXIT_CONFIG
    doc = json.loads(report_path.read_text())
    for check in doc.get("checks", []):
        status = "pass" if check["passed"] else "FAIL"
        print(f"{check['check_name']} {check['worst_margin']!r} {check['tol']!r} {status}")
    from .figures import render_run_figures

    for path in render_run_figures(run_dir):
        print(f"wrote {path}")
    return EXIT_OK if doc.get("passed", False) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdalab",
        description="Radial fast diffusion with critical absorption: solve and verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="run configuration (INI)")
        p.add_argument("--out-dir", default=None, help="output directory")
        p.add_argument("--tol", type=float, default=None, help="tolerance override")
        p.add_argument("--threads", type=int, default=1, help="worker threads (sweep)")
        p.add_argument("--format", choices=("csv", "json"), default=None)

    p_solve = sub.add_parser("solve", help="run the solver, write observables and snapshots")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="solve plus the configured checks")
    common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_astar = sub.add_parser("astar", help="print the attracting profile amplitude")
    p_astar.add_argument("--N", type=int, required=True)
    p_astar.add_argument("--m", type=float, required=True)
    common(p_astar, config_required=False)
    p_astar.set_defaults(func=cmd_astar)

    p_sweep = sub.add_parser("sweep", help="verify over a parameter grid")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="render figures and print the flat report")
    common(p_report, config_required=False)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
