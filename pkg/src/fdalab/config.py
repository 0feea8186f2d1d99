"""Run configuration: flat INI-style key-value sections, strictly validated.

Unknown sections or keys are rejected outright; a config that parses is
guaranteed to build valid module-level objects.  Log-spaced schedules are
first-class because the long-time behavior lives on log t.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .profiles import ParameterError, Params
from .solver import (
    BarenblattIC,
    IndicatorIC,
    PowerTailIC,
    SolverConfig,
    TableIC,
)

__all__ = ["ConfigError", "GridSpec", "CheckSettings", "RunConfig", "parse_config", "CHECK_NAMES"]

CHECK_NAMES = (
    "upper",
    "lower",
    "gradient",
    "tail_fit",
    "envelope",
    "residual_sign",
    "positivity",
    "sandwich",
    "convergence",
)

_SECTION_KEYS = {
    "params": {"N", "m", "q", "critical"},
    "grid": {"r_max", "n_cells", "stretch"},
    "solver": {
        "bc",
        "dt_init",
        "dt_max",
        "newton_tol",
        "newton_max_iter",
        "absorption",
        "floor",
        "dt_grow",
        "dt_cut",
        "easy_iters",
        "dt_rel_max",
    },
    "initial": {"kind", "radius", "height", "A", "coeff", "decay", "values"},
    "schedule": {"times", "log_start", "log_stop", "log_count"},
    "checks": set(CHECK_NAMES)
    | {
        "envelope_eps",
        "rescale_T",
        "tail_window",
        "boundary_monitor",
        "boundary_tol",
        "sub_A",
        "super_A",
        "residual_s",
        "y_max",
        "A1_candidates",
        "A2_candidates",
        "gamma_candidates",
        "sandwich_smin",
        "sandwich_ymax",
        "trend_points",
        "final_gap",
    },
    "output": {"directory", "formats"},
    "sweep": {"N", "m"},
}

_IC_KEYS = {
    "indicator": {"radius", "height"},
    "barenblatt": {"A"},
    "power_tail": {"height", "coeff", "decay"},
    "table": {"values"},
}


class ConfigError(ValueError):
    """Unusable run configuration (unknown keys, bad values, missing sections)."""


@dataclass(frozen=True)
class GridSpec:
    r_max: float
    n_cells: int
    stretch: float = 1.0


@dataclass(frozen=True)
class CheckSettings:
    """Which checks run and the knobs they share.

    Tolerance values are floats, or the string "auto" for the h vs h/2
    calibration protocol (5x the resolution difference of the margin).
    """

    requested: dict = field(default_factory=dict)  # name -> float | "auto"
    envelope_eps: float = 0.25
    rescale_T: float = float(math.e**2)
    tail_window: tuple | None = None  # (r_lo, r_hi); default derived from the data
    boundary_monitor: bool = False
    boundary_tol: float = 1e-2
    sub_A: tuple = (0.1, 3.0, 30)  # start, stop, count
    super_A: tuple = (0.02, 0.6, 30)
    residual_s: tuple = (25.0, 100.0, 400.0)
    y_max: float = 8.0
    A1_candidates: tuple = (0.6, 0.8, 1.0, 1.5, 2.0, 3.0)
    A2_candidates: tuple = (0.04, 0.08, 0.12, 0.16)
    gamma_candidates: tuple = (0.25, 0.5, 1.0, 2.0)
    sandwich_smin: float = math.nan  # NaN: use the median s of the series
    sandwich_ymax: float = 4.0  # cap on the rescaled comparison window
    trend_points: int = 10
    final_gap: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    params: Params
    grid: GridSpec
    solver: SolverConfig
    ic: object
    schedule: np.ndarray
    checks: CheckSettings
    out_dir: str | None
    formats: tuple
    sweep_N: tuple | None = None
    sweep_m: tuple | None = None


def _tofloat(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _toint(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None


def _tobool(section: str, key: str, raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _tofloats(section: str, key: str, raw: str) -> tuple:
    return tuple(_tofloat(section, key, tok) for tok in raw.split())


def _validate_keys(cp: configparser.ConfigParser) -> None:
    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = _SECTION_KEYS[section]
        for key in cp[section]:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")


def _parse_params(cp: configparser.ConfigParser) -> Params:
    if "params" not in cp:
        raise ConfigError("missing [params] section")
    sec = cp["params"]
    if "N" not in sec or "m" not in sec:
        raise ConfigError("[params] requires N and m")
    critical = _tobool("params", "critical", sec.get("critical", "true"))
    q = _tofloat("params", "q", sec["q"]) if "q" in sec else None
    try:
        return Params(
            N=_toint("params", "N", sec["N"]),
            m=_tofloat("params", "m", sec["m"]),
            q=q,
            critical=critical,
        )
    except ParameterError as exc:
        raise ConfigError(f"[params]: {exc}") from exc


def _parse_ic(cp: configparser.ConfigParser):
    if "initial" not in cp:
        raise ConfigError("missing [initial] section")
    sec = cp["initial"]
    kind = sec.get("kind")
    if kind not in _IC_KEYS:
        raise ConfigError(f"[initial] kind must be one of {sorted(_IC_KEYS)}, got {kind!r}")
    present = set(sec) - {"kind"}
    if present != _IC_KEYS[kind]:
        raise ConfigError(
            f"[initial] kind={kind} requires exactly {sorted(_IC_KEYS[kind])}, got {sorted(present)}"
        )
    if kind == "indicator":
        return IndicatorIC(
            radius=_tofloat("initial", "radius", sec["radius"]),
            height=_tofloat("initial", "height", sec["height"]),
        )
    if kind == "barenblatt":
        return BarenblattIC(A=_tofloat("initial", "A", sec["A"]))
    if kind == "power_tail":
        return PowerTailIC(
            height=_tofloat("initial", "height", sec["height"]),
            coeff=_tofloat("initial", "coeff", sec["coeff"]),
            decay=_tofloat("initial", "decay", sec["decay"]),
        )
    return TableIC(_tofloats("initial", "values", sec["values"]))


def _parse_schedule(cp: configparser.ConfigParser) -> np.ndarray:
    if "schedule" not in cp:
        raise ConfigError("missing [schedule] section")
    sec = cp["schedule"]
    has_times = "times" in sec
    has_log = any(k in sec for k in ("log_start", "log_stop", "log_count"))
    if has_times == has_log:
        raise ConfigError("[schedule] needs either times or the log_* triple")
    if has_times:
        schedule = np.asarray(_tofloats("schedule", "times", sec["times"]))
    else:
        for k in ("log_start", "log_stop", "log_count"):
            if k not in sec:
                raise ConfigError(f"[schedule] log-spaced spec requires {k}")
        start = _tofloat("schedule", "log_start", sec["log_start"])
        stop = _tofloat("schedule", "log_stop", sec["log_stop"])
        count = _toint("schedule", "log_count", sec["log_count"])
        if start <= 0 or stop <= start or count < 2:
            raise ConfigError("[schedule] log-spaced spec needs 0 < start < stop, count >= 2")
        schedule = np.logspace(math.log10(start), math.log10(stop), count)
    if schedule.size == 0 or schedule[0] < 0 or np.any(np.diff(schedule) <= 0):
        raise ConfigError("[schedule] times must be strictly increasing and start at >= 0")
    return schedule


def _parse_checks(cp: configparser.ConfigParser) -> CheckSettings:
    if "checks" not in cp:
        return CheckSettings()
    sec = cp["checks"]
    requested = {}
    kwargs = {}
    for key, raw in sec.items():
        if key in CHECK_NAMES:
            requested[key] = "auto" if raw.strip().lower() == "auto" else _tofloat(
                "checks", key, raw
            )
        elif key == "envelope_eps":
            kwargs["envelope_eps"] = _tofloat("checks", key, raw)
        elif key == "rescale_T":
            kwargs["rescale_T"] = _tofloat("checks", key, raw)
        elif key == "tail_window":
            window = _tofloats("checks", key, raw)
            if len(window) != 2:
                raise ConfigError("[checks] tail_window needs exactly two radii")
            kwargs["tail_window"] = window
        elif key == "boundary_monitor":
            kwargs["boundary_monitor"] = _tobool("checks", key, raw)
        elif key == "boundary_tol":
            kwargs["boundary_tol"] = _tofloat("checks", key, raw)
        elif key in ("sub_A", "super_A"):
            spec = raw.split()
            if len(spec) != 3:
                raise ConfigError(f"[checks] {key} needs: start stop count")
            kwargs[key] = (
                _tofloat("checks", key, spec[0]),
                _tofloat("checks", key, spec[1]),
                _toint("checks", key, spec[2]),
            )
        elif key in ("residual_s", "A1_candidates", "A2_candidates", "gamma_candidates"):
            kwargs[key] = _tofloats("checks", key, raw)
        elif key == "sandwich_smin":
            kwargs["sandwich_smin"] = _tofloat("checks", key, raw)
        elif key == "sandwich_ymax":
            kwargs["sandwich_ymax"] = _tofloat("checks", key, raw)
        elif key == "trend_points":
            kwargs["trend_points"] = _toint("checks", key, raw)
        elif key == "final_gap":
            kwargs["final_gap"] = _tofloat("checks", key, raw)
        elif key == "y_max":
            kwargs["y_max"] = _tofloat("checks", key, raw)
    return CheckSettings(requested=requested, **kwargs)


def parse_config(path) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    _validate_keys(cp)
    params = _parse_params(cp)

    if "grid" not in cp:
        raise ConfigError("missing [grid] section")
    gsec = cp["grid"]
    for key in ("r_max", "n_cells"):
        if key not in gsec:
            raise ConfigError(f"[grid] requires {key}")
    grid = GridSpec(
        r_max=_tofloat("grid", "r_max", gsec["r_max"]),
        n_cells=_toint("grid", "n_cells", gsec["n_cells"]),
        stretch=_tofloat("grid", "stretch", gsec.get("stretch", "1.0")),
    )
    if grid.r_max <= 0 or grid.n_cells < 8 or grid.stretch < 1.0:
        raise ConfigError("[grid] needs r_max > 0, n_cells >= 8, stretch >= 1")

    ssec = cp["solver"] if "solver" in cp else {}
    try:
        solver = SolverConfig(
            params=params,
            bc=ssec.get("bc", "zero_flux"),
            dt_init=_tofloat("solver", "dt_init", ssec.get("dt_init", "1e-3")),
            dt_max=_tofloat("solver", "dt_max", ssec.get("dt_max", "1.0")),
            newton_tol=_tofloat("solver", "newton_tol", ssec.get("newton_tol", "1e-10")),
            newton_max_iter=_toint(
                "solver", "newton_max_iter", ssec.get("newton_max_iter", "30")
            ),
            absorption_mode=ssec.get("absorption", "split_exact"),
            floor=_tofloat("solver", "floor", ssec.get("floor", "0.0")),
            dt_grow=_tofloat("solver", "dt_grow", ssec.get("dt_grow", "1.2")),
            dt_cut=_tofloat("solver", "dt_cut", ssec.get("dt_cut", "0.5")),
            easy_iters=_toint("solver", "easy_iters", ssec.get("easy_iters", "5")),
            dt_rel_max=_tofloat("solver", "dt_rel_max", ssec.get("dt_rel_max", "inf")),
        )
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from exc

    ic = _parse_ic(cp)
    schedule = _parse_schedule(cp)
    checks = _parse_checks(cp)

    out_dir = None
    formats = ("csv",)
    if "output" in cp:
        osec = cp["output"]
        out_dir = osec.get("directory", None)
        if "formats" in osec:
            formats = tuple(osec["formats"].split())
            for fmt in formats:
                if fmt not in ("csv", "json"):
                    raise ConfigError(f"[output] formats entries must be csv or json, got {fmt!r}")

    sweep_N = sweep_m = None
    if "sweep" in cp:
        wsec = cp["sweep"]
        if "N" not in wsec or "m" not in wsec:
            raise ConfigError("[sweep] requires both N and m lists")
        sweep_N = tuple(_toint("sweep", "N", tok) for tok in wsec["N"].split())
        sweep_m = tuple(_tofloat("sweep", "m", tok) for tok in wsec["m"].split())

    return RunConfig(
        params=params,
        grid=grid,
        solver=solver,
        ic=ic,
        schedule=schedule,
        checks=checks,
        out_dir=out_dir,
        formats=formats,
        sweep_N=sweep_N,
        sweep_m=sweep_m,
    )
