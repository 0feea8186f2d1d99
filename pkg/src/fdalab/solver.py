"""Implicit finite-volume integrator for the radial absorption-diffusion equation.

The scheme is backward Euler in time and flux-form in space on a
cell-centered radial mesh with exact N-sphere measure weights.  The
diffusion solve iterates Newton on w = u^m (the singular diffusivity
m u^(m-1) never appears), with step halving inside Newton on non-monotone
residuals.  Absorption is applied either through the exact pointwise ODE
map after the diffusion solve (split_exact), inside the Newton residual
(coupled_implicit), or not at all (off; the diffusion-only companion runs
used by the positivity check and the calibration oracles).

Time-step control: grow by dt_grow after an easy Newton solve, cut by
dt_cut on Newton divergence, always capped by dt_max and by the next
scheduled output time, which is hit exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .profiles import Params, barenblatt

__all__ = [
    "RadialGrid",
    "Field",
    "SolverConfig",
    "Snapshot",
    "NewtonDivergence",
    "SolverFailure",
    "IndicatorIC",
    "BarenblattIC",
    "PowerTailIC",
    "TableIC",
    "build_grid",
    "init_field",
    "observables",
    "make_snapshot",
    "step",
    "solve",
]

log = logging.getLogger(__name__)

BC_KINDS = ("zero_flux", "dirichlet_zero")
ABSORPTION_MODES = ("split_exact", "coupled_implicit", "off")


class NewtonDivergence(RuntimeError):
    """Newton failed to converge within the iteration budget."""


class SolverFailure(RuntimeError):
    """Unrecoverable step failure; carries the time at which it happened."""

    def __init__(self, t: float, message: str):
        super().__init__(f"t={t}: {message}")
        self.t = t


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere; 2 in dimension 1 (folded half-line)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centered mesh on [0, r_max] with N-dimensional measure weights."""

    dim: int
    n_cells: int
    faces: np.ndarray  # (n_cells + 1,), faces[0] == 0, strictly increasing
    centers: np.ndarray  # (n_cells,), cell midpoints
    volumes: np.ndarray  # (n_cells,), omega_N (f_{i+1}^N - f_i^N) / N
    face_areas: np.ndarray  # (n_cells + 1,), omega_N f^{N-1}
    stretch: float

    @property
    def r_max(self) -> float:
        return float(self.faces[-1])


def build_grid(dim: int, r_max: float, n_cells: int, stretch: float = 1.0) -> RadialGrid:
    """Geometrically stretched mesh from 0 to r_max.

    stretch is the ratio of consecutive cell widths; 1 gives a uniform mesh.
    """
    if not r_max > 0.0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    if n_cells < 8:
        raise ValueError(f"need at least 8 cells, got {n_cells}")
    if not stretch >= 1.0:
        raise ValueError(f"stretch must be >= 1, got {stretch}")
    if stretch == 1.0:
        faces = np.linspace(0.0, r_max, n_cells + 1)
    else:
        widths = stretch ** np.arange(n_cells)
        widths *= r_max / widths.sum()
        faces = np.concatenate(([0.0], np.cumsum(widths)))
        faces[-1] = r_max
    centers = 0.5 * (faces[:-1] + faces[1:])
    omega = sphere_area(dim)
    volumes = omega * np.diff(faces**dim) / dim
    face_areas = omega * faces ** (dim - 1) if dim > 1 else np.full(n_cells + 1, omega)
    grid = RadialGrid(
        dim=dim,
        n_cells=n_cells,
        faces=faces,
        centers=centers,
        volumes=volumes,
        face_areas=face_areas,
        stretch=stretch,
    )
    assert np.all(np.diff(faces) > 0) and np.all(volumes > 0)
    assert np.all((centers > faces[:-1]) & (centers < faces[1:]))
    return grid


@dataclass(frozen=True)
class Field:
    """Nonnegative cell values of u on a grid at one physical time."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(f"values shape {v.shape} does not match grid ({self.grid.n_cells},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if np.any(v < 0.0):
            raise ValueError("field values must be nonnegative")
        object.__setattr__(self, "values", v)


# Initial-condition descriptors.  init_field rejects identically zero data.


@dataclass(frozen=True)
class IndicatorIC:
    radius: float
    height: float


@dataclass(frozen=True)
class BarenblattIC:
    A: float


@dataclass(frozen=True)
class PowerTailIC:
    """min(height, coeff * r^(-decay)); the flat cap keeps the origin finite."""

    height: float
    coeff: float
    decay: float


@dataclass(frozen=True, init=False)
class TableIC:
    values: tuple

    def __init__(self, values):
        object.__setattr__(self, "values", tuple(float(v) for v in values))


def init_field(grid: RadialGrid, spec, params: Params) -> Field:
    """Sample an initial-condition descriptor at the cell centers."""
    r = grid.centers
    if isinstance(spec, IndicatorIC):
        values = np.where(r < spec.radius, spec.height, 0.0)
    elif isinstance(spec, BarenblattIC):
        values = np.asarray(barenblatt(spec.A, r, params), dtype=float)
    elif isinstance(spec, PowerTailIC):
        values = np.minimum(spec.height, spec.coeff * r ** (-spec.decay))
    elif isinstance(spec, TableIC):
        values = np.asarray(spec.values, dtype=float)
        if values.shape != (grid.n_cells,):
            raise ValueError(
                f"table has {values.size} entries, grid has {grid.n_cells} cells"
            )
    else:
        raise TypeError(f"unknown initial-condition descriptor {type(spec).__name__}")
    field = Field(grid, values)
    if not np.any(field.values > 0.0):
        raise ValueError("initial condition must not be identically zero")
    return field


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping and nonlinear-solve controls.

    dt_rel_max caps the step relative to the current time (dt <= rel * t),
    which keeps the backward-Euler bias bounded on log-spaced schedules;
    infinity disables the cap.
    """

    params: Params
    bc: str = "zero_flux"
    dt_init: float = 1e-3
    dt_max: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    absorption_mode: str = "split_exact"
    floor: float = 0.0
    dt_grow: float = 1.2
    dt_cut: float = 0.5
    easy_iters: int = 5
    dt_rel_max: float = math.inf

    def __post_init__(self) -> None:
        if self.bc not in BC_KINDS:
            raise ValueError(f"bc must be one of {BC_KINDS}, got {self.bc!r}")
        if self.absorption_mode not in ABSORPTION_MODES:
            raise ValueError(
                f"absorption_mode must be one of {ABSORPTION_MODES}, got {self.absorption_mode!r}"
            )
        if not (self.dt_init > 0 and self.dt_max > 0 and self.newton_tol > 0):
            raise ValueError("dt_init, dt_max and newton_tol must be positive")
        if self.dt_init > self.dt_max:
            raise ValueError(f"dt_init={self.dt_init} exceeds dt_max={self.dt_max}")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if self.floor < 0.0:
            raise ValueError("floor must be nonnegative")
        if not self.dt_rel_max > 0.0:
            raise ValueError("dt_rel_max must be positive")


@dataclass(frozen=True)
class Snapshot:
    t: float
    field: Field
    mass: float
    sup: float
    center_value: float


def observables(field: Field) -> tuple[float, float, float]:
    """(volume-weighted mass, sup norm, first-cell value)."""
    v = field.values
    return float(np.dot(field.grid.volumes, v)), float(v.max()), float(v[0])


def make_snapshot(t: float, field: Field) -> Snapshot:
    mass, sup, center = observables(field)
    return Snapshot(t=float(t), field=field, mass=mass, sup=sup, center_value=center)


class _StepWork:
    """Grid-derived arrays reused across steps of one solve."""

    def __init__(self, grid: RadialGrid, config: SolverConfig):
        self.grid = grid
        self.config = config
        # Interior face conductances area / center distance; the r = 0 face
        # carries no flux (symmetry; its area vanishes for dim >= 2 anyway).
        self.coef = grid.face_areas[1:-1] / np.diff(grid.centers)
        if config.bc == "dirichlet_zero":
            self.bc_coef = grid.face_areas[-1] / (grid.faces[-1] - grid.centers[-1])
        else:
            self.bc_coef = 0.0
        self.vol = grid.volumes
        self.inv_vol = 1.0 / grid.volumes
        self.m = config.params.m
        self.q = config.params.q
        self.coupled = config.absorption_mode == "coupled_implicit"


def _u_of_w(w: np.ndarray, m: float) -> np.ndarray:
    return w ** (1.0 / m)


def _residual(w: np.ndarray, u_old: np.ndarray, dt: float, work: _StepWork) -> np.ndarray:
    """Backward-Euler residual in u units."""
    u = _u_of_w(w, work.m)
    flux = work.coef * np.diff(w)
    div = np.zeros_like(w)
    div[:-1] += flux * work.inv_vol[:-1]
    div[1:] -= flux * work.inv_vol[1:]
    div[-1] -= work.bc_coef * w[-1] * work.inv_vol[-1]
    res = u - u_old - dt * div
    if work.coupled:
        res += dt * u**work.q
    return res


def _residual_noise_floor(
    w: np.ndarray, u_old: np.ndarray, dt: float, work: _StepWork
) -> tuple[float, float]:
    """Round-off level of the residual evaluation, in sup and mass norms.

    The flux differences cancel almost exactly near convergence, so the
    achievable residual is limited by eps times the gross magnitudes that
    enter the computation; demanding less than that stalls Newton forever.
    """
    wmax = np.maximum(w[1:], w[:-1])
    gross = np.abs(u_old).copy()
    gross += _u_of_w(w, work.m)
    gross[:-1] += dt * work.coef * wmax * work.inv_vol[:-1]
    gross[1:] += dt * work.coef * wmax * work.inv_vol[1:]
    gross[-1] += dt * work.bc_coef * w[-1] * work.inv_vol[-1]
    eps4 = 4.0 * np.finfo(float).eps
    return eps4 * float(gross.max()), eps4 * float(np.dot(work.vol, gross))


def _newton_step(
    u_old: np.ndarray, dt: float, work: _StepWork
) -> tuple[np.ndarray, int]:
    """One implicit diffusion(-absorption) solve; returns (u_new, iterations).

    Convergence demands both the sup norm of the residual (relative to
    sup u_old) and its volume-weighted L1 norm (relative to the mass of
    u_old) below newton_tol.  The sup criterion alone is blind to the
    measure: on strongly stretched grids the outer cells carry volumes
    many orders above the inner ones, and a sup-small residual out there
    is a macroscopic mass defect.
    """
    config = work.config
    m, q = work.m, work.q
    n = u_old.size
    tol_sup = config.newton_tol * max(float(u_old.max()), 1e-300)
    tol_mass = config.newton_tol * max(float(np.dot(work.vol, u_old)), 1e-300)

    def badness(res: np.ndarray) -> float:
        floor_sup, floor_mass = _residual_noise_floor(w, u_old, dt, work)
        sup = float(np.abs(res).max()) / max(tol_sup, floor_sup)
        mass = float(np.dot(work.vol, np.abs(res))) / max(tol_mass, floor_mass)
        return max(sup, mass)

    w = u_old**m
    res = _residual(w, u_old, dt, work)
    res_bad = badness(res)
    ab = np.zeros((3, n))
    for it in range(1, config.newton_max_iter + 1):
        if res_bad <= 1.0:
            return _u_of_w(w, m), it - 1
        du_dw = (1.0 / m) * w ** ((1.0 - m) / m)
        diag = du_dw.copy()
        diag[:-1] += dt * work.coef * work.inv_vol[:-1]
        diag[1:] += dt * work.coef * work.inv_vol[1:]
        diag[-1] += dt * work.bc_coef * work.inv_vol[-1]
        if work.coupled:
            u = _u_of_w(w, m)
            diag += dt * q * u ** (q - 1.0) * du_dw
        ab[0, 1:] = -dt * work.coef * work.inv_vol[:-1]  # superdiagonal
        ab[1, :] = diag
        ab[2, :-1] = -dt * work.coef * work.inv_vol[1:]  # subdiagonal
        delta = solve_banded((1, 1), ab, -res)
        # Damped update: halve until the residual drops.  A stall at the
        # round-off floor of the evaluation counts as converged.
        lam = 1.0
        stalled = False
        for _ in range(40):
            w_try = np.maximum(w + lam * delta, 0.0)
            res_try = _residual(w_try, u_old, dt, work)
            bad_try = badness(res_try)
            if bad_try < res_bad or bad_try <= 1.0:
                break
            lam *= 0.5
        else:
            stalled = True
        if stalled:
            if res_bad <= 4.0:
                return _u_of_w(w, m), it
            raise NewtonDivergence(f"damping stalled at {res_bad:.2f}x tolerance")
        w, res, res_bad = w_try, res_try, bad_try
    if res_bad <= 1.0:
        return _u_of_w(w, m), config.newton_max_iter
    raise NewtonDivergence(
        f"residual at {res_bad:.2f}x tolerance after {config.newton_max_iter} iterations"
    )


def _apply_absorption_exact(u: np.ndarray, dt: float, q: float) -> np.ndarray:
    """Exact map of u' = -u^q over dt, applied pointwise; zero stays zero."""
    out = np.zeros_like(u)
    pos = u > 0.0
    out[pos] = (u[pos] ** (1.0 - q) + (q - 1.0) * dt) ** (-1.0 / (q - 1.0))
    return out


def _advance(u_old: np.ndarray, dt: float, work: _StepWork) -> tuple[np.ndarray, int]:
    u_new, iters = _newton_step(u_old, dt, work)
    if work.config.absorption_mode == "split_exact":
        u_new = _apply_absorption_exact(u_new, dt, work.q)
    if work.config.floor > 0.0:
        u_new = np.maximum(u_new, work.config.floor)
    neg = u_new < 0.0
    if np.any(neg):
        # Cannot happen with the clipped w iteration; kept as a tripwire.
        worst = float(u_new.min())
        if worst < -10.0 * np.finfo(float).eps * max(float(u_old.max()), 1.0):
            raise AssertionError(f"negativity {worst} beyond round-off")
        log.debug("clipped %d marginally negative cells", int(neg.sum()))
        u_new = np.maximum(u_new, 0.0)
    return u_new, iters


def step(field: Field, t: float, dt: float, config: SolverConfig) -> Field:
    """Advance one backward-Euler step of size dt.

    Raises NewtonDivergence when the implicit solve does not converge; the
    caller is expected to halve dt and retry.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    work = _StepWork(field.grid, config)
    u_new, _ = _advance(field.values, dt, work)
    return Field(field.grid, u_new)


def solve(config: SolverConfig, grid: RadialGrid, ic, t_schedule) -> list[Snapshot]:
    """Integrate from t = 0 and emit one snapshot per scheduled time.

    ic may be an initial-condition descriptor or a ready-made Field on the
    same grid.  The schedule must be strictly increasing and start at >= 0;
    a leading 0 emits the initial state itself.
    """
    schedule = np.asarray(t_schedule, dtype=float)
    if schedule.ndim != 1 or schedule.size == 0:
        raise ValueError("t_schedule must be a nonempty 1-d sequence")
    if schedule[0] < 0.0 or np.any(np.diff(schedule) <= 0.0):
        raise ValueError("t_schedule must be strictly increasing and start at >= 0")

    if isinstance(ic, Field):
        if ic.grid is not grid and not np.array_equal(ic.grid.faces, grid.faces):
            raise ValueError("initial field lives on a different grid")
        field = ic
    else:
        field = init_field(grid, ic, config.params)

    work = _StepWork(grid, config)
    snaps: list[Snapshot] = []
    t = 0.0
    values = field.values
    j = 0
    if schedule[0] == 0.0:
        snaps.append(make_snapshot(0.0, field))
        j = 1
    dt_want = config.dt_init
    dt_floor = config.dt_init * 2.0**-48
    while j < schedule.size:
        target = float(schedule[j])
        remaining = target - t
        dt_try = min(dt_want, config.dt_max, remaining)
        if math.isfinite(config.dt_rel_max):
            dt_try = min(dt_try, config.dt_rel_max * (t + config.dt_init))
        hits_target = dt_try >= remaining
        if not hits_target and dt_try < dt_floor:
            raise SolverFailure(t, f"time step collapsed below {dt_floor:.3e}")
        try:
            values, iters = _advance(values, dt_try, work)
        except NewtonDivergence as exc:
            dt_want = dt_try * config.dt_cut
            if dt_want < dt_floor:
                raise SolverFailure(t, f"time step collapsed below {dt_floor:.3e}: {exc}")
            continue
        t = target if hits_target else t + dt_try
        if iters <= config.easy_iters:
            dt_want = min(max(dt_want, dt_try) * config.dt_grow, config.dt_max)
        if hits_target:
            snaps.append(make_snapshot(t, Field(grid, values)))
            j += 1
    return snaps
