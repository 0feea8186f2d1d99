"""Self-similar change of variables and the rescaled operators.

A physical snapshot u(t, r) maps to v(s, y) through

    s = log(T + t)
    y = r / ((T+t)^(1/(N(q-1))) (log(T+t))^((1-m)/(2(q-1))))
    v = ((T+t) log(T+t))^(1/(q-1)) u

and the rescaled solution satisfies dv/ds = (nonautonomous operator)(v).
This module evaluates that operator, and its s-independent limit, by
second-order central differences of the radial Laplacian on arbitrary node
sets.  The derivative at the origin is fixed to zero by radial symmetry
(even ghost reflection); the outermost node uses a one-sided stencil, so
residual consumers exclude the outer 10% of nodes from sign checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profiles import ParameterError, Params
from .solver import Field, RadialGrid, Snapshot, make_snapshot

__all__ = [
    "RescaledProfile",
    "scaling_factors",
    "to_selfsimilar",
    "from_selfsimilar",
    "radial_derivative",
    "radial_laplacian",
    "nonautonomous_residual",
    "autonomous_residual",
]

_POWER_FLOOR = 1e-300  # guards exp(p*log(v)) against 0^p underflow paths


@dataclass(frozen=True)
class RescaledProfile:
    """Radial profile in self-similar variables at one rescaled time.

    s equals log(T + t) for the originating physical time; the grid
    reference (when present) lets from_selfsimilar rebuild the snapshot on
    exactly the original nodes.
    """

    s: float
    T: float
    y: np.ndarray
    values: np.ndarray
    grid: RadialGrid | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ValueError("rescaled values must be nonnegative and finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


def scaling_factors(t: float, T: float, params: Params) -> tuple[float, float]:
    """(amplitude factor, length factor) of the change of variables at time t."""
    N, m, q = params.N, params.m, params.q
    tt = T + t
    if not tt > 1.0:
        raise ValueError(f"T + t must exceed 1, got {tt}")
    lg = math.log(tt)
    amp = (tt * lg) ** (1.0 / (q - 1.0))
    length = tt ** (1.0 / (N * (q - 1.0))) * lg ** ((1.0 - m) / (2.0 * (q - 1.0)))
    return amp, length


def to_selfsimilar(snap: Snapshot, T: float, params: Params) -> RescaledProfile:
    """Map a physical snapshot to self-similar variables with shift T >= 1."""
    if not params.critical:
        raise ParameterError("self-similar variables are defined for the critical regime")
    if T < 1.0:
        raise ValueError(f"T must be >= 1, got {T}")
    amp, length = scaling_factors(snap.t, T, params)
    return RescaledProfile(
        s=math.log(T + snap.t),
        T=T,
        y=snap.field.grid.centers / length,
        values=amp * snap.field.values,
        grid=snap.field.grid,
    )


def from_selfsimilar(profile: RescaledProfile, params: Params) -> Snapshot:
    """Exact algebraic inverse of to_selfsimilar on the same nodes."""
    if profile.grid is None:
        raise ValueError("profile carries no grid; cannot rebuild the snapshot")
    t = math.exp(profile.s) - profile.T
    amp, _ = scaling_factors(t, profile.T, params)
    return make_snapshot(t, Field(profile.grid, profile.values / amp))


def _safe_power(v: np.ndarray, p: float) -> np.ndarray:
    """v**p through exp(p log v); exactly zero where v == 0 (one-sided limit)."""
    out = np.zeros_like(v)
    pos = v > _POWER_FLOOR
    out[pos] = np.exp(p * np.log(v[pos]))
    return out


def radial_derivative(y: np.ndarray, f: np.ndarray) -> np.ndarray:
    """First derivative of an even radial function sampled at nodes y.

    Central three-point stencil on (possibly nonuniform) interior nodes;
    the first node uses the even ghost reflection across the origin, the
    last a one-sided stencil.  Exact for quadratics.
    """
    if y.size < 3:
        raise ValueError("need at least 3 nodes for the derivative stencils")
    df = np.empty_like(f)
    hm = y[1:-1] - y[:-2]
    hp = y[2:] - y[1:-1]
    df[1:-1] = (
        -hp / (hm * (hm + hp)) * f[:-2]
        + (hp - hm) / (hm * hp) * f[1:-1]
        + hm / (hp * (hm + hp)) * f[2:]
    )
    if y[0] == 0.0:
        df[0] = 0.0
    else:
        # ghost node at -y[0] with value f[0]
        gm, gp = 2.0 * y[0], y[1] - y[0]
        df[0] = (
            -gp / (gm * (gm + gp)) * f[0]
            + (gp - gm) / (gm * gp) * f[0]
            + gm / (gp * (gm + gp)) * f[1]
        )
    em, ep = y[-2] - y[-3], y[-1] - y[-2]
    df[-1] = (
        ep / (em * (em + ep)) * f[-3]
        - (em + ep) / (em * ep) * f[-2]
        + (em + 2.0 * ep) / (ep * (em + ep)) * f[-1]
    )
    return df


def _second_derivative(y: np.ndarray, f: np.ndarray) -> np.ndarray:
    d2 = np.empty_like(f)
    hm = y[1:-1] - y[:-2]
    hp = y[2:] - y[1:-1]
    d2[1:-1] = 2.0 * (
        f[:-2] / (hm * (hm + hp)) - f[1:-1] / (hm * hp) + f[2:] / (hp * (hm + hp))
    )
    if y[0] == 0.0:
        h = y[1] - y[0]
        d2[0] = 2.0 * (f[1] - f[0]) / (h * h)
    else:
        gm, gp = 2.0 * y[0], y[1] - y[0]
        d2[0] = 2.0 * (
            f[0] / (gm * (gm + gp)) - f[0] / (gm * gp) + f[1] / (gp * (gm + gp))
        )
    em, ep = y[-2] - y[-3], y[-1] - y[-2]
    d2[-1] = 2.0 * (
        f[-3] / (em * (em + ep)) - f[-2] / (em * ep) + f[-1] / (ep * (em + ep))
    )
    return d2


def radial_laplacian(y: np.ndarray, f: np.ndarray, dim: int) -> np.ndarray:
    """f'' + (dim-1)/y f' for an even radial function; dim*f'' at the origin."""
    d1 = radial_derivative(y, f)
    d2 = _second_derivative(y, f)
    lap = np.empty_like(f)
    interior = y > 0.0
    lap[interior] = d2[interior] + (dim - 1.0) * d1[interior] / y[interior]
    lap[~interior] = dim * d2[~interior]
    return lap


def _check_residual_args(values: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=float)
    y = np.asarray(y, dtype=float)
    if values.size < 5:
        raise ValueError(f"need at least 5 nodes, got {values.size}")
    if values.shape != y.shape:
        raise ValueError("values and y must have matching shapes")
    if np.any(values < 0.0):
        raise ValueError("rescaled values must be nonnegative")
    return values, y


def nonautonomous_residual(values, y, s: float, params: Params) -> np.ndarray:
    """Apply the full rescaled operator to a profile at rescaled time s.

    Returns Lap(v^m) + (N v + y v')/(N(q-1))
          + (v + (1-m)/2 y v')/((q-1) s) - v^q / s.
    """
    if not params.critical:
        raise ParameterError("the rescaled operator is defined for the critical regime")
    if not s > 0.0:
        raise ValueError(f"s must be positive, got {s}")
    v, y = _check_residual_args(values, y)
    N, m, q = params.N, params.m, params.q
    dv = radial_derivative(y, v)
    out = radial_laplacian(y, _safe_power(v, m), N)
    out += (N * v + y * dv) / (N * (q - 1.0))
    out += (v + 0.5 * (1.0 - m) * y * dv) / ((q - 1.0) * s)
    out -= _safe_power(v, q) / s
    return out


def autonomous_residual(values, y, params: Params) -> np.ndarray:
    """s-independent part of the rescaled operator (its large-time limit)."""
    if not params.critical:
        raise ParameterError("the rescaled operator is defined for the critical regime")
    v, y = _check_residual_args(values, y)
    N, m, q = params.N, params.m, params.q
    dv = radial_derivative(y, v)
    out = radial_laplacian(y, _safe_power(v, m), N)
    out += (N * v + y * dv) / (N * (q - 1.0))
    return out
