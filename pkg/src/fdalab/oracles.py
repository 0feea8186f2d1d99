"""Independent reference solutions used to calibrate the solver.

The formulas here are derived from scratch (not imported from the rest of
the package) so that solver/profile bugs cannot hide behind a shared
implementation.  In particular the absorption-free Barenblatt constants are
re-derived inline and guarded by a PDE-residual test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profiles import Params
from .quadrature import PowerTailIntegrand, integrate_half_line

__all__ = ["OracleResult", "flat_ode_exact", "fde_barenblatt_exact", "quadrature"]


@dataclass(frozen=True)
class OracleResult:
    name: str
    value: object  # float or ndarray
    method: str  # "closed form" | "high-resolution quadrature" | "dense ODE integration"


def flat_ode_exact(t, u0: float, params: Params):
    """Exact solution of u' = -u^q from a positive constant u0; vectorizes over t."""
    if not u0 > 0.0:
        raise ValueError(f"u0 must be positive, got {u0}")
    q = params.q
    return (u0 ** (1.0 - q) + (q - 1.0) * np.asarray(t, dtype=float)) ** (-1.0 / (q - 1.0))


def fde_barenblatt_exact(t: float, r, C: float, params: Params):
    """Source-type exact solution of du/dt = Lap(u^m) for m in (m_c, 1).

    U(t, r) = t^(-a) (C + b r^2 t^(-2s))^(1/(m-1)) with s = 1/(N m - N + 2),
    a = N s and b = (1-m) s / (2 m).  Vectorizes over r.
    """
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    if not C > 0.0:
        raise ValueError(f"C must be positive, got {C}")
    N, m = params.N, params.m
    scale = 1.0 / (N * m - N + 2.0)
    a = N * scale
    b = (1.0 - m) * scale / (2.0 * m)
    core = C + b * np.square(r) * t ** (-2.0 * scale)
    return t ** (-a) * core ** (1.0 / (m - 1.0))


def quadrature(map_kind: str, integrand: PowerTailIntegrand, tol: float) -> OracleResult:
    """Adaptive improper integral of a power-tail integrand over [0, inf)."""
    value = integrate_half_line(integrand, tol, map_kind)
    return OracleResult(
        name=f"integral[(1+r)^{integrand.p} r^{integrand.e}]",
        value=value,
        method="high-resolution quadrature",
    )
