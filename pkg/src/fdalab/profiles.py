"""Closed-form profiles, derived constants and explicit bounds.

Everything in this module is a pure function of the problem parameters
(dimension N, diffusion exponent m, absorption exponent q).  The solver,
rescaler and verifier consume these objects; nothing here touches a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import PowerTailIntegrand, integrate_half_line

__all__ = [
    "ParameterError",
    "Params",
    "Constants",
    "ProfileSpec",
    "derive_constants",
    "barenblatt",
    "subsolution",
    "supersolution",
    "lower_bound_amplitude",
    "flat_decay_bound",
    "compute_a_star",
    "positivity_transform",
]


class ParameterError(ValueError):
    """Rejected parameter combination (exponents outside the admissible range)."""


@dataclass(frozen=True)
class Params:
    """Problem parameters for du/dt = Lap(u^m) - u^q.

    The admissible window is (N-2)_+/N < m < 1 and q > 1.  With
    ``critical=True`` the absorption exponent is pinned to q = m + 2/N
    (pass q=None to have it filled in, or pass the exact value).
    Only integer dimensions are accepted: the radial reduction and the
    spherical measure weights are meaningless otherwise.
    """

    N: int
    m: float
    q: float | None = None
    critical: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise ParameterError(f"dimension must be an integer, got {self.N!r}")
        if self.N < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.N}")
        if not self.m_c < self.m < 1.0:
            raise ParameterError(
                f"m={self.m} outside the admissible range ({self.m_c}, 1) for N={self.N}"
            )
        if self.critical:
            q_star = self.m + 2.0 / self.N
            if self.q is None:
                object.__setattr__(self, "q", q_star)
            elif self.q != q_star:
                raise ParameterError(f"critical run requires q = {q_star}, got {self.q}")
        if self.q is None:
            raise ParameterError("q is required when critical=False")
        if not self.q > 1.0:
            raise ParameterError(f"q must exceed 1, got {self.q}")

    @property
    def m_c(self) -> float:
        return max(self.N - 2, 0) / self.N

    @property
    def q_star(self) -> float:
        return self.m + 2.0 / self.N


@dataclass(frozen=True)
class Constants:
    """Derived constants; see derive_constants for the closed forms.

    q_star  critical absorption exponent m + 2/N
    b0      curvature of the Barenblatt profile
    k       admissible initial-tail exponent, lies in (N, 2/(1-m))
    delta   supersolution perturbation exponent 1/(1-m) - k/2
    gamma   subsolution time-correction coefficient 1/(2(1-m))
    s0      minimal rescaled time for the subsolution (0 when m >= (N-1)/N)
    alpha   time exponent of the absorption-free Barenblatt solution
    r1      positive zero-order coefficient from the gradient-bound proof
    """

    q_star: float
    b0: float
    k: float
    delta: float
    gamma: float
    s0: float
    alpha: float
    r1: float


def derive_constants(params: Params) -> Constants:
    """Populate every derived constant from its closed form.

    s0 is branch-dependent: the stationary subsolution used for
    m >= (N-1)/N is valid for all rescaled times, so s0 = 0 there; the
    time-corrected branch needs s beyond max(4q/(1-m), 2^(m+2) q/(q-1)).
    s0 is only meaningful for critical runs.
    """
    N, m, q = params.N, params.m, params.q
    q_star = params.q_star
    nm = N * m - N + 2.0  # positive on the admissible range
    b0 = (1.0 - m) / (2.0 * m * nm)
    k = N + m * N * nm / (2.0 * (2.0 - m + m * N * (1.0 - m)))
    delta = 1.0 / (1.0 - m) - k / 2.0
    gamma = 1.0 / (2.0 * (1.0 - m))
    if m >= (N - 1.0) / N:
        s0 = 0.0
    else:
        s0 = max(4.0 * q / (1.0 - m), 2.0 ** (m + 2.0) * q / (q - 1.0))
    alpha = N / nm
    r1 = 2.0 * m * nm / (1.0 - m)
    return Constants(
        q_star=q_star, b0=b0, k=k, delta=delta, gamma=gamma, s0=s0, alpha=alpha, r1=r1
    )


def barenblatt(A: float, r, params: Params):
    """Stationary rescaled profile (A + b0 r^2)^(1/(m-1)).

    Strictly positive, strictly decreasing in both r and A (m < 1 makes
    the exponent negative).  Vectorizes over r.
    """
    if not A > 0.0:
        raise ParameterError(f"profile parameter A must be positive, got {A}")
    b0 = derive_constants(params).b0
    return (A + b0 * np.square(r)) ** (1.0 / (params.m - 1.0))


def subsolution(A: float, s: float, r, params: Params):
    """Lower comparison profile for the rescaled critical equation.

    For m >= (N-1)/N this is the stationary profile itself; below that
    threshold it carries the time correction (1 - gamma/s), which forces
    s > gamma.
    """
    if not params.critical:
        raise ParameterError("subsolution is defined for the critical regime only")
    base = barenblatt(A, r, params)
    if params.m >= (params.N - 1.0) / params.N:
        return base
    gamma = derive_constants(params).gamma
    if not s > gamma:
        raise ParameterError(f"time-corrected branch needs s > gamma={gamma}, got s={s}")
    return base * (1.0 - gamma / s)


def supersolution(A: float, s: float, r, params: Params):
    """Upper comparison profile sigma_A * (1 + (A + b0 r^2)^delta / s)."""
    if not params.critical:
        raise ParameterError("supersolution is defined for the critical regime only")
    if not s > 0.0:
        raise ParameterError(f"s must be positive, got {s}")
    c = derive_constants(params)
    core = A + c.b0 * np.square(r)
    return core ** (1.0 / (params.m - 1.0)) * (1.0 + core**c.delta / s)


def lower_bound_amplitude(t: float, u_center: float, sup_u0: float, params: Params) -> float:
    """Amplitude of the universal spatial lower bound u >= amp * (1+r)^(-2/(1-m)).

    Built from the center value at time t and the gradient bound; valid for
    any q > 1.  The extra term is active only when q < (3-m)/2.
    """
    m, q = params.m, params.q
    b0 = derive_constants(params).b0
    extra = math.sqrt(max(3.0 - m - 2.0 * q, 0.0)) * sup_u0 ** ((q - 1.0) / 2.0) * math.sqrt(t)
    bracket = u_center ** ((m - 1.0) / 2.0) + math.sqrt(b0) * (1.0 + extra) / math.sqrt(t)
    return bracket ** (2.0 / (m - 1.0))


def flat_decay_bound(t, sup_u0: float, params: Params):
    """Sup-norm decay bound (sup_u0^(1-q) + (q-1) t)^(-1/(q-1)).

    Exact for spatially constant data; extends continuously to sup_u0 at
    t = 0.  Vectorizes over t.
    """
    q = params.q
    return (sup_u0 ** (1.0 - q) + (q - 1.0) * np.asarray(t, dtype=float)) ** (-1.0 / (q - 1.0))


def compute_a_star(params: Params, quad_tol: float = 1e-10, map_kind: str = "algebraic") -> float:
    """Amplitude of the attracting profile, from the ratio of two tail integrals.

    Each improper integral is evaluated to absolute accuracy quad_tol by
    adaptive Gauss-Kronrod quadrature after mapping [0, inf) onto a finite
    interval; map_kind selects the mapping (the two available mappings
    agree to within the tolerance, which is exercised by the test suite).
    """
    if not params.critical:
        raise ParameterError("the attracting amplitude is defined for the critical regime only")
    N, m = params.N, params.m
    e = (N - 2.0) / 2.0
    p_num = params.q_star / (m - 1.0)
    p_den = 1.0 / (m - 1.0)
    # Guaranteed by the Params invariants; a failure here is an internal error.
    assert p_num + e < -1.0 and p_den + e < -1.0
    i_num = integrate_half_line(PowerTailIntegrand(p_num, e), quad_tol, map_kind)
    i_den = integrate_half_line(PowerTailIntegrand(p_den, e), quad_tol, map_kind)
    exponent = N * (1.0 - m) / (2.0 * (N * m + 2.0 - N))
    return (2.0 * i_num / (N * i_den)) ** exponent


def positivity_transform(t, sup_u0: float, params: Params):
    """Time change pairing the absorbing equation with the absorption-free one.

    Returns (lam, s) with lam = exp(-a t) and s = (exp((1-m) a t) - 1)/((1-m) a),
    a = sup_u0^(q-1).  The product lam * (absorption-free solution at time s)
    is a lower barrier for the absorbing solution; s(0) = 0, s'(0) = 1 and
    both maps are strictly monotone.  Vectorizes over t.
    """
    m, q = params.m, params.q
    a = sup_u0 ** (q - 1.0)
    t = np.asarray(t, dtype=float)
    lam = np.exp(-a * t)
    s = np.expm1((1.0 - m) * a * t) / ((1.0 - m) * a)
    if lam.ndim == 0:
        return float(lam), float(s)
    return lam, s


@dataclass(frozen=True)
class ProfileSpec:
    """Descriptor for one member of the comparison-profile families."""

    kind: str  # barenblatt | subsolution | supersolution
    A: float
    s: float = field(default=math.nan)

    _KINDS = ("barenblatt", "subsolution", "supersolution")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ParameterError(f"kind must be one of {self._KINDS}, got {self.kind!r}")
        if not self.A > 0.0:
            raise ParameterError(f"A must be positive, got {self.A}")
        if self.kind != "barenblatt" and not math.isfinite(self.s):
            raise ParameterError(f"{self.kind} requires a finite rescaled time s")

    def evaluate(self, r, params: Params):
        if self.kind == "barenblatt":
            return barenblatt(self.A, r, params)
        if self.kind == "subsolution":
            return subsolution(self.A, self.s, r, params)
        return supersolution(self.A, self.s, r, params)
