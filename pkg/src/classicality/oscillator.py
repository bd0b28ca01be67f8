"""Damped harmonic oscillator under continuous quadrature monitoring.

Closed-form evolution of the Wigner exponents (alpha, beta) in the rotating
frame.  Units: vacuum-normalised phase space (a coherent state has
alpha = beta = 1) and time in units of the spontaneous emission time.
The homodyne phase is fixed to 0, so gamma stays zero throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import EPS_PHYS, GaussianShape, InvalidStateError


@dataclass(frozen=True)
class OscScheme:
    """Efficiencies of the x- and y-quadrature detection channels."""

    eta_x: float
    eta_y: float

    def __post_init__(self):
        if self.eta_x < 0 or self.eta_y < 0:
            raise ValueError(f"efficiencies must be non-negative: {self}")
        if self.eta_x + self.eta_y > 1 + 1e-12:
            raise ValueError(f"total efficiency exceeds 1: {self}")

    @property
    def eta(self) -> float:
        return self.eta_x + self.eta_y


UNCONDITIONAL = OscScheme(0.0, 0.0)


@dataclass(frozen=True)
class OscBath:
    """Bath described by its Bose occupation ``n`` (``n = 0`` is zero temperature)."""

    n: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"occupation must be non-negative, got {self.n}")

    @property
    def factor(self) -> float:
        return 1.0 + 2.0 * self.n

    @classmethod
    def from_temperature(cls, kT_over_hbar_omega: float) -> OscBath:
        return cls(1.0 / math.expm1(1.0 / kT_over_hbar_omega))


def scheme_from_s(eta: float, s: float) -> OscScheme:
    """Interpolate between x-homodyne (s=0), heterodyne (s=0.5) and y-homodyne (s=1)."""
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if not 0 <= s <= 1:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    c = math.cos(s * math.pi / 2)
    sn = math.sin(s * math.pi / 2)
    return OscScheme(eta * c * c, eta * sn * sn)


def _flow(x0, eta_c, t):
    # e^{-t}-scaled form of the Riccati solution; finite for t = inf
    k = x0 * (1.0 - eta_c) + eta_c
    decay = np.exp(-np.asarray(t, dtype=float))
    num = k - decay * (1.0 - x0) * eta_c
    den = k + decay * (1.0 - x0) * (1.0 - eta_c)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den != 0, num / np.where(den != 0, den, 1.0), 0.0)
    return out if out.ndim else float(out)


def _check_start(alpha0, beta0, scale=1.0):
    if alpha0 < 0 or beta0 < 0:
        raise InvalidStateError(f"negative initial coefficients ({alpha0}, {beta0})")
    if alpha0 * beta0 > 1 + EPS_PHYS:
        raise InvalidStateError(f"initial state violates the uncertainty bound: alpha0*beta0={alpha0 * beta0}")


def conditional_shape(alpha0: float, beta0: float, scheme: OscScheme, t):
    """(alpha(t), beta(t)) at zero temperature; ``t`` may be an array.

    The degenerate start ``alpha0 = 0`` (infinitely hot along x) is handled
    by the same algebraic expression.
    """
    _check_start(alpha0, beta0)
    return _flow(alpha0, scheme.eta_x, t), _flow(beta0, scheme.eta_y, t)


def conditional_shape_finite_T(alpha0: float, beta0: float, bath: OscBath, scheme: OscScheme, t):
    """Finite-temperature flow: the zero-temperature solution in the variables
    ``(1 + 2n) alpha`` and ``(1 + 2n) beta``."""
    _check_start(alpha0, beta0)
    f = bath.factor
    return _flow(f * alpha0, scheme.eta_x, t) / f, _flow(f * beta0, scheme.eta_y, t) / f


def evolve_shape(shape0: GaussianShape, scheme: OscScheme, t: float, bath: OscBath = OscBath()) -> GaussianShape:
    a, b = conditional_shape_finite_T(shape0.alpha, shape0.beta, bath, scheme, t)
    return GaussianShape(float(a), float(b), 0.0)


def stationary_shape(bath: OscBath = OscBath()) -> GaussianShape:
    """Long-time limit, identical for every scheme."""
    v = 1.0 / bath.factor
    return GaussianShape(v, v, 0.0)


def initial_purity_gain_rate(scheme: OscScheme) -> float:
    """dP/dt at t = 0 from an infinitely hot thermal start."""
    return math.sqrt(scheme.eta_x * scheme.eta_y)


def sieve_state_from_xi(xi: float) -> GaussianShape:
    """Pure squeezed state with squeezing parameter ``xi = log(kappa)``."""
    return GaussianShape(math.exp(xi), math.exp(-xi), 0.0)
