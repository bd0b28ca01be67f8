"""Free particle in high-temperature quantum Brownian motion under
continuous general-dyne monitoring.

Rescaled units: damping rate, mass, k_B and hbar are all 1.  The Wigner
exponents (alpha, beta, gamma) obey a closed, deterministic Riccati system.
At high T the natural scales are alpha ~ sqrt(4T), beta ~ 1/sqrt(4T),
gamma ~ 1 and time ~ 1/sqrt(4T); integration is carried out in those scaled
variables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .gaussian import GaussianShape
from .numerics import Curve, IntegratorConfig, NewtonFailure, Trajectory, integrate, newton_polish

SINGULAR_EPS = 1e-12


class SingularSchemeError(ValueError):
    """The high-T closed form is singular for this scheme (1 + r cos 2phi = 0)."""


class NotAttainableError(RuntimeError):
    """No stationary state was reached within the integration horizon."""


@dataclass(frozen=True)
class QbmScheme:
    """Measurement scheme: total efficiency ``eta``, noise correlation ``r``
    (1: homodyne, 0: heterodyne) and homodyne angle ``phi``."""

    eta: float = 1.0
    r: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not -1 <= self.r <= 1:
            raise ValueError(f"r must lie in [-1, 1], got {self.r}")
        if not 0 <= self.phi <= 2 * math.pi + 1e-12:
            raise ValueError(f"phi must lie in [0, 2pi], got {self.phi}")

    @property
    def eta_x(self) -> float:
        return self.eta * (1 + self.r) / 2

    @property
    def eta_y(self) -> float:
        return self.eta * (1 - self.r) / 2

    def unconditional(self) -> QbmScheme:
        return QbmScheme(0.0, self.r, self.phi)


@dataclass(frozen=True)
class QbmBath:
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"temperature must be positive, got {self.T}")

    @property
    def four_t(self) -> float:
        return 4.0 * self.T

    @property
    def scale(self) -> float:
        """sqrt(4T): the high-T scale of alpha, 1/beta and 1/time."""
        return math.sqrt(4.0 * self.T)


class SieveScale(enum.Enum):
    FOUR_T = "4T"
    SQRT_FOUR_T = "sqrt4T"


@dataclass(frozen=True)
class SieveCoords:
    A: float
    C: float
    scale: SieveScale = SieveScale.FOUR_T

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")


@dataclass(frozen=True)
class StationaryHighT:
    A_ss: float
    B_ss: float
    C_ss: float

    def to_shape(self, bath: QbmBath) -> GaussianShape:
        s = bath.scale
        return GaussianShape(self.A_ss * s, self.B_ss / s, self.C_ss)


def channel_efficiencies(scheme: QbmScheme) -> tuple[float, float]:
    return scheme.eta_x, scheme.eta_y


def _cos_sin(phi: float) -> tuple[float, float]:
    # exact zeros at multiples of pi/2 keep the invariant subspaces invariant
    c, s = math.cos(phi), math.sin(phi)
    return (0.0 if abs(c) < 1e-15 else c), (0.0 if abs(s) < 1e-15 else s)


def _rhs(alpha, beta, gamma, F, ex, ey, c, s):
    u = 1.0 - alpha / F
    v = 1.0 - F * beta
    a1 = gamma * s - u * c
    a2 = gamma * c + u * s
    b1 = gamma * c - v * s
    b2 = gamma * s + v * c
    d_alpha = -alpha * alpha / F - F * gamma * gamma + F * ex * a1 * a1 + F * ey * a2 * a2
    d_beta = -F * beta * beta - gamma * gamma / F + 2 * beta - 2 * gamma + (ex / F) * b1 * b1 + (ey / F) * b2 * b2
    d_gamma = -alpha * gamma / F - F * beta * gamma + gamma - alpha + ex * a1 * b1 - ey * a2 * b2
    return d_alpha, d_beta, d_gamma


def drift(shape, scheme: QbmScheme, bath: QbmBath) -> np.ndarray:
    """Time derivatives (d alpha/dt, d beta/dt, d gamma/dt)."""
    alpha, beta, gamma = shape.as_tuple() if isinstance(shape, GaussianShape) else shape
    c, s = _cos_sin(scheme.phi)
    return np.array(_rhs(alpha, beta, gamma, bath.four_t, scheme.eta_x, scheme.eta_y, c, s))


def _scaled_field(scheme: QbmScheme, bath: QbmBath):
    """Vector field in (alpha/S, beta*S, gamma) against tau = S t, S = sqrt(4T)."""
    S, F = bath.scale, bath.four_t
    ex, ey = scheme.eta_x, scheme.eta_y
    c, s = _cos_sin(scheme.phi)

    def field(tau, z):
        da, db, dg = _rhs(z[0] * S, z[1] / S, z[2], F, ex, ey, c, s)
        return np.array([da / (S * S), db, dg / S])

    return field


def _plain_field(scheme: QbmScheme, bath: QbmBath):
    F = bath.four_t
    ex, ey = scheme.eta_x, scheme.eta_y
    c, s = _cos_sin(scheme.phi)

    def field(t, y):
        return np.array(_rhs(y[0], y[1], y[2], F, ex, ey, c, s))

    return field


def to_scaled(shape: GaussianShape, bath: QbmBath) -> np.ndarray:
    S = bath.scale
    return np.array([shape.alpha / S, shape.beta * S, shape.gamma])


def from_scaled(z, bath: QbmBath) -> GaussianShape:
    S = bath.scale
    return GaussianShape(float(z[0]) * S, float(z[1]) / S, float(z[2]))


def default_config(bath: QbmBath, t_end: float, rescale: bool = True) -> IntegratorConfig:
    if rescale:
        return IntegratorConfig(rtol=1e-9, atol=1e-12, h_init=1e-3, h_min=1e-16, t_max=t_end * bath.scale)
    return IntegratorConfig(
        rtol=1e-9, atol=1e-12 / bath.scale, h_init=1e-3 / bath.scale, h_min=1e-16 / bath.scale, t_max=t_end
    )


class QbmTrajectory:
    """Dense trajectory in physical time ``t`` (not the scaled time)."""

    def __init__(self, raw: Trajectory, bath: QbmBath, rescaled: bool):
        self.raw = raw
        self.bath = bath
        self._time_scale = bath.scale if rescaled else 1.0
        S = bath.scale if rescaled else 1.0
        self._unscale = np.array([S, 1.0 / S, 1.0])[:, None]

    @property
    def t(self) -> np.ndarray:
        return self.raw.t / self._time_scale

    @property
    def t_reached(self) -> float:
        return self.raw.t_reached / self._time_scale

    @property
    def stopped(self) -> bool:
        return self.raw.stopped

    def states(self, t) -> np.ndarray:
        """Array ``(3, m)`` of (alpha, beta, gamma) at times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.raw(t * self._time_scale) * self._unscale

    def shape(self, t: float) -> GaussianShape:
        return GaussianShape(*map(float, self.states(t)[:, 0]))

    @property
    def final(self) -> GaussianShape:
        return GaussianShape(*map(float, self.raw.final * self._unscale[:, 0]))

    def purity(self, t):
        y = self.states(t)
        p = np.sqrt(np.maximum(y[0] * y[1] - y[2] * y[2], 0.0))
        return p if np.ndim(t) else float(p[0])

    def purity_curve(self) -> Curve:
        return Curve(self.t, lambda t: np.asarray(self.purity(np.atleast_1d(t))).reshape(np.shape(t)))


def evolve(
    shape0: GaussianShape,
    scheme: QbmScheme,
    bath: QbmBath,
    t_end: float,
    cfg: Optional[IntegratorConfig] = None,
    stop: Optional[Callable[[float, GaussianShape], bool]] = None,
    rescale: bool = True,
) -> QbmTrajectory:
    """Integrate the covariance equations from ``shape0`` up to ``t_end``.

    ``cfg`` is interpreted in the integration variables (scaled time when
    ``rescale`` is set).  ``stop(t, shape)`` can end the run early.
    """
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    cfg = cfg or default_config(bath, t_end, rescale)
    if rescale:
        field, y0, S = _scaled_field(scheme, bath), to_scaled(shape0, bath), bath.scale
        to_shape = lambda y: from_scaled(y, bath)  # noqa: E731
    else:
        field, y0, S = _plain_field(scheme, bath), np.array(shape0.as_tuple()), 1.0
        to_shape = lambda y: GaussianShape(*map(float, y))  # noqa: E731
    step_stop = None if stop is None else (lambda tau, y: stop(tau / S, to_shape(y)))
    return QbmTrajectory(integrate(field, y0, cfg, stop=step_stop), bath, rescale)


def _int_u2(t: float) -> float:
    """Integral of (1 - e^{-s})^2 over [0, t]."""
    if t < 1.0:
        # t^3/3 - t^4/4 + ...; the closed form cancels catastrophically here
        total, term = 0.0, t * t / 2.0
        for k in range(3, 40):
            term *= t / k
            total += (-1) ** (k + 1) * (2.0 ** (k - 1) - 2.0) * term
        return total
    return t - 2.0 * (-math.expm1(-t)) + 0.5 * (-math.expm1(-2.0 * t))


def _unconditional_pieces(bath: QbmBath, t: float):
    """exp(-A t) and the accumulated noise W(t) of the linear covariance flow.

    Without measurement the covariance Sigma = (2M)^{-1} obeys
    dSigma/dt = A Sigma + Sigma A^T + D with A = [[0, 1], [0, -1]] and
    D = diag(1/(2F), F/2), F = 4T.
    """
    F = bath.four_t
    d1, d2 = 0.5 / F, 0.5 * F
    e1 = -math.expm1(-t)
    e2 = -math.expm1(-2.0 * t)
    w = np.array([[d1 * t + d2 * _int_u2(t), 0.5 * d2 * e1 * e1], [0.5 * d2 * e1 * e1, 0.5 * d2 * e2]])
    inv_prop = np.array([[1.0, -math.expm1(t)], [0.0, math.exp(t)]])
    return inv_prop, w


def unconditional_shape(shape0: GaussianShape, bath: QbmBath, t: float) -> GaussianShape:
    """Exact unconditional evolution (no measurement) from ``shape0`` with det > 0."""
    if t < 0:
        raise ValueError("t must be non-negative")
    inv_prop, w = _unconditional_pieces(bath, t)
    m0 = shape0.matrix()
    # M(t) = [e^{-A^T t} M0 e^{-A t}] (I + 2 W [e^{-A^T t} M0 e^{-A t}])^{-1}
    k = inv_prop.T @ m0 @ inv_prop
    m = k @ np.linalg.inv(np.eye(2) + 2.0 * w @ k)
    return GaussianShape(float(m[0, 0]), float(m[1, 1]), 0.5 * float(m[0, 1] + m[1, 0]))


def unconditional_log_purity(shape0: GaussianShape, bath: QbmBath, t: float) -> float:
    """ln P(t) after unconditional evolution from a state with det > 0.

    Closed form: ln det M(t) = ln det M0 + 2t - ln det(I + X) with
    X = 2 e^{-A^T t} M0 e^{-A t} W(t); the last term goes through log1p so
    purity losses far below machine epsilon relative to 1 stay resolvable.
    """
    det0 = shape0.det
    if not det0 > 0:
        raise ValueError("log purity needs det > 0")
    if t < 0:
        raise ValueError("t must be non-negative")
    inv_prop, w = _unconditional_pieces(bath, t)
    x = 2.0 * inv_prop.T @ shape0.matrix() @ inv_prop @ w
    log_det_ratio = math.log1p(x[0, 0] + x[1, 1] + (x[0, 0] * x[1, 1] - x[0, 1] * x[1, 0]))
    return 0.5 * (math.log(det0) + 2.0 * t - log_det_ratio)


def unconditional_log_purity_ode(shape0: GaussianShape, bath: QbmBath, t: float, rtol: float = 1e-12) -> float:
    """ln P(t) after unconditional evolution from a state with det > 0.

    Without measurement the determinant obeys
    d(ln det)/dt = 2 - alpha/(4T) - 4T beta, so ln det is carried as an
    extra integration variable.  This keeps purity differences far below
    1 - P resolvable, which a direct sqrt(alpha beta - gamma^2) does not.
    """
    det0 = shape0.det
    if not det0 > 0:
        raise ValueError("log purity needs det > 0")
    S, F = bath.scale, bath.four_t

    def field(tau, z):
        da, db, dg = _rhs(z[0] * S, z[1] / S, z[2], F, 0.0, 0.0, 1.0, 0.0)
        return np.array([da / (S * S), db, dg / S, (2.0 - z[0] / S - S * z[1]) / S])

    z0 = np.append(to_scaled(shape0, bath), 0.0)
    cfg = IntegratorConfig(rtol=rtol, atol=1e-14, h_init=min(1e-3, t * S) if t > 0 else 1e-3, h_min=1e-18, t_max=t * S)
    traj = integrate(field, z0, cfg)
    return 0.5 * (math.log(det0) + float(traj.final[3]))


def stationary_high_T(r: float, phi: float) -> StationaryHighT:
    """Leading-order high-temperature conditional stationary state."""
    c2, s2 = math.cos(2 * phi), math.sin(2 * phi)
    denom = 1.0 + r * c2
    if denom <= SINGULAR_EPS:
        raise SingularSchemeError(f"1 + r cos(2 phi) = {denom:.3g} (r={r}, phi={phi})")
    C = -(r * s2 + math.sqrt(1.0 + 2.0 * r * c2 + r * r)) / denom
    B = math.sqrt(-4.0 * C / denom)
    A = -0.5 * B * C * denom - 0.5 * B * r * s2
    return StationaryHighT(A, B, C)


def thermal_state(bath: QbmBath) -> GaussianShape:
    return GaussianShape(0.0, 1.0 / (2.0 * bath.T), 0.0)


def stationary_numeric(
    scheme: QbmScheme,
    bath: QbmBath,
    tol_ss: float = 1e-8,
    tol_res: float = 1e-12,
    tau_max: float = 200.0,
    window: float = 1.0,
    start: Optional[GaussianShape] = None,
) -> GaussianShape:
    """Conditional stationary state, found by integrating from the thermal
    state (or ``start``) until the relative rate of change per unit scaled
    time stays below ``tol_ss`` for ``window``, then Newton-polishing.

    Raises
    ------
    NotAttainableError
        When the flow has not settled by ``tau_max``.
    """
    field = _scaled_field(scheme, bath)
    z0 = to_scaled(start or thermal_state(bath), bath)
    history = [(0.0, z0)]

    def settled(tau, z):
        history.append((tau, z.copy()))
        ref = None
        for tau_j, z_j in reversed(history):
            if tau - tau_j >= window:
                ref = (tau_j, z_j)
                break
        if ref is None:
            return False
        tau_j, z_j = ref
        rate = np.linalg.norm(z - z_j) / (max(np.linalg.norm(z), 1e-300) * (tau - tau_j))
        return rate < tol_ss

    cfg = IntegratorConfig(rtol=1e-9, atol=1e-12, h_init=1e-3, h_min=1e-16, t_max=tau_max)
    traj = integrate(field, z0, cfg, stop=settled)
    if not traj.stopped:
        raise NotAttainableError(
            f"no stationary state within tau={tau_max} for {scheme} at T={bath.T}"
        )
    z = traj.final
    try:
        z = newton_polish(lambda x: field(0.0, x), z, tol=tol_res)
    except NewtonFailure:
        # singular Jacobian on an invariant subspace; the integrated state stands
        pass
    return from_scaled(z, bath)


def sieve_state(coords: SieveCoords, bath: QbmBath) -> GaussianShape:
    """Pure initial state alpha0 = scale*A, gamma0 = C, beta0 = (1 + C^2)/alpha0."""
    scale = bath.four_t if coords.scale is SieveScale.FOUR_T else bath.scale
    alpha0 = scale * coords.A
    return GaussianShape(alpha0, (1.0 + coords.C * coords.C) / alpha0, coords.C)


def initial_purity_sq_gain_rate(scheme: QbmScheme) -> float:
    """d(P^2)/dt at t = 0 from the thermal state: eta (1 + r cos 2phi), independent of T."""
    return scheme.eta * (1.0 + scheme.r * math.cos(2 * scheme.phi))


def initial_purity_loss_rate(r: float, phi: float, bath: QbmBath) -> float:
    """-dP/dt at the start of unconditional evolution from the high-T stationary state."""
    return math.sqrt(bath.T) * stationary_high_T(r, phi).B_ss
