"""Classicality criteria over a common model interface.

Two models are supported: the damped oscillator (closed form, zero or
finite temperature) and the free particle in high-temperature Brownian
motion (ODE).  Each criterion is written once against the handle methods:

* ``purity_curve``  - purity as a function of time from a given state;
* ``stationary``    - long-time conditional state for a scheme;
* ``log_purity_after`` - unconditional log-purity at a time (for the sieve).
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import numpy as np

from . import oscillator as osc
from . import qbm
from .gaussian import GaussianShape, purity
from .numerics import Axis, Curve, GridSpec, first_crossing, grid_argopt, bisect
from .outcome import Outcome, Status

__all__ = [
    "OscillatorModel",
    "QbmModel",
    "SweepResult",
    "predictability_sieve",
    "purification_time",
    "efficiency_threshold_fixed_time",
    "efficiency_threshold_asymptotic",
    "purity_loss_time",
    "scheme_sweep",
    "CRITERIA",
    "Outcome",
    "Status",
]


@dataclass(frozen=True)
class OscillatorModel:
    """Damped oscillator with Bose occupation ``n`` (0: zero temperature)."""

    n: float = 0.0
    horizon: float = 50.0
    knots: int = 2001
    xtol: float = 1e-8
    thermal_alpha: float = 1e-8

    @property
    def kind(self) -> str:
        return "osc0" if self.n == 0 else "oscT"

    @property
    def bath(self) -> osc.OscBath:
        return osc.OscBath(self.n)

    def scheme(self, eta: float = 1.0, s: float = 0.5) -> osc.OscScheme:
        return osc.scheme_from_s(eta, s)

    def check_scheme(self, scheme) -> None:
        if not isinstance(scheme, osc.OscScheme):
            raise TypeError(f"oscillator model needs an OscScheme, got {type(scheme).__name__}")

    def unconditional(self, scheme=None) -> osc.OscScheme:
        return osc.UNCONDITIONAL

    def thermal_start(self) -> GaussianShape:
        """High-temperature start with (1 + 2n) alpha0 = (1 + 2n) beta0 = ``thermal_alpha``."""
        v = self.thermal_alpha / self.bath.factor
        return GaussianShape(v, v, 0.0)

    def asymptotic_purity(self) -> float:
        return 1.0 / self.bath.factor

    def purification_target(self, start: GaussianShape) -> float:
        if self.n == 0:
            return 0.5
        return 0.5 * (purity(start) + self.asymptotic_purity())

    def purity_at(self, shape0: GaussianShape, scheme, t):
        self.check_scheme(scheme)
        a, b = osc.conditional_shape_finite_T(shape0.alpha, shape0.beta, self.bath, scheme, t)
        return np.sqrt(a * b)

    def purity_curve(self, shape0: GaussianShape, scheme, horizon: Optional[float] = None, until=None) -> Curve:
        horizon = self.horizon if horizon is None else horizon
        return Curve(np.linspace(0.0, horizon, self.knots), lambda t: self.purity_at(shape0, scheme, t))

    def stationary(self, scheme, start: Optional[GaussianShape] = None) -> GaussianShape:
        start = start or self.thermal_start()
        return osc.evolve_shape(start, scheme, math.inf, self.bath)

    def conditioned_state(self, scheme) -> GaussianShape:
        return self.stationary(scheme)

    def log_purity_after(self, shape0: GaussianShape, t: float) -> float:
        a, b = osc.conditional_shape_finite_T(shape0.alpha, shape0.beta, self.bath, osc.UNCONDITIONAL, t)
        return 0.5 * (math.log(a) + math.log(b))

    def sieve_state(self, xi: float) -> GaussianShape:
        return osc.sieve_state_from_xi(xi)


@dataclass(frozen=True)
class QbmModel:
    """Free particle in quantum Brownian motion at temperature ``T``.

    ``tau_max`` is the horizon in scaled time ``tau = sqrt(4T) t``.
    """

    T: float
    tau_max: float = 200.0
    xtol_tau: float = 1e-8
    sieve_scale: qbm.SieveScale = qbm.SieveScale.FOUR_T

    kind = "qbm"

    @property
    def bath(self) -> qbm.QbmBath:
        return qbm.QbmBath(self.T)

    @property
    def horizon(self) -> float:
        return self.tau_max / self.bath.scale

    @property
    def xtol(self) -> float:
        return self.xtol_tau / self.bath.scale

    def scheme(self, eta: float = 1.0, r: float = 1.0, phi: float = 0.0) -> qbm.QbmScheme:
        return qbm.QbmScheme(eta, r, phi)

    def check_scheme(self, scheme) -> None:
        if not isinstance(scheme, qbm.QbmScheme):
            raise TypeError(f"QBM model needs a QbmScheme, got {type(scheme).__name__}")

    def unconditional(self, scheme=None) -> qbm.QbmScheme:
        return qbm.QbmScheme(0.0, 1.0, 0.0) if scheme is None else scheme.unconditional()

    def thermal_start(self) -> GaussianShape:
        return qbm.thermal_state(self.bath)

    def purification_target(self, start: GaussianShape) -> float:
        return 0.5

    def _trajectory(self, shape0, scheme, horizon=None, until=None):
        self.check_scheme(scheme)
        horizon = self.horizon if horizon is None else horizon
        stop = None
        if until is not None:
            level, direction = until
            sign = 1.0 if direction == "up" else -1.0
            stop = lambda t, s: sign * (purity(s) - level) > 0  # noqa: E731
        return qbm.evolve(shape0, scheme, self.bath, horizon, stop=stop)

    def purity_at(self, shape0: GaussianShape, scheme, t):
        traj = self._trajectory(shape0, scheme, horizon=float(np.max(t)))
        return traj.purity(t)

    def purity_curve(self, shape0: GaussianShape, scheme, horizon: Optional[float] = None, until=None) -> Curve:
        return self._trajectory(shape0, scheme, horizon, until).purity_curve()

    def stationary(self, scheme, start: Optional[GaussianShape] = None) -> GaussianShape:
        self.check_scheme(scheme)
        return qbm.stationary_numeric(scheme, self.bath, tau_max=self.tau_max, start=start)

    def conditioned_state(self, scheme) -> GaussianShape:
        """Stationary state, or the state at the horizon if none is reached."""
        try:
            return self.stationary(scheme)
        except qbm.NotAttainableError:
            return self._trajectory(self.thermal_start(), scheme).final

    def log_purity_after(self, shape0: GaussianShape, t: float) -> float:
        return qbm.unconditional_log_purity(shape0, self.bath, t)

    def sieve_state(self, A: float, C: float) -> GaussianShape:
        return qbm.sieve_state(qbm.SieveCoords(A, C, self.sieve_scale), self.bath)


Model = Union[OscillatorModel, QbmModel]


@dataclass
class SweepResult:
    """Criterion values over a grid with the optimum located on it.

    ``values`` has one entry per grid point (an :class:`Outcome` or a float),
    shaped like the grid.
    """

    criterion: str
    names: tuple[str, ...]
    grids: tuple[np.ndarray, ...]
    values: np.ndarray
    argopt: tuple[float, ...]
    optimum: Any
    sense: str
    history: list = field(default_factory=list)

    def rows(self):
        import itertools

        for idx in itertools.product(*(range(len(g)) for g in self.grids)):
            yield tuple(float(g[i]) for g, i in zip(self.grids, idx)), self.values[idx]


# -- criteria ---------------------------------------------------------------


def _sieve_point(model: Model, t: float, *coords) -> float:
    return model.log_purity_after(model.sieve_state(*coords), t)


def predictability_sieve(model: Model, grid: GridSpec, t: float, map_fn=map) -> SweepResult:
    """Purity after unconditional evolution for a grid of pure initial states.

    Grid axes are the coordinates of ``model.sieve_state`` (``xi`` for the
    oscillator, ``(A, C)`` for QBM).  The optimum is located on log-purity.
    """
    f = functools.partial(_sieve_point, model, t)
    res = grid_argopt(f, grid, "max", map_fn=map_fn)
    return SweepResult(
        criterion="predictability_sieve",
        names=res.surface.names,
        grids=res.surface.grids,
        values=np.exp(res.surface.values),
        argopt=res.point,
        optimum=math.exp(res.value),
        sense="max",
        history=[(lvl, pt, math.exp(v)) for lvl, pt, v in res.history],
    )


def purification_time(
    model: Model, scheme, start: Optional[GaussianShape] = None, target: Optional[float] = None
) -> Outcome:
    """Time for conditional evolution to raise purity to ``target``.

    Defaults: the model's hot thermal start, and the half-way purity
    (0.5, or half way to the finite-temperature asymptote for the oscillator).
    """
    start = start or model.thermal_start()
    if target is None:
        target = model.purification_target(start)
    curve = model.purity_curve(start, scheme, until=(target, "up"))
    return first_crossing(curve, target, "up", xtol=model.xtol)


def efficiency_threshold_fixed_time(
    model: Model,
    family: Callable[[float], Any],
    p_thr: Optional[float] = None,
    t_thr: float = 2.5,
    start: Optional[GaussianShape] = None,
    tol: float = 1e-6,
) -> Outcome:
    """Smallest efficiency ``eta`` such that purity at ``t_thr`` reaches ``p_thr``.

    ``family(eta)`` builds the scheme for a given total efficiency.  Returns
    ``Finite(eta_thr)``, or ``NotAttainable`` if even ``eta = 1`` falls short.
    """
    start = start or model.thermal_start()
    if p_thr is None:
        p_thr = model.purification_target(start)

    def excess(eta):
        return float(model.purity_at(start, family(eta), t_thr)) - p_thr

    if excess(1.0) < 0:
        return Outcome.not_attainable()
    if excess(0.0) >= 0:
        return Outcome.finite(0.0)
    return Outcome.finite(bisect(excess, 0.0, 1.0, tol))


def _stationary_purity(model: QbmModel, eta: float, r: float, phi: float) -> float:
    try:
        return purity(model.stationary(model.scheme(eta, r, phi)))
    except qbm.NotAttainableError:
        return 0.0


def efficiency_threshold_asymptotic(
    model: QbmModel, r: float, phi: float, p_thr: float = 0.5, tol: float = 1e-6
) -> Outcome:
    """Smallest ``eta`` whose conditional stationary state has purity ``p_thr``.

    A scheme without a stationary state (y-homodyne keeps alpha = gamma = 0
    and never purifies) counts as purity 0.
    """
    if not 0 < p_thr < 1:
        raise ValueError("p_thr must lie in (0, 1)")
    if _stationary_purity(model, 1.0, r, phi) < p_thr:
        return Outcome.not_attainable()
    eta = bisect(lambda e: _stationary_purity(model, e, r, phi) - p_thr, 0.0, 1.0, tol)
    return Outcome.finite(eta)


def purity_loss_time(model: Model, scheme, target: float = 0.5, fixed_point_tol: float = 1e-12) -> Outcome:
    """Time for unconditional evolution to pull purity below ``target``,
    starting from the conditional stationary state of ``scheme``.

    ``Finite(0)`` if that state is already at or below the target;
    ``Infinite`` if purity never decreases (exact fixed point).
    """
    start = model.conditioned_state(scheme)
    p0 = purity(start)
    if p0 <= target:
        return Outcome.finite(0.0)
    curve = model.purity_curve(start, model.unconditional(scheme), until=(target, "down"))
    out = first_crossing(curve, target, "down", xtol=model.xtol)
    if out.status is Status.NOT_REACHED and float(curve(curve.horizon)) >= p0 * (1 - fixed_point_tol):
        return Outcome.infinite()
    return out


# -- sweeps -----------------------------------------------------------------

CRITERIA = {
    "purification_time": "min",
    "efficiency_threshold_fixed_time": "min",
    "efficiency_threshold_asymptotic": "min",
    "purity_loss_time": "max",
}


def _criterion_at(criterion: str, model: Model, axis: str, fixed: dict, options: dict, value: float) -> Outcome:
    params = dict(fixed)
    params[axis] = value
    if criterion == "purification_time":
        return purification_time(model, model.scheme(**params), **options)
    if criterion == "purity_loss_time":
        return purity_loss_time(model, model.scheme(**params), **options)
    if criterion == "efficiency_threshold_fixed_time":
        params.pop("eta", None)
        family = functools.partial(_scheme_with_eta, model, params)
        return efficiency_threshold_fixed_time(model, family, **options)
    if criterion == "efficiency_threshold_asymptotic":
        return efficiency_threshold_asymptotic(model, params.get("r", 1.0), params.get("phi", 0.0), **options)
    raise ValueError(f"unknown criterion {criterion!r}; expected one of {sorted(CRITERIA)}")


def _scheme_with_eta(model, params, eta):
    return model.scheme(eta=eta, **params)


def scheme_sweep(
    criterion: str,
    model: Model,
    axis: Axis,
    fixed: Optional[dict] = None,
    options: Optional[dict] = None,
    refine_levels: int = 0,
    workers: int = 1,
) -> SweepResult:
    """Evaluate ``criterion`` along one scheme parameter.

    ``axis.name`` is a keyword of ``model.scheme`` (``s`` or ``eta`` for the
    oscillator; ``phi``, ``r`` or ``eta`` for QBM); ``fixed`` supplies the
    other scheme parameters and ``options`` extra criterion arguments.
    Non-finite outcomes are kept per point; they rank as +inf.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {sorted(CRITERIA)}")
    sense = CRITERIA[criterion]
    f = functools.partial(_criterion_at, criterion, model, axis.name, fixed or {}, options or {})
    spec = GridSpec((axis,), refine_levels=refine_levels)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            res = grid_argopt(f, spec, sense, map_fn=pool.map)
    else:
        res = grid_argopt(f, spec, sense)
    objects = res.surface.objects
    k = int(np.argmin(np.abs(res.surface.grids[0] - res.point[0])))
    best = objects[k] if np.isclose(res.surface.grids[0][k], res.point[0], rtol=0, atol=0) else res.value
    return SweepResult(
        criterion=criterion,
        names=res.surface.names,
        grids=res.surface.grids,
        values=objects,
        argopt=res.point,
        optimum=best,
        sense=sense,
        history=res.history,
    )
