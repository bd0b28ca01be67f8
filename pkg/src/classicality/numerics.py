"""Deterministic numerical services: adaptive integration, root bracketing,
crossing detection on dense trajectories, grid optimisation and a damped
Newton polish for fixed points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.integrate import RK45, OdeSolution

from .outcome import Outcome


class StepUnderflow(RuntimeError):
    def __init__(self, t_reached: float, detail: str = ""):
        self.t_reached = t_reached
        msg = f"step size underflow at t={t_reached:.6g}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class NoSignChange(ValueError):
    pass


class NewtonFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = math.inf
    t_max: float = 50.0

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.h_min <= self.h_init <= self.h_max:
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if self.t_max < 0:
            raise ValueError("t_max must be non-negative")


@dataclass(frozen=True)
class Curve:
    """Scalar function of time with knot points (the integrator's accepted steps).

    ``func`` must accept a numpy array of times.  Between consecutive knots
    the function is assumed to cross any level at most once.
    """

    knots: np.ndarray
    func: Callable[[np.ndarray], np.ndarray]

    @property
    def horizon(self) -> float:
        return float(self.knots[-1])

    def __call__(self, t):
        return self.func(t)


class Trajectory:
    """Dense output of :func:`integrate`.

    Calling the trajectory with a scalar time returns the state vector; with
    an array of times it returns an array of shape ``(n_dim, n_times)``.
    """

    def __init__(self, t: np.ndarray, y: np.ndarray, solution: Optional[OdeSolution], stopped: bool = False):
        self.t = t
        self.y = y
        self._solution = solution
        self.stopped = stopped

    @property
    def t_reached(self) -> float:
        return float(self.t[-1])

    @property
    def final(self) -> np.ndarray:
        return self.y[:, -1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self._solution is None:
            out = np.repeat(self.y[:, :1], t.size, axis=1)
            return out[:, 0] if t.ndim == 0 else out
        return self._solution(t)

    def curve(self, fn: Callable[[np.ndarray], np.ndarray]) -> Curve:
        """Curve of ``fn(state)``; ``fn`` receives states of shape ``(n_dim, m)``."""
        def func(t):
            t = np.asarray(t, dtype=float)
            return np.asarray(fn(self(np.atleast_1d(t)))).reshape(t.shape)

        return Curve(self.t, func)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
    t0: float = 0.0,
    stop: Optional[Callable[[float, np.ndarray], bool]] = None,
) -> Trajectory:
    """Integrate ``dy/dt = rhs(t, y)`` from ``t0`` to ``t0 + cfg.t_max``.

    Uses the Dormand-Prince 5(4) pair with 4th-order dense output.  ``stop``
    is checked after every accepted step; returning True ends the integration
    early (``Trajectory.stopped`` is then set).

    Raises
    ------
    StepUnderflow
        If the accepted step falls below ``cfg.h_min`` or the step-size
        control fails.
    """
    y0 = np.asarray(y0, dtype=float)
    t_end = t0 + cfg.t_max
    if cfg.t_max == 0:
        return Trajectory(np.array([t0]), y0[:, None].copy(), None)

    solver = RK45(
        rhs, t0, y0, t_end,
        rtol=cfg.rtol, atol=cfg.atol,
        first_step=min(cfg.h_init, cfg.t_max), max_step=cfg.h_max,
    )
    ts, ys, interpolants = [t0], [y0.copy()], []
    stopped = False
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise StepUnderflow(solver.t, message or "")
        if not np.all(np.isfinite(solver.y)):
            raise StepUnderflow(solver.t, "non-finite state")
        ts.append(solver.t)
        ys.append(solver.y.copy())
        interpolants.append(solver.dense_output())
        # the last step is clipped to hit t_end, so only check running steps
        if solver.status == "running" and solver.step_size < cfg.h_min:
            raise StepUnderflow(solver.t, f"h={solver.step_size:.3g} < h_min")
        if stop is not None and stop(solver.t, solver.y):
            stopped = True
            break
    ts_arr = np.array(ts)
    return Trajectory(ts_arr, np.array(ys).T, OdeSolution(ts_arr, interpolants), stopped)


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6) -> float:
    """Root of ``f`` on ``[lo, hi]`` to a bracket width ``tol``."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoSignChange(f"f({lo})={f_lo:.3g} and f({hi})={f_hi:.3g} have the same sign")
    return optimize.bisect(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)


def first_crossing(curve: Curve, level: float, direction: str = "up", xtol: float = 1e-8) -> Outcome:
    """First time ``curve`` reaches ``level`` from below (``"up"``) or above (``"down"``).

    A curve that already sits at or beyond the level at its first knot gives
    ``Finite(t0)``; one that never reaches it gives ``NotReached(horizon)``.
    """
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', not {direction!r}")
    sign = 1.0 if direction == "up" else -1.0
    knots = curve.knots
    excess = sign * (np.asarray(curve(knots), dtype=float) - level)
    hits = np.flatnonzero(excess >= 0)
    if hits.size == 0:
        return Outcome.not_reached(curve.horizon)
    i = int(hits[0])
    if i == 0 or excess[i] == 0:
        return Outcome.finite(knots[i])
    a, b = float(knots[i - 1]), float(knots[i])
    root = optimize.brentq(lambda t: float(curve(t)) - level, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return Outcome.finite(root)


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"axis {self.name!r} needs at least 2 points")
        if not self.lo < self.hi:
            raise ValueError(f"axis {self.name!r} needs lo < hi")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class GridSpec:
    axes: tuple[Axis, ...]
    refine_levels: int = 0
    zoom: float = 5.0
    # points per axis on refinement passes; defaults to the coarse count
    refine_count: Optional[int] = None


@dataclass
class Surface:
    names: tuple[str, ...]
    grids: tuple[np.ndarray, ...]
    values: np.ndarray
    objects: Optional[np.ndarray] = None

    def rows(self) -> Iterable[tuple]:
        for idx in itertools.product(*(range(len(g)) for g in self.grids)):
            yield tuple(float(g[i]) for g, i in zip(self.grids, idx)) + (float(self.values[idx]),)


@dataclass
class ArgoptResult:
    point: tuple[float, ...]
    value: float
    surface: Surface
    history: list = field(default_factory=list)


class _Unpack:
    """Picklable ``point -> f(*point)`` adapter (process pools cannot ship lambdas)."""

    def __init__(self, f):
        self.f = f

    def __call__(self, point):
        return self.f(*point)


def _scan(f, grids, sense, map_fn):
    points = list(itertools.product(*grids))
    shape = tuple(len(g) for g in grids)
    raw = list(map_fn(_Unpack(f), points))
    flat = np.array([float(v) for v in raw], dtype=float)
    ranked = np.where(np.isnan(flat), -np.inf if sense == "max" else np.inf, flat)
    # argmax/argmin take the first occurrence: lexicographically smallest point
    k = int(np.argmax(ranked) if sense == "max" else np.argmin(ranked))
    objects = np.empty(len(raw), dtype=object)
    objects[:] = raw
    return flat.reshape(shape), objects.reshape(shape), points[k], float(ranked[k])


def grid_argopt(f: Callable[..., float], spec: GridSpec, sense: str = "max", map_fn=map) -> ArgoptResult:
    """Grid scan followed by ``spec.refine_levels`` local zoom passes.

    ``f`` is called with one positional argument per axis and may return
    anything convertible with ``float`` (NaN ranks worst); the raw returns of
    the coarse scan are kept in ``surface.objects``.  Each refinement
    pass shrinks the window by ``spec.zoom`` around the incumbent (clipped to
    the original bounds); the incumbent only changes on strict improvement.
    """
    if sense not in ("max", "min"):
        raise ValueError(f"sense must be 'max' or 'min', not {sense!r}")
    better = (lambda a, b: a > b) if sense == "max" else (lambda a, b: a < b)

    grids = tuple(ax.values() for ax in spec.axes)
    values, objects, best_point, best_value = _scan(f, grids, sense, map_fn)
    surface = Surface(tuple(ax.name for ax in spec.axes), grids, values, objects)
    history = [(0, best_point, best_value)]

    for level in range(1, spec.refine_levels + 1):
        local = []
        for ax, x in zip(spec.axes, best_point):
            half = 0.5 * (ax.hi - ax.lo) / spec.zoom**level
            lo, hi = x - half, x + half
            if lo < ax.lo:
                lo, hi = ax.lo, ax.lo + 2 * half
            if hi > ax.hi:
                lo, hi = ax.hi - 2 * half, ax.hi
            local.append(np.linspace(lo, hi, spec.refine_count or ax.count))
        _, _, point, value = _scan(f, local, sense, map_fn)
        if better(value, best_value):
            best_point, best_value = point, value
        history.append((level, best_point, best_value))

    return ArgoptResult(tuple(float(x) for x in best_point), best_value, surface, history)


def newton_polish(
    fun: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    tol: float = 1e-12,
    max_iter: int = 50,
    fd_step: float = 1e-6,
) -> np.ndarray:
    """Damped Newton iteration for ``fun(x) = 0`` with a forward-difference Jacobian.

    Steps are halved until the residual norm decreases.  Stops when the
    residual norm is at most ``tol``; if it stalls above ``tol`` the best
    iterate is returned, and :class:`NewtonFailure` is raised only when the
    Jacobian is singular at the start.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(fun(x), dtype=float)
    norm = np.linalg.norm(r)
    n = x.size
    for it in range(max_iter):
        if norm <= tol:
            break
        jac = np.empty((n, n))
        for j in range(n):
            h = fd_step * max(abs(x[j]), 1.0)
            xh = x.copy()
            xh[j] += h
            jac[:, j] = (np.asarray(fun(xh)) - r) / h
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            if it == 0:
                raise NewtonFailure("singular Jacobian") from exc
            break
        lam = 1.0
        while lam > 1e-6:
            trial = x + lam * step
            r_trial = np.asarray(fun(trial), dtype=float)
            n_trial = np.linalg.norm(r_trial)
            if np.isfinite(n_trial) and n_trial < norm:
                x, r, norm = trial, r_trial, n_trial
                break
            lam *= 0.5
        else:
            break
    return x
