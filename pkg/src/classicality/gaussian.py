"""Zero-mean Gaussian Wigner states.

A state is stored through the coefficients of its Wigner exponent,

    W(x, p) ~ exp(-alpha x^2 - beta p^2 - 2 gamma x p),

so the quadratic-form matrix is ``M = [[alpha, gamma], [gamma, beta]]`` and
the covariance matrix is ``(2 M)^-1`` (hbar = 1).  With this normalisation
the purity is ``sqrt(det M)`` and a pure state has ``det M = 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

#: Tolerance used by every physicality check in the package.
EPS_PHYS = 1e-9


class InvalidStateError(ValueError):
    """Raised when a shape violates the Gaussian ansatz invariants."""


class DegenerateStateError(InvalidStateError):
    """Raised when an operation needs ``det > 0`` and does not get it."""


@dataclass(frozen=True)
class GaussianShape:
    alpha: float
    beta: float
    gamma: float = 0.0

    @property
    def det(self) -> float:
        return self.alpha * self.beta - self.gamma * self.gamma

    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, self.gamma], [self.gamma, self.beta]])

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)

    def scaled(self, factor: float) -> GaussianShape:
        return GaussianShape(self.alpha * factor, self.beta * factor, self.gamma * factor)


@dataclass(frozen=True)
class Moments:
    """Second moments: dispersions ``dx``, ``dp`` and symmetrised covariance ``cxp``."""

    dx: float
    dp: float
    cxp: float


class Physicality(enum.Enum):
    PROPER_PURE = "proper_pure"
    PROPER_MIXED = "proper_mixed"
    DEGENERATE = "degenerate"
    UNPHYSICAL = "unphysical"


def _as_shape(shape) -> GaussianShape:
    if isinstance(shape, GaussianShape):
        return shape
    return GaussianShape(*map(float, shape))


def _require_positive_det(shape: GaussianShape) -> float:
    det = shape.det
    if not det > 0.0:
        raise DegenerateStateError(f"degenerate Gaussian (det={det!r})")
    return det


def purity(shape) -> float:
    """Purity ``Tr rho^2 = sqrt(alpha beta - gamma^2)``.

    Round-off negatives down to ``-EPS_PHYS`` are clamped to zero.
    """
    shape = _as_shape(shape)
    det = shape.det
    if det < -EPS_PHYS:
        raise InvalidStateError(f"negative discriminant det={det!r}")
    return math.sqrt(max(det, 0.0))


def moments(shape) -> Moments:
    shape = _as_shape(shape)
    det = _require_positive_det(shape)
    return Moments(
        dx=math.sqrt(shape.beta / (2.0 * det)),
        dp=math.sqrt(shape.alpha / (2.0 * det)),
        cxp=-shape.gamma / (2.0 * det),
    )


def shape_from_moments(m: Moments) -> GaussianShape:
    """Inverse of :func:`moments`."""
    var_x, var_p = m.dx * m.dx, m.dp * m.dp
    cov_det = var_x * var_p - m.cxp * m.cxp
    if not cov_det > 0.0:
        raise DegenerateStateError(f"singular covariance (det={cov_det!r})")
    # M = (2 Sigma)^-1
    scale = 1.0 / (2.0 * cov_det)
    return GaussianShape(var_p * scale, var_x * scale, -m.cxp * scale)


def purify(shape) -> GaussianShape:
    """Rescale to ``det = 1``, keeping the dispersion ratios and the tilt."""
    shape = _as_shape(shape)
    det = _require_positive_det(shape)
    return shape.scaled(1.0 / math.sqrt(det))


def overlap(a, b, purified: bool = True) -> float:
    """Overlap between two Gaussian states.

    With ``purified=True`` (default) both states are first det-normalised and
    the pure-state modulus ``|<psi_a|psi_b>|`` is returned.  For two pure
    states ``|<a|b>|^2 = 2 pi int W_a W_b = 2 / sqrt(det(M_a + M_b))``.

    With ``purified=False`` the normalised Hilbert-Schmidt overlap
    ``Tr(rho_a rho_b) / sqrt(P_a P_b)`` of the mixed states is returned
    instead.
    """
    a, b = _as_shape(a), _as_shape(b)
    if purified:
        ma, mb = purify(a).matrix(), purify(b).matrix()
        value = math.sqrt(2.0 / math.sqrt(np.linalg.det(ma + mb)))
    else:
        det_a, det_b = _require_positive_det(a), _require_positive_det(b)
        # Tr(rho_a rho_b) = 2 sqrt(det_a det_b) / sqrt(det(M_a + M_b))
        tr_ab = 2.0 * math.sqrt(det_a * det_b) / math.sqrt(np.linalg.det(a.matrix() + b.matrix()))
        value = tr_ab / math.sqrt(math.sqrt(det_a) * math.sqrt(det_b))
    return min(value, 1.0)


def classify(shape, eps: float = EPS_PHYS) -> Physicality:
    shape = _as_shape(shape)
    det = shape.det
    if shape.alpha < -eps or shape.beta < -eps or det < -eps or det > 1.0 + eps:
        return Physicality.UNPHYSICAL
    if det <= eps or shape.alpha <= eps:
        return Physicality.DEGENERATE
    if abs(det - 1.0) <= eps:
        return Physicality.PROPER_PURE
    return Physicality.PROPER_MIXED
