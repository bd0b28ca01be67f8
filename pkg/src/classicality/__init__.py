"""Pointer states and classicality criteria for continuously monitored
Gaussian open systems: the damped oscillator and the free particle in
quantum Brownian motion."""

from .gaussian import (
    DegenerateStateError,
    GaussianShape,
    InvalidStateError,
    Moments,
    Physicality,
    classify,
    moments,
    overlap,
    purify,
    purity,
    shape_from_moments,
)
from .outcome import Outcome, Status

__version__ = "0.1.0"

__all__ = [
    "DegenerateStateError",
    "GaussianShape",
    "InvalidStateError",
    "Moments",
    "Outcome",
    "Physicality",
    "Status",
    "classify",
    "moments",
    "overlap",
    "purify",
    "purity",
    "shape_from_moments",
]
