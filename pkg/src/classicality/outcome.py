"""Result type shared by the crossing search and the classicality criteria."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional


class Status(enum.Enum):
    FINITE = "finite"
    NOT_REACHED = "not_reached"
    NOT_ATTAINABLE = "not_attainable"
    INFINITE = "infinite"


@dataclass(frozen=True)
class Outcome:
    """A time or threshold that may not exist.

    ``value`` holds the time (or efficiency) for ``FINITE`` and the search
    horizon for ``NOT_REACHED``; it is ``None`` otherwise.
    """

    status: Status
    value: Optional[float] = None

    @classmethod
    def finite(cls, value: float) -> Outcome:
        if value < 0:
            raise ValueError(f"finite outcome must be non-negative, got {value}")
        return cls(Status.FINITE, float(value))

    @classmethod
    def not_reached(cls, horizon: float) -> Outcome:
        return cls(Status.NOT_REACHED, float(horizon))

    @classmethod
    def not_attainable(cls) -> Outcome:
        return cls(Status.NOT_ATTAINABLE)

    @classmethod
    def infinite(cls) -> Outcome:
        return cls(Status.INFINITE)

    @property
    def is_finite(self) -> bool:
        return self.status is Status.FINITE

    def __float__(self) -> float:
        # Anything that is not a finite number ranks as "longer/larger than any".
        if self.status is Status.FINITE:
            return self.value
        return math.inf

    def __str__(self) -> str:
        if self.status is Status.FINITE:
            return f"{self.value:.12g}"
        if self.status is Status.NOT_REACHED:
            return f"not_reached(>{self.value:.6g})"
        return self.status.value
