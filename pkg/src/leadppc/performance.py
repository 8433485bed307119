"""Per-edge prescribed-performance funnels.

A funnel ``rho(t) = (rho0 - rho_inf) exp(-l t) + rho_inf`` bounds the relative
state of an edge. The modulated error ``x_hat = xbar / rho`` must stay inside
an open region, ``(-M, 1)`` or ``(-1, M)`` depending on the sign of the initial
error, and is mapped onto the real line by a logarithmic transformation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class OutOfFunnel(ValueError):
    """A modulated error left its open performance region."""

    def __init__(self, message: str, edge: int | None = None):
        super().__init__(message)
        self.edge = edge


@dataclass(frozen=True)
class PerformanceSpec:
    rho0: float
    rho_inf: float
    l: float
    M: float = 1.0

    def __post_init__(self):
        if not self.rho0 > self.rho_inf > 0:
            raise ValueError(f"need rho0 > rho_inf > 0, got {self.rho0}, {self.rho_inf}")
        if self.l < 0:
            raise ValueError(f"decay rate must be nonnegative, got {self.l}")
        if self.M <= 0:
            raise ValueError(f"overshoot factor M must be positive, got {self.M}")


def rho(spec: PerformanceSpec, t):
    return (spec.rho0 - spec.rho_inf) * np.exp(-spec.l * np.asarray(t, dtype=float)) + spec.rho_inf


def rho_dot(spec: PerformanceSpec, t):
    return -spec.l * (spec.rho0 - spec.rho_inf) * np.exp(-spec.l * np.asarray(t, dtype=float))


def alpha(spec: PerformanceSpec, t):
    """Normalized decay ``-rho'(t) / rho(t)``; lies in ``[0, l)``."""
    return -rho_dot(spec, t) / rho(spec, t)


def select_region(x0: float, M: float) -> tuple[float, float]:
    # x0 == 0 takes the positive-sign region; identical to the other one when M == 1
    if x0 < 0:
        return -1.0, float(M)
    return -float(M), 1.0


@dataclass(frozen=True)
class EdgeChannel:
    """Funnel, region and gain of a single edge.

    ``t_offset`` shifts the log transformation so that it vanishes at 0 for
    every overshoot factor ``M``.
    """

    spec: PerformanceSpec
    region_lo: float
    region_hi: float
    g: float = 1.0

    def __post_init__(self):
        if not self.region_lo < 0 < self.region_hi:
            raise ValueError(f"region must contain 0, got ({self.region_lo}, {self.region_hi})")
        if self.g <= 0:
            raise ValueError(f"gain must be positive, got {self.g}")

    @property
    def t_offset(self) -> float:
        return math.log(-self.region_lo / self.region_hi)

    @classmethod
    def for_initial(cls, spec: PerformanceSpec, xbar0: float, g: float = 1.0) -> "EdgeChannel":
        lo, hi = select_region(xbar0, spec.M)
        return cls(spec, lo, hi, g)

    def inside(self, x_hat) -> np.ndarray | bool:
        return (self.region_lo < x_hat) & (x_hat < self.region_hi)

    def bounds(self, t):
        """Lower and upper funnel bounds on the relative state at time ``t``."""
        r = rho(self.spec, t)
        return self.region_lo * r, self.region_hi * r


def _check_inside(ch: EdgeChannel, x_hat: float) -> None:
    if not ch.region_lo < x_hat < ch.region_hi:
        raise OutOfFunnel(
            f"modulated error {x_hat!r} outside ({ch.region_lo}, {ch.region_hi})"
        )


def transform(ch: EdgeChannel, x_hat: float) -> float:
    """Strictly increasing bijection from the region onto the reals, zero at 0."""
    _check_inside(ch, x_hat)
    return math.log((x_hat - ch.region_lo) / (ch.region_hi - x_hat)) - ch.t_offset


def transform_derivative(ch: EdgeChannel, x_hat: float) -> float:
    _check_inside(ch, x_hat)
    return 1.0 / (x_hat - ch.region_lo) + 1.0 / (ch.region_hi - x_hat)


def jacobian(ch: EdgeChannel, x_hat: float, t: float) -> float:
    """Derivative of :func:`transform` scaled by ``1 / rho(t)``."""
    return transform_derivative(ch, x_hat) / float(rho(ch.spec, t))


def inverse_transform(ch: EdgeChannel, eps: float) -> float:
    """Inverse of :func:`transform`; maps any real back into the open region."""
    z = math.exp(eps + ch.t_offset)
    return (ch.region_lo + ch.region_hi * z) / (1.0 + z)
