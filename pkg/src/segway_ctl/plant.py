"""Planar Segway: parameters, lumped constants and nonlinear equations of motion.

The rod angle ``theta`` is measured from the upright vertical and the wheel
rolls without slipping, so the wheel angle is ``x / R`` and is not stored.
The equations of motion are

    k1*xdd + k2*cos(theta)*thdd = T + k6*sin(theta)*thd**2
    k3*cos(theta)*xdd + k4*thdd = k5*sin(theta) - K*T

with ``T`` the wheel torque and ``K`` the gear coupling that applies ``-K*T``
to the rod.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .numerics import solve_linear_2x2

G_DEFAULT = 9.81


@dataclass(frozen=True)
class SegwayParams:
    m: float = 2.0  # rod mass, kg
    M: float = 3.5  # wheel mass, kg
    I_r: float = 0.02667  # rod inertia, kg m^2
    I_w: float = 0.004375  # wheel inertia, kg m^2
    l: float = 0.2  # rod centre-of-mass lever arm, m
    R: float = 0.05  # wheel radius, m
    g: float = G_DEFAULT
    K: float = 6.0  # torque coupling (gear ratio)

    def __post_init__(self):
        for name in ("m", "M", "l", "R", "g"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        for name in ("I_r", "I_w", "K"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be non-negative and finite, got {v!r}")


@dataclass(frozen=True)
class SystemConstants:
    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    k6: float

    @property
    def delta(self) -> float:
        return self.k1 * self.k4 - self.k2 * self.k3

    @property
    def R(self) -> float:
        # k2 = m*l*R and k3 = m*l
        return self.k2 / self.k3


class State(NamedTuple):
    x: float = 0.0
    v: float = 0.0
    theta: float = 0.0
    omega: float = 0.0


def derive_constants(p: SegwayParams) -> SystemConstants:
    ml = p.m * p.l
    return SystemConstants(
        k1=(p.M + p.m) * p.R + p.I_w / p.R,
        k2=ml * p.R,
        k3=ml,
        k4=p.I_r + ml * p.l,
        k5=ml * p.g,
        # centrifugal coefficient of the Lagrangian: m*l*R, same as k2
        k6=ml * p.R,
    )


def mass_matrix(c: SystemConstants, theta: float) -> tuple[tuple[float, float], tuple[float, float]]:
    ct = math.cos(theta)
    return ((c.k1, c.k2 * ct), (c.k3 * ct, c.k4))


def accelerations(c: SystemConstants, K: float, s: State, T: float) -> tuple[float, float]:
    """(xdd, thetadd) of the free nonlinear plant under wheel torque ``T``.

    det M(theta) = k1*k4 - k2*k3*cos^2(theta) >= delta > 0, so the solve
    never fails for valid constants.
    """
    st = math.sin(s.theta)
    rhs = (T + c.k6 * st * s.omega * s.omega, c.k5 * st - K * T)
    return solve_linear_2x2(mass_matrix(c, s.theta), rhs)


def clamped_acceleration(c: SystemConstants, theta_hold: float, T: float) -> float:
    """Wheel acceleration while the rider holds the rod at ``theta_hold``.

    With theta fixed and omega = 0 the first equation of motion reduces to
    k1*xdd = T; the hold angle drops out.
    """
    return T / c.k1


def mechanical_energy(c: SystemConstants, s: State) -> float:
    """Total mechanical energy, potential referenced to k5 at the upright.

    Includes the wheel/rod coupling term k3*cos(theta)*v*omega; with it the
    unforced equations of motion conserve this quantity exactly.
    """
    kinetic = (
        0.5 * (c.k1 / c.R) * s.v * s.v
        + c.k3 * math.cos(s.theta) * s.v * s.omega
        + 0.5 * c.k4 * s.omega * s.omega
    )
    return kinetic + c.k5 * math.cos(s.theta)


def input_power(c: SystemConstants, K: float, s: State, T: float) -> float:
    """Power delivered by torque ``T``: on the wheel (v/R) and, via -K*T, on the rod."""
    return T * (s.v / c.R - K * s.omega)
