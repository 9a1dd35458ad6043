"""Controllability and pole placement through the controllable canonical form.

Gains act as ``u = gains . (desired - state)``, i.e. ``u = -gains . x`` when
regulating to the origin, so the closed-loop matrix is ``A - B gains``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .linearization import StateSpace, paper_numeric_plant
from .numerics import (
    RealPolynomial,
    characteristic_polynomial,
    eigenvalues_4x4,
    invert_4x4,
    poly_roots,
    rank,
)


class Uncontrollable(ValueError):
    pass


class VerificationFailed(ArithmeticError):
    pass


class GainVector(NamedTuple):
    kp_x: float
    kd_x: float
    kp_t: float
    kd_t: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    def dot(self, e: Sequence[float]) -> float:
        return self.kp_x * e[0] + self.kd_x * e[1] + self.kp_t * e[2] + self.kd_t * e[3]


# Printed gain vectors for the two operating modes.
PAPER_GAINS_MODE1 = GainVector(0.0, -0.8064, -21.5634, -38.7861)
PAPER_GAINS_MODE2 = GainVector(-0.4839, -1.6129, -13.7056, -7.5347)
# Mode 1 is specified by its closed-loop characteristic polynomial, mode 2 by
# its canonical-coordinate gains.
MODE1_DESIRED = RealPolynomial.from_descending([1.0, 110.0, 54.2575, 15.0, 0.0])
MODE2_KCANON = (9.0, 30.0, 38.0, 15.0)


@dataclass(frozen=True)
class PolePlacementResult:
    k_canon: np.ndarray
    gains: GainVector
    desired_char: RealPolynomial
    achieved_poles: list[complex]
    max_pole_error: float


@dataclass(frozen=True)
class ClosedLoopCheck:
    poles: list[complex]
    stable: bool
    marginal: bool
    char: RealPolynomial


def controllability_matrix(ss: StateSpace) -> np.ndarray:
    """Columns [B, AB, A^2 B, A^3 B]."""
    return _controllability(np.asarray(ss.A, float), np.asarray(ss.B, float))


def _controllability(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    cols = [B]
    for _ in range(A.shape[0] - 1):
        cols.append(A @ cols[-1])
    return np.column_stack(cols)


def canonical_form(char: RealPolynomial) -> tuple[np.ndarray, np.ndarray]:
    """Companion pair whose last row is [-a4, -a3, -a2, -a1], B = e4."""
    if char.degree != 4 or char.leading != 1.0:
        raise ValueError(f"expected a monic quartic, got {char!r}")
    A = np.zeros((4, 4))
    A[:3, 1:] = np.eye(3)
    A[3, :] = [-c for c in char.coeffs[:4]]
    return A, np.array([0.0, 0.0, 0.0, 1.0])


def _as_desired(desired) -> RealPolynomial:
    if isinstance(desired, RealPolynomial):
        poly = desired
    else:
        poly = RealPolynomial.from_roots(desired)
    if poly.degree != 4:
        raise ValueError(f"desired characteristic polynomial must be quartic, got degree {poly.degree}")
    return poly.monic()


def desired_from_kcanon(ss: StateSpace, k_canon: Sequence[float]) -> RealPolynomial:
    """Invert the coefficient comparison: alpha = k_canon + a, lowest order first."""
    a = characteristic_polynomial(ss.A).coeffs
    return RealPolynomial([k + ai for k, ai in zip(k_canon, a[:4])] + [1.0])


def _max_pole_error(desired: list[complex], achieved: list[complex]) -> float:
    return max(min(abs(d - a) for a in achieved) for d in desired)


def place_poles(ss: StateSpace, desired) -> PolePlacementResult:
    """Gains placing the eigenvalues of A - B gains at ``desired``.

    ``desired`` is either a monic quartic or a list of four poles (complex
    ones in conjugate pairs).  In canonical coordinates the gain is the
    coefficient difference alpha - a; it is mapped back to the physical state
    with gains = k_canon Cx Cz^-1, Cx and Cz being the controllability matrices
    of the canonical pair and of ``ss``.
    """
    target = _as_desired(desired)
    cz = controllability_matrix(ss)
    if rank(cz) < 4:
        raise Uncontrollable(f"controllability matrix has rank {rank(cz)}")
    char = characteristic_polynomial(ss.A)
    k_canon = np.array([target.coeffs[i] - char.coeffs[i] for i in range(4)])
    ac, bc = canonical_form(char)
    cx = _controllability(ac, bc)
    gains = GainVector(*(float(g) for g in k_canon @ cx @ invert_4x4(cz)))

    achieved = verify_closed_loop(ss, gains).poles
    err = _max_pole_error(poly_roots(target), achieved)
    # relative to pole magnitude so fast poles are not held to an absolute bound
    scale = max(1.0, max(abs(p) for p in achieved))
    if err > 1e-6 * scale:
        raise VerificationFailed(f"placed poles miss the targets by {err:.3e}")
    return PolePlacementResult(
        k_canon=k_canon,
        gains=gains,
        desired_char=target,
        achieved_poles=achieved,
        max_pole_error=err,
    )


def closed_loop_matrix(ss: StateSpace, gains: Sequence[float]) -> np.ndarray:
    return np.asarray(ss.A, float) - np.outer(ss.B, np.asarray(gains, float))


def verify_closed_loop(ss: StateSpace, gains: Sequence[float]) -> ClosedLoopCheck:
    acl = closed_loop_matrix(ss, gains)
    poles = eigenvalues_4x4(acl)
    stable = all(p.real < -1e-9 for p in poles)
    marginal = not any(p.real > 1e-9 for p in poles) and not stable
    return ClosedLoopCheck(poles=poles, stable=stable, marginal=marginal, char=characteristic_polynomial(acl))


def mode2_desired() -> RealPolynomial:
    """Mode-2 target s^4 + 15 s^3 + 31.2575 s^2 + 30 s + 9 (k_canon on the numeric plant)."""
    return desired_from_kcanon(paper_numeric_plant(), MODE2_KCANON)


def synthesize_mode_gains(ss: StateSpace) -> tuple[PolePlacementResult, PolePlacementResult]:
    """Both operating-mode designs placed on ``ss``.

    The closed-loop targets are the same polynomials for every plant, so a
    derived plant gets gains with the same pole pattern as the numeric one.
    """
    return place_poles(ss, MODE1_DESIRED), place_poles(ss, mode2_desired())
