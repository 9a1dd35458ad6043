"""Small-angle state-space model, transfer functions and open-loop stability.

State ordering is (x, v, theta, omega) and the single input is the wheel
torque.  Two plant sources exist: one derived from the physical parameters
and one reconstructed from the published numeric controllability matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import RealPolynomial, characteristic_polynomial, poly_roots
from .plant import SystemConstants

# Published controllability matrix [B, AB, A^2 B, A^3 B] for K = 6.
PAPER_CONTROLLABILITY = np.array(
    [
        [0.0, 4.3735, 0.0, 10.8885],
        [4.3735, 0.0, 10.8885, 0.0],
        [0.0, -2.9270, 0.0, -19.7354],
        [-2.9270, 0.0, -19.7354, 0.0],
    ]
)


class PlantSource(enum.Enum):
    DERIVED = "derived"
    PAPER = "paper"


class TFLabel(enum.Enum):
    G1 = "x/T"
    G2 = "xdot/T"
    G3 = "theta/T"
    G4 = "thetadot/T"


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    source: PlantSource
    C: np.ndarray = field(default_factory=lambda: np.eye(4))
    D: np.ndarray = field(default_factory=lambda: np.zeros(4))

    @classmethod
    def from_entries(cls, a23: float, a43: float, b2: float, b4: float, source: PlantSource) -> "StateSpace":
        A = np.zeros((4, 4))
        A[0, 1] = 1.0
        A[2, 3] = 1.0
        A[1, 2] = a23
        A[3, 2] = a43
        B = np.array([0.0, b2, 0.0, b4])
        return cls(A=A, B=B, source=source)

    @property
    def a23(self) -> float:
        return float(self.A[1, 2])

    @property
    def a43(self) -> float:
        return float(self.A[3, 2])

    @property
    def b2(self) -> float:
        return float(self.B[1])

    @property
    def b4(self) -> float:
        return float(self.B[3])

    def derivative(self, s, T: float) -> tuple[float, float, float, float]:
        """A @ s + B * T written out for the fixed sparsity pattern."""
        x, v, th, om = s
        return (v, self.a23 * th + self.b2 * T, om, self.a43 * th + self.b4 * T)


@dataclass(frozen=True)
class TransferFunction:
    numerator: RealPolynomial
    denominator: RealPolynomial
    label: TFLabel

    def zeros(self) -> list[complex]:
        if self.numerator.degree < 1:
            return []
        return poly_roots(self.numerator)

    def poles(self) -> list[complex]:
        return poly_roots(self.denominator)

    def __call__(self, s: complex) -> complex:
        return self.numerator(s) / self.denominator(s)


@dataclass(frozen=True)
class StabilityReport:
    poles: list[complex]
    zeros: dict[TFLabel, list[complex]]
    unstable: bool
    marginal: bool


def linearize(c: SystemConstants, K: float) -> StateSpace:
    """Small-angle linearisation about theta = 0.

    Solving the linearised pair for (xdd, thetadd) gives a43 = +k1*k5/delta and
    b4 = -(K*k1 + k3)/delta; the printed matrix display has both signs flipped,
    which would contradict the printed transfer functions and unstable poles.
    """
    d = c.delta
    return StateSpace.from_entries(
        a23=-c.k2 * c.k5 / d,
        a43=c.k1 * c.k5 / d,
        b2=(K * c.k2 + c.k4) / d,
        b4=-(K * c.k1 + c.k3) / d,
        source=PlantSource.DERIVED,
    )


def paper_numeric_plant() -> StateSpace:
    """Plant reconstructed from the published numeric controllability matrix.

    Column 1 is B = [0, b2, 0, b4]; column 3 is A^2 B = [0, a23*b4, 0, a43*b4].
    """
    cm = PAPER_CONTROLLABILITY
    b2, b4 = cm[1, 0], cm[3, 0]
    return StateSpace.from_entries(
        a23=cm[1, 2] / b4,
        a43=cm[3, 2] / b4,
        b2=b2,
        b4=b4,
        source=PlantSource.PAPER,
    )


def transfer_functions(ss: StateSpace) -> list[TransferFunction]:
    """G1..G4 = rows of (sI - A)^-1 B, via the Faddeev-LeVerrier adjugate.

    adj(sI - A) = sum_{k} M_k s^(n-k) where M_1 = I and
    M_{k+1} = A M_k + c_{n-k} I, so numerator i is sum_k (M_k B)_i s^(n-k).
    No pole-zero cancellation is applied; every TF keeps the common
    degree-4 denominator.
    """
    A, B = np.asarray(ss.A, float), np.asarray(ss.B, float)
    n = A.shape[0]
    char = characteristic_polynomial(A)
    num = np.zeros((n, n))  # num[i, p] = coefficient of s^p in numerator i
    mk = np.eye(n)
    for k in range(1, n + 1):
        num[:, n - k] = mk @ B
        mk = A @ mk + char.coeffs[n - k] * np.eye(n)
    # C = I, D = 0: one TF per state
    return [
        TransferFunction(RealPolynomial(_clean(num[i])), char, label)
        for i, label in enumerate(TFLabel)
    ]


def _clean(coeffs: np.ndarray) -> list[float]:
    # structurally-zero entries can pick up round-off
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    return [0.0 if abs(v) <= 1e-13 * scale else float(v) for v in coeffs]


def table_transfer_functions(c: SystemConstants, K: float) -> list[TransferFunction]:
    """G1..G4 straight from the symbolic closed forms in k1..k5 and K.

    Independent of the state-space route: every numerator and the common
    denominator s^4*delta - s^2*k1*k5 are written out, then divided by delta.
    """
    d = c.delta
    den = RealPolynomial([0.0, 0.0, -c.k1 * c.k5 / d, 0.0, 1.0])
    g1 = RealPolynomial([-c.k5 / d, 0.0, (c.k4 + K * c.k2) / d])
    g3 = RealPolynomial([0.0, 0.0, -(c.k3 + K * c.k1) / d])
    s = RealPolynomial([0.0, 1.0])
    return [
        TransferFunction(g1, den, TFLabel.G1),
        TransferFunction(g1 * s, den, TFLabel.G2),
        TransferFunction(g3, den, TFLabel.G3),
        TransferFunction(g3 * s, den, TFLabel.G4),
    ]


def classify_stability(ss: StateSpace) -> StabilityReport:
    tfs = transfer_functions(ss)
    poles = tfs[0].poles()
    unstable = any(p.real > 1e-9 for p in poles)
    marginal = not unstable and any(abs(p.real) <= 1e-9 for p in poles)
    return StabilityReport(
        poles=poles,
        zeros={tf.label: tf.zeros() for tf in tfs},
        unstable=unstable,
        marginal=marginal,
    )


def unstable_pole(c: SystemConstants) -> float:
    """sqrt(k1*k5/delta), the right-half-plane open-loop pole."""
    return math.sqrt(c.k1 * c.k5 / c.delta)
