"""Small dense numerics used by the analysis and synthesis code.

Everything here is sized for the 2x2 / 4x4 problems of a planar Segway:
Gaussian elimination with partial pivoting, Faddeev-LeVerrier for the
characteristic polynomial and Durand-Kerner for polynomial roots.  numpy
arrays are used as containers only; none of the algorithms call into
``numpy.linalg``.
"""

from __future__ import annotations

import cmath
from fractions import Fraction
import math
from typing import Iterable, Sequence

import numpy as np


class SingularMatrix(ArithmeticError):
    pass


class NoConvergence(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


class RealPolynomial:
    """Real polynomial stored with ascending-degree coefficients.

    ``RealPolynomial([c0, c1, c2])`` is ``c0 + c1*s + c2*s**2``.  Trailing
    (highest-degree) zeros are trimmed so ``degree`` is exact; the zero
    polynomial keeps a single ``0.0`` coefficient and has degree 0.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[float]):
        c = [float(v) for v in coeffs]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            c = [0.0]
        if not all(math.isfinite(v) for v in c):
            raise ValueError(f"non-finite polynomial coefficient in {c}")
        self.coeffs: tuple[float, ...] = tuple(c)

    @classmethod
    def from_descending(cls, coeffs: Iterable[float]) -> "RealPolynomial":
        """Build from highest-degree-first coefficients (``[1, 110, 54.2575, 15, 0]``)."""
        return cls(list(coeffs)[::-1])

    @classmethod
    def from_roots(cls, roots: Iterable[complex]) -> "RealPolynomial":
        """Monic polynomial with the given roots.

        Complex roots must come in conjugate pairs; the imaginary residue of
        the expansion is dropped.
        """
        c: list[complex] = [1.0 + 0j]
        for r in roots:
            r = complex(r)
            nxt = [0j] * (len(c) + 1)
            for i, ci in enumerate(c):
                nxt[i] -= r * ci
                nxt[i + 1] += ci
            c = nxt
        scale = max(abs(v) for v in c)
        for v in c:
            if abs(v.imag) > 1e-9 * scale:
                raise ValueError("complex roots must appear in conjugate pairs")
        return cls(v.real for v in c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def descending(self) -> list[float]:
        return list(self.coeffs[::-1])

    def monic(self) -> "RealPolynomial":
        if self.is_zero():
            raise ValueError("zero polynomial has no monic form")
        return RealPolynomial(c / self.leading for c in self.coeffs)

    def __call__(self, s: complex) -> complex:
        acc: complex = 0.0
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def __mul__(self, other: "RealPolynomial") -> "RealPolynomial":
        out = [0.0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return RealPolynomial(out)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RealPolynomial):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"RealPolynomial({list(self.coeffs)!r})"

    def format(self, var: str = "s", digits: int = 6) -> str:
        terms = []
        for power in range(self.degree, -1, -1):
            c = self.coeffs[power]
            if c == 0.0 and self.degree > 0:
                continue
            mag = f"{abs(c):.{digits}g}"
            if power == 0:
                body = mag
            else:
                mono = var if power == 1 else f"{var}^{power}"
                body = mono if mag == "1" else f"{mag}*{mono}"
            sign = "-" if c < 0 else "+"
            terms.append((sign, body))
        if not terms:
            return "0"
        first_sign, first = terms[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in terms[1:]:
            text += f" {sign} {body}"
        return text


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def _as_square(m, n: int | None = None) -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"expected a {n}x{n} matrix, got shape {a.shape}")
    return a


def solve_linear_2x2(m, rhs: Sequence[float]) -> tuple[float, float]:
    """Solve ``m @ u = rhs`` for a 2x2 ``m`` by Cramer's rule."""
    (a, b), (c, d) = m
    det = a * d - b * c
    if abs(det) <= 1e-12:
        raise SingularMatrix(f"2x2 determinant {det:.3e} too small")
    r0, r1 = rhs
    return ((r0 * d - b * r1) / det, (a * r1 - c * r0) / det)


def invert_4x4(m) -> np.ndarray:
    """Gauss-Jordan inverse with partial pivoting.

    Rows are scaled by their largest entry before pivot selection so the
    1e-10 singularity threshold is relative to each row's magnitude.
    """
    a = _as_square(m)
    n = a.shape[0]
    row_scale = np.max(np.abs(a), axis=1)
    if np.any(row_scale == 0.0):
        raise SingularMatrix("matrix has a zero row")
    aug = np.hstack([a / row_scale[:, None], np.diag(1.0 / row_scale)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) <= 1e-10:
            raise SingularMatrix(f"pivot {aug[piv, col]:.3e} in column {col}")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        for r in range(n):
            if r != col and aug[r, col] != 0.0:
                aug[r] -= aug[r, col] * aug[col]
    return aug[:, n:]


def rank(m, tol: float = 1e-9) -> int:
    """Count of pivots above ``tol * max|m_ij|`` under partial pivoting."""
    a = np.array(m, dtype=float)
    if a.ndim != 2:
        raise ValueError("rank needs a 2-D matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    biggest = float(np.max(np.abs(a))) if a.size else 0.0
    if biggest == 0.0:
        return 0
    thresh = tol * biggest
    rows, cols = a.shape
    r = 0
    for col in range(cols):
        if r == rows:
            break
        piv = r + int(np.argmax(np.abs(a[r:, col])))
        if abs(a[piv, col]) <= thresh:
            continue
        if piv != r:
            a[[r, piv]] = a[[piv, r]]
        a[r + 1 :] -= np.outer(a[r + 1 :, col] / a[r, col], a[r])
        r += 1
    return r


def characteristic_polynomial(m) -> RealPolynomial:
    """det(sI - m) via the Faddeev-LeVerrier recursion.

    The recursion runs exactly: the float entries are scaled to integers by a
    common power of two, and for an integer matrix every intermediate of the
    recursion is an integer.  In floats the coefficients of closed-loop
    matrices with large gains lose several digits to cancellation.
    """
    a = _as_square(m)
    if not np.all(np.isfinite(a)):
        raise ValueError("characteristic_polynomial needs finite entries")
    n = a.shape[0]
    ratios = [[float(v).as_integer_ratio() for v in row] for row in a]
    shift = max(den.bit_length() - 1 for row in ratios for _, den in row)
    q = [[num << (shift - (den.bit_length() - 1)) for num, den in row] for row in ratios]
    coeffs = [0] * (n + 1)
    coeffs[n] = 1
    mk = [[0] * n for _ in range(n)]
    for k in range(1, n + 1):
        mk = _int_matmul(q, mk)
        for i in range(n):
            mk[i][i] += coeffs[n - k + 1]
        prod = _int_matmul(q, mk)
        coeffs[n - k] = -sum(prod[i][i] for i in range(n)) // k
    # coefficient of s^j scales as 2^(-shift*(n-j))
    return RealPolynomial([_to_float(Fraction(c, 1 << (shift * (n - j)))) for j, c in enumerate(coeffs)])


def _to_float(q: Fraction) -> float:
    try:
        return float(q)
    except OverflowError:
        return math.inf if q > 0 else -math.inf


def _int_matmul(a, b):
    n = len(a)
    return [[sum(a[i][l] * b[l][j] for l in range(n)) for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------------------
# Roots and eigenvalues
# ---------------------------------------------------------------------------

_DK_MAX_ITER = 500
# Golden-angle offset keeps the starting points off any symmetry axis.
_DK_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def _durand_kerner(c: list[float]) -> list[complex]:
    """Roots of the monic polynomial with ascending coefficients ``c``."""
    n = len(c) - 1
    poly = RealPolynomial(c)
    radius = 1.0 + max(abs(v) for v in c[:-1])
    z = [radius * cmath.exp(1j * (_DK_ANGLE + 2.0 * math.pi * k / n)) for k in range(n)]
    tol = 1e-10 * max(abs(v) for v in c)
    for _ in range(_DK_MAX_ITER):
        biggest_step = 0.0
        for i in range(n):
            denom = 1.0 + 0j
            for j in range(n):
                if j != i:
                    denom *= z[i] - z[j]
            if denom == 0:
                denom = 1e-300 + 0j
            step = poly(z[i]) / denom
            z[i] -= step
            biggest_step = max(biggest_step, abs(step) / (1.0 + abs(z[i])))
        if biggest_step <= 1e-15:
            break
    # multiple roots converge only linearly and may stall short of the step
    # test; the residual is what decides success
    if max(abs(poly(r)) for r in z) <= tol:
        return z
    raise NoConvergence(f"Durand-Kerner did not converge for {poly!r}")


def _derivative(c: list[float]) -> list[float]:
    return [k * c[k] for k in range(1, len(c))] or [0.0]


def _merge_multiple_roots(c: list[float], roots: list[complex]) -> list[complex]:
    """Replace clusters of a multiple root by one polished value.

    The iteration resolves a multiplicity-m root only to about eps**(1/m).
    For each cluster of nearby estimates, Newton on the (m-1)-th derivative
    (where the root is simple) polishes the centroid; the cluster is merged
    only if p and its first m-1 derivatives then vanish, so distinct close
    roots are left alone.
    """
    n = len(roots)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(roots[i] - roots[j]) <= 1e-2 * (1.0 + abs(roots[i])):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    derivs = [list(c)]
    for _ in range(n):
        derivs.append(_derivative(derivs[-1]))

    out = list(roots)
    for members in groups.values():
        mult = len(members)
        if mult < 2:
            continue
        centre = sum(roots[i] for i in members) / mult
        f, df = RealPolynomial(derivs[mult - 1]), RealPolynomial(derivs[mult])
        for _ in range(50):
            slope = df(centre)
            if slope == 0:
                break
            step = f(centre) / slope
            centre -= step
            if abs(step) <= 1e-16 * (1.0 + abs(centre)):
                break
        ok = True
        for k in range(mult):
            scale = sum(abs(v) * abs(centre) ** p for p, v in enumerate(derivs[k])) or 1.0
            if abs(RealPolynomial(derivs[k])(centre)) > 1e-10 * scale:
                ok = False
                break
        if ok:
            for i in members:
                out[i] = centre
    return out


def _pair_conjugates(roots: list[complex]) -> list[complex]:
    out: list[complex] = []
    pending = list(roots)
    while pending:
        r = pending.pop(0)
        scale = 1.0 + abs(r)
        if abs(r.imag) <= 1e-12 * scale:
            out.append(complex(r.real, 0.0))
            continue
        j = min(range(len(pending)), key=lambda k: abs(pending[k] - r.conjugate()), default=None)
        if j is None:
            out.append(complex(r.real, 0.0))
            continue
        partner = pending.pop(j)
        re = 0.5 * (r.real + partner.real)
        im = 0.5 * (abs(r.imag) + abs(partner.imag))
        out.extend([complex(re, im), complex(re, -im)])
    return out


def poly_roots(p: RealPolynomial) -> list[complex]:
    """All complex roots of ``p``, sorted by (real, imag).

    Exact roots at the origin are factored out before iterating so that the
    s**k factors common in transfer functions come back as exact zeros.
    """
    if p.degree < 1:
        raise ValueError("poly_roots needs degree >= 1")
    if not all(math.isfinite(v) for v in p.coeffs):
        raise NoConvergence(f"non-finite coefficients {p.coeffs}")
    c = list(p.monic().coeffs)
    if not all(math.isfinite(v) for v in c):
        raise NoConvergence(f"coefficients overflow after normalising: {p.coeffs}")
    zeros = 0
    while c[0] == 0.0:
        c.pop(0)
        zeros += 1
    roots: list[complex] = [0j] * zeros
    if len(c) == 2:
        roots.append(complex(-c[0], 0.0))
    elif len(c) > 2:
        roots.extend(_pair_conjugates(_merge_multiple_roots(c, _durand_kerner(c))))
    return sorted(roots, key=lambda r: (r.real, r.imag))


def eigenvalues_4x4(m) -> list[complex]:
    return poly_roots(characteristic_polynomial(_as_square(m)))


def damping_ratio(pole: complex) -> float:
    """-Re/|p| for a pole; 1.0 for a real stable pole, 0 at the imaginary axis."""
    mag = abs(pole)
    if mag == 0.0:
        raise ValueError("damping ratio undefined at the origin")
    return -pole.real / mag
