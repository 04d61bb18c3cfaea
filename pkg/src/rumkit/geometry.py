"""Planar vectors, bases, lines through the origin and line figures.

Vectors are plain ``numpy`` arrays of shape ``(2,)``.  A line through the
origin is stored by its angle in ``[0, pi)`` together with the matching unit
direction, which handles vertical lines without special cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateBasisError, ValidationError

TOL_ANGLE = 1e-9
DET_TOL = 1e-12
RATIONAL_DENOMINATOR_BOUND = 64
RATIONAL_RESIDUAL = 1e-9


def vec(x, y=None) -> np.ndarray:
    """Coerce ``(x, y)`` or a length-2 sequence into a float vector."""
    if y is None:
        v = np.asarray(x, dtype=float).reshape(2)
    else:
        v = np.array([x, y], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValidationError("vector entries must be finite")
    return v


def rot90(v) -> np.ndarray:
    """Counter-clockwise quarter turn."""
    v = np.asarray(v)
    return np.array([-v[1], v[0]], dtype=v.dtype if np.iscomplexobj(v) else float)


def cross2(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


@dataclass(frozen=True, eq=False)
class Basis2:
    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        a1, a2 = vec(self.a1), vec(self.a2)
        if abs(cross2(a1, a2)) <= DET_TOL:
            raise DegenerateBasisError()
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)

    @classmethod
    def standard(cls) -> "Basis2":
        return cls((1.0, 0.0), (0.0, 1.0))

    @property
    def matrix(self) -> np.ndarray:
        """Columns are the basis vectors."""
        return np.column_stack([self.a1, self.a2])

    @property
    def det(self) -> float:
        return cross2(self.a1, self.a2)

    def point(self, s1, s2) -> np.ndarray:
        return s1 * self.a1 + s2 * self.a2

    def dual(self) -> "Basis2":
        """Reciprocal basis ``b`` with ``<a_i, b_j> = delta_ij``."""
        inv = np.linalg.inv(self.matrix)
        return Basis2(inv[0], inv[1])

    def scaled(self, k1: int, k2: int) -> "Basis2":
        return Basis2(k1 * self.a1, k2 * self.a2)

    def __eq__(self, other):
        if not isinstance(other, Basis2):
            return NotImplemented
        return bool(np.array_equal(self.a1, other.a1) and np.array_equal(self.a2, other.a2))

    __hash__ = None

    def __repr__(self):
        return f"Basis2(a1={self.a1.tolist()}, a2={self.a2.tolist()})"


def coefficients_in_basis(v, a: Basis2) -> tuple[float, float]:
    """Return ``(s1, s2)`` with ``s1*a1 + s2*a2 = v``."""
    if abs(a.det) <= DET_TOL:
        raise DegenerateBasisError()
    s = np.linalg.solve(a.matrix, vec(v))
    return float(s[0]), float(s[1])


def _normalize_angle(theta: float) -> float:
    theta = math.fmod(theta, math.pi)
    if theta < 0:
        theta += math.pi
    if theta >= math.pi - TOL_ANGLE * 1e-3:
        theta = 0.0
    return theta + 0.0  # no negative zero


def angle_distance(t1: float, t2: float) -> float:
    """Distance between two line angles, modulo pi."""
    d = abs(t1 - t2) % math.pi
    return min(d, math.pi - d)


@dataclass(frozen=True, eq=False)
class ProjLine:
    """A line through the origin."""

    direction: np.ndarray
    angle: float = field(init=False)

    def __post_init__(self):
        d = vec(self.direction)
        n = math.hypot(d[0], d[1])
        if n == 0.0:
            raise ValidationError("line direction must be nonzero")
        d = d / n
        theta = _normalize_angle(math.atan2(d[1], d[0]))
        # flip so the stored direction agrees with the stored angle
        if d[1] < 0 or (d[1] == 0 and d[0] < 0):
            d = -d
        if theta == 0.0 and d[0] < 0:
            d = -d
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "angle", theta)

    @classmethod
    def from_angle(cls, theta: float) -> "ProjLine":
        return cls((math.cos(theta), math.sin(theta)))

    def distance(self, other: "ProjLine") -> float:
        return angle_distance(self.angle, other.angle)

    def close_to(self, other: "ProjLine", tol: float = TOL_ANGLE) -> bool:
        return self.distance(other) < tol

    def __eq__(self, other):
        if not isinstance(other, ProjLine):
            return NotImplemented
        return self.close_to(other)

    __hash__ = None

    def normal(self) -> np.ndarray:
        return rot90(self.direction)

    def distance_to_point(self, p) -> float:
        return abs(float(np.dot(self.normal(), p)))

    def slope_vector(self, max_den: int = RATIONAL_DENOMINATOR_BOUND,
                     tol: float = RATIONAL_RESIDUAL):
        return rational_direction(self.direction, max_den, tol)

    def __repr__(self):
        return f"ProjLine(angle={self.angle!r})"


def rational_direction(d, max_den: int = RATIONAL_DENOMINATOR_BOUND,
                       tol: float = RATIONAL_RESIDUAL):
    """Integer vector ``(i, j)`` parallel to ``d`` with small entries, or None.

    Uses a bounded continued-fraction approximation of the slope (or of the
    inverse slope for steep lines).
    """
    dx, dy = float(d[0]), float(d[1])
    if abs(dx) >= abs(dy):
        r = dy / dx
        f = Fraction(r).limit_denominator(max_den)
        if abs(r - f) > tol:
            return None
        i, j = f.denominator, f.numerator
    else:
        r = dx / dy
        f = Fraction(r).limit_denominator(max_den)
        if abs(r - f) > tol:
            return None
        i, j = f.numerator, f.denominator
    if abs(i) > max_den or abs(j) > max_den:
        return None
    return int(i), int(j)


class LineFigure:
    """A finite set of lines through the origin, without duplicates."""

    def __init__(self, lines: Iterable = (), tol: float = TOL_ANGLE):
        kept: list[ProjLine] = []
        for line in lines:
            if not isinstance(line, ProjLine):
                line = ProjLine(line)
            if not any(line.close_to(k, tol) for k in kept):
                kept.append(line)
        kept.sort(key=lambda ln: ln.angle)
        self._lines = tuple(kept)
        self.tol = tol

    @property
    def lines(self) -> tuple[ProjLine, ...]:
        return self._lines

    @property
    def angles(self) -> np.ndarray:
        return np.array([ln.angle for ln in self._lines])

    def __len__(self):
        return len(self._lines)

    def __iter__(self):
        return iter(self._lines)

    def __contains__(self, line) -> bool:
        if not isinstance(line, ProjLine):
            line = ProjLine(line)
        return any(line.close_to(k, self.tol) for k in self._lines)

    def same_as(self, other: "LineFigure", tol: float = TOL_ANGLE) -> bool:
        if len(self) != len(other):
            return False
        return all(any(a.close_to(b, tol) for b in other) for a in self) and all(
            any(b.close_to(a, tol) for a in self) for b in other)

    def max_mismatch(self, other: "LineFigure") -> float:
        """Largest angle from a line of either figure to the other figure."""
        if not len(self) or not len(other):
            return math.inf
        d1 = max(min(a.distance(b) for b in other) for a in self)
        d2 = max(min(b.distance(a) for a in self) for b in other)
        return max(d1, d2)

    def __eq__(self, other):
        if not isinstance(other, LineFigure):
            return NotImplemented
        return self.same_as(other, min(self.tol, other.tol))

    __hash__ = None

    def __repr__(self):
        return f"LineFigure(angles={[round(a, 12) for a in self.angles]})"


@dataclass(frozen=True)
class IntegralMatrix2:
    """2x2 matrix ``[[alpha1, beta1], [alpha2, beta2]]`` with rational entries.

    Rows describe a new basis in terms of an old one:
    ``a1* = alpha1 a1 + beta1 a2`` and ``a2* = alpha2 a1 + beta2 a2``.
    """

    alpha1: Fraction
    beta1: Fraction
    alpha2: Fraction
    beta2: Fraction

    def __post_init__(self):
        for name in ("alpha1", "beta1", "alpha2", "beta2"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.det == 0:
            raise ValidationError("singular change-of-basis matrix")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "IntegralMatrix2":
        (a1, b1), (a2, b2) = rows
        return cls(a1, b1, a2, b2)

    @classmethod
    def identity(cls) -> "IntegralMatrix2":
        return cls(1, 0, 0, 1)

    @property
    def det(self) -> Fraction:
        return self.alpha1 * self.beta2 - self.beta1 * self.alpha2

    @property
    def is_integral(self) -> bool:
        return all(x.denominator == 1 for x in
                   (self.alpha1, self.beta1, self.alpha2, self.beta2))

    @property
    def is_unimodular(self) -> bool:
        return self.is_integral and abs(self.det) == 1

    def as_array(self) -> np.ndarray:
        return np.array([[float(self.alpha1), float(self.beta1)],
                         [float(self.alpha2), float(self.beta2)]])

    def rows(self) -> list[list[int]]:
        return [[int(self.alpha1), int(self.beta1)], [int(self.alpha2), int(self.beta2)]]

    def __matmul__(self, other: "IntegralMatrix2") -> "IntegralMatrix2":
        a = self
        b = other
        return IntegralMatrix2(
            a.alpha1 * b.alpha1 + a.beta1 * b.alpha2,
            a.alpha1 * b.beta1 + a.beta1 * b.beta2,
            a.alpha2 * b.alpha1 + a.beta2 * b.alpha2,
            a.alpha2 * b.beta1 + a.beta2 * b.beta2,
        )

    def apply(self, w) -> np.ndarray:
        return self.as_array() @ np.asarray(w, dtype=float)

    def apply_to_basis(self, a: Basis2) -> Basis2:
        m = self.as_array()
        return Basis2(m[0, 0] * a.a1 + m[0, 1] * a.a2, m[1, 0] * a.a1 + m[1, 1] * a.a2)


def reciprocal_line(H: ProjLine, a: Basis2) -> ProjLine:
    """The map theta_a from ambient lines to reciprocal-space lines.

    If ``H`` is spanned by ``alpha*a1 + beta*a2`` the image is ``R(beta, -alpha)``.
    """
    alpha, beta = coefficients_in_basis(H.direction, a)
    return ProjLine((beta, -alpha))


def ambient_line(L: ProjLine, a: Basis2) -> ProjLine:
    """Inverse of :func:`reciprocal_line`."""
    beta, minus_alpha = L.direction
    return ProjLine(a.point(-minus_alpha, beta))


def reciprocal_figure(F: LineFigure, a: Basis2) -> LineFigure:
    return LineFigure(reciprocal_line(H, a) for H in F)


def transform_figure(Z: IntegralMatrix2, F: LineFigure) -> LineFigure:
    """Map each line ``R w`` of ``F`` to ``R (Z w)``."""
    if Z.det == 0:
        raise ValidationError("singular change-of-basis matrix")
    return LineFigure((ProjLine(Z.apply(line.direction)) for line in F), tol=F.tol)


@dataclass(frozen=True, eq=False)
class Segment:
    start: np.ndarray
    end: np.ndarray

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.end - self.start)))

    def sample(self, n: int) -> np.ndarray:
        s = np.linspace(0.0, 1.0, n)[:, None]
        return (1 - s) * self.start + s * self.end


def reduce_line_segments(L: ProjLine, T: float, *, merge_tol: float = 1e-9) -> list[Segment]:
    """Image of ``{t * direction : |t| <= T}`` modulo Z^2, inside ``[-1/2, 1/2)^2``.

    The truncated line is cut wherever it crosses a half-integer grid line,
    each piece is shifted back into the unit square, and collinear pieces that
    overlap are merged into maximal segments.  A direction that passes the
    bounded-denominator rational test is first snapped to its exact integer
    direction so that wrapped pieces land on each other.
    """
    if T <= 0:
        raise ValidationError("truncation T must be positive")
    d = L.direction
    rat = rational_direction(d)
    if rat is not None:
        d = np.array(rat, dtype=float)
        d /= np.hypot(*d)
    cuts = [-T, T]
    for axis in (0, 1):
        c = d[axis]
        if abs(c) < 1e-15:
            continue
        lo, hi = sorted(((-T * c) - 0.5, (T * c) - 0.5))
        ks = np.arange(math.floor(lo), math.ceil(hi) + 1)
        ts = (ks + 0.5) / c
        cuts.extend(ts[(ts > -T) & (ts < T)].tolist())
    cuts = np.unique(np.round(np.array(cuts), 13))

    normal = rot90(d)
    pieces = []
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        if t1 - t0 < 1e-13:
            continue
        mid = 0.5 * (t0 + t1) * d
        shift = np.floor(mid + 0.5)
        p0 = t0 * d - shift
        p1 = t1 * d - shift
        offset = float(normal @ p0)
        pieces.append((offset, float(d @ p0), float(d @ p1)))

    pieces.sort()
    segments: list[Segment] = []
    i = 0
    while i < len(pieces):
        j = i
        while j + 1 < len(pieces) and pieces[j + 1][0] - pieces[i][0] < merge_tol:
            j += 1
        group = pieces[i:j + 1]
        off = float(np.mean([g[0] for g in group]))
        intervals = sorted((min(g[1], g[2]), max(g[1], g[2])) for g in group)
        cur_lo, cur_hi = intervals[0]
        for lo, hi in intervals[1:]:
            if lo <= cur_hi + merge_tol:
                cur_hi = max(cur_hi, hi)
            else:
                segments.append(Segment(off * normal + cur_lo * d, off * normal + cur_hi * d))
                cur_lo, cur_hi = lo, hi
        segments.append(Segment(off * normal + cur_lo * d, off * normal + cur_hi * d))
        i = j + 1
    return segments


def is_rational_line(L: ProjLine) -> bool:
    return rational_direction(L.direction) is not None
