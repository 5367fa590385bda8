"""Symmetric 2x2 tensor algebra for plane stress.

All tensors store the *tensorial* shear component ``xy``.  The engineering
shear factor of two only enters in the element strain-displacement operator.
Everything here works on plain Python floats: the constitutive kernel calls
these functions millions of times and numpy's per-call overhead dominates for
2x2 objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymTensor2",
    "Spectral2",
    "ElasticOperator",
    "ZERO",
    "spectral",
    "macaulay",
    "split_tension_compression",
    "apply_elastic",
    "outer",
]


class SymTensor2:
    """In-plane symmetric tensor with components (xx, yy, xy)."""

    __slots__ = ("xx", "yy", "xy")

    def __init__(self, xx: float = 0.0, yy: float = 0.0, xy: float = 0.0):
        self.xx = float(xx)
        self.yy = float(yy)
        self.xy = float(xy)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other: SymTensor2) -> SymTensor2:
        return SymTensor2(self.xx + other.xx, self.yy + other.yy, self.xy + other.xy)

    def __sub__(self, other: SymTensor2) -> SymTensor2:
        return SymTensor2(self.xx - other.xx, self.yy - other.yy, self.xy - other.xy)

    def __neg__(self) -> SymTensor2:
        return SymTensor2(-self.xx, -self.yy, -self.xy)

    def __mul__(self, s: float) -> SymTensor2:
        return SymTensor2(self.xx * s, self.yy * s, self.xy * s)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymTensor2):
            return NotImplemented
        return self.xx == other.xx and self.yy == other.yy and self.xy == other.xy

    def __hash__(self) -> int:
        return hash((self.xx, self.yy, self.xy))

    def __repr__(self) -> str:
        return f"SymTensor2(xx={self.xx!r}, yy={self.yy!r}, xy={self.xy!r})"

    def __iter__(self):
        yield self.xx
        yield self.yy
        yield self.xy

    # -- contractions -------------------------------------------------------
    def ddot(self, other: SymTensor2) -> float:
        """Double contraction a:b (counts the off-diagonal twice)."""
        return self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy

    def project(self, n: tuple[float, float]) -> float:
        """Normal component n.T @ t @ n."""
        nx, ny = n
        return self.xx * nx * nx + self.yy * ny * ny + 2.0 * self.xy * nx * ny

    def norm(self) -> float:
        return math.sqrt(self.ddot(self))

    def is_finite(self) -> bool:
        return math.isfinite(self.xx) and math.isfinite(self.yy) and math.isfinite(self.xy)

    def rotated(self, theta: float) -> SymTensor2:
        """Return R t R^T for a counter-clockwise rotation by ``theta``."""
        c, s = math.cos(theta), math.sin(theta)
        xx = c * c * self.xx - 2.0 * c * s * self.xy + s * s * self.yy
        yy = s * s * self.xx + 2.0 * c * s * self.xy + c * c * self.yy
        xy = c * s * (self.xx - self.yy) + (c * c - s * s) * self.xy
        return SymTensor2(xx, yy, xy)

    # -- conversions ------------------------------------------------------
    def to_array(self) -> np.ndarray:
        return np.array([self.xx, self.yy, self.xy])

    def to_matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy], [self.xy, self.yy]])

    @classmethod
    def from_array(cls, a) -> SymTensor2:
        return cls(a[0], a[1], a[2])

    @classmethod
    def from_matrix(cls, m) -> SymTensor2:
        return cls(m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0]))


ZERO = SymTensor2()


def outer(e: tuple[float, float]) -> SymTensor2:
    """Dyad e (x) e of a 2-vector."""
    ex, ey = e
    return SymTensor2(ex * ex, ey * ey, ex * ey)


@dataclass(frozen=True)
class Spectral2:
    """Principal values (descending) and matching unit directions."""

    values: tuple[float, float]
    directions: tuple[tuple[float, float], tuple[float, float]]

    def reconstruct(self) -> SymTensor2:
        (l1, l2), (e1, e2) = self.values, self.directions
        return outer(e1) * l1 + outer(e2) * l2


_CANONICAL = ((1.0, 0.0), (0.0, 1.0))


def _eig(t: SymTensor2, scale: float = 0.0):
    """Closed-form eigen-pair of a symmetric 2x2 tensor (hot path helper)."""
    m = 0.5 * (t.xx + t.yy)
    h = 0.5 * (t.xx - t.yy)
    r = math.hypot(h, t.xy)
    l1, l2 = m + r, m - r
    if r <= 0.5e-12 * max(abs(l1), abs(l2), scale):
        return l1, l2, 1.0, 0.0
    theta = 0.5 * math.atan2(t.xy, h)
    return l1, l2, math.cos(theta), math.sin(theta)


def spectral(t: SymTensor2, scale: float = 0.0) -> Spectral2:
    """Spectral decomposition with eigenvalues sorted in descending order.

    A (near-)repeated eigenvalue, ``|l1 - l2| < 1e-12 * max(|l1|, |l2|, scale)``,
    yields the canonical axes so the output is deterministic.
    """
    l1, l2, c, s = _eig(t, scale)
    if c == 1.0 and s == 0.0:
        return Spectral2((l1, l2), _CANONICAL)
    return Spectral2((l1, l2), ((c, s), (-s, c)))


def macaulay(x: float) -> float:
    """Macaulay bracket: x for x > 0, else 0."""
    return x if x > 0.0 else 0.0


def split_tension_compression(t: SymTensor2) -> tuple[SymTensor2, SymTensor2]:
    """Spectral split into tensile and compressive parts; they sum to ``t``."""
    l1, l2, c, s = _eig(t)
    p1, p2 = macaulay(l1), macaulay(l2)
    if p1 == 0.0:
        return SymTensor2(), SymTensor2(t.xx, t.yy, t.xy)
    # e1 = (c, s), e2 = (-s, c)
    cc, ss, cs = c * c, s * s, c * s
    tens = SymTensor2(p1 * cc + p2 * ss, p1 * ss + p2 * cc, (p1 - p2) * cs)
    if p2 == l2 and p1 == l1:
        # fully tensile: return the exact input so t_c is exactly zero
        return SymTensor2(t.xx, t.yy, t.xy), SymTensor2()
    return tens, t - tens


@dataclass(frozen=True)
class ElasticOperator:
    """Isotropic plane-stress elasticity."""

    E: float
    nu: float

    def __post_init__(self):
        if not self.E > 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {self.nu}")

    @property
    def plane_modulus(self) -> float:
        """E / (1 - nu^2)."""
        return self.E / (1.0 - self.nu * self.nu)

    @property
    def shear_factor(self) -> float:
        """E / (1 + nu), i.e. twice the shear modulus (tensorial shear)."""
        return self.E / (1.0 + self.nu)

    def apply(self, eps: SymTensor2) -> SymTensor2:
        ep = self.plane_modulus
        return SymTensor2(
            ep * (eps.xx + self.nu * eps.yy),
            ep * (eps.yy + self.nu * eps.xx),
            self.shear_factor * eps.xy,
        )

    def matrix(self) -> np.ndarray:
        """3x3 matrix acting on (xx, yy, xy) with tensorial shear strain."""
        ep = self.plane_modulus
        return np.array(
            [
                [ep, ep * self.nu, 0.0],
                [ep * self.nu, ep, 0.0],
                [0.0, 0.0, self.shear_factor],
            ]
        )


def apply_elastic(D: ElasticOperator, eps: SymTensor2) -> SymTensor2:
    return D.apply(eps)
