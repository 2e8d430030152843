"""Biquaternions as 2x2 complex matrices, Hamilton quaternions, Minkowski slice.

Matrix entries are named ``Z00=u, Z11=v, Z01=w, Z10=p``.  The Cartesian chart
is ``z0=(u+v)/2, z3=(u-v)/2, z1=(w+p)/2, z2=i(w-p)/2`` so that
``det Z = z0^2 - z1^2 - z2^2 - z3^2``.  On the real slice this reads
``u = t+z, v = t-z, w = x-iy, p = x+iy`` (a Hermitian matrix).

Quaternion units are embedded as ``I, J, K = -i*sigma_x, -i*sigma_y,
-i*sigma_z``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian, NullDivisor

NULL_TOL = 1e-12
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Biquat:
    u: complex
    v: complex
    w: complex
    p: complex

    def __post_init__(self):
        for name in ("u", "v", "w", "p"):
            object.__setattr__(self, name, complex(getattr(self, name)))

    @classmethod
    def from_matrix(cls, m) -> "Biquat":
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[1, 1], m[0, 1], m[1, 0])

    @classmethod
    def from_cartesian(cls, z0, z1, z2, z3) -> "Biquat":
        # inverse of z1=(w+p)/2, z2=i(w-p)/2  ->  w = z1 - i z2, p = z1 + i z2
        return cls(z0 + z3, z0 - z3, z1 - 1j * z2, z1 + 1j * z2)

    @classmethod
    def identity(cls) -> "Biquat":
        return cls(1, 1, 0, 0)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.u, self.w], [self.p, self.v]], dtype=complex)

    @property
    def cartesian(self) -> np.ndarray:
        u, v, w, p = self.u, self.v, self.w, self.p
        return np.array([(u + v) / 2, (w + p) / 2, 1j * (w - p) / 2, (u - v) / 2])

    def det(self) -> complex:
        return self.u * self.v - self.w * self.p

    def trace(self) -> complex:
        return self.u + self.v

    def norm(self) -> float:
        """Entrywise max modulus."""
        return max(abs(self.u), abs(self.v), abs(self.w), abs(self.p))

    def __matmul__(self, other: "Biquat") -> "Biquat":
        return bq_mul(self, other)

    def __mul__(self, other):
        if isinstance(other, Biquat):
            return bq_mul(self, other)
        return Biquat(self.u * other, self.v * other, self.w * other, self.p * other)

    __rmul__ = __mul__

    def __add__(self, other: "Biquat") -> "Biquat":
        return Biquat(self.u + other.u, self.v + other.v, self.w + other.w, self.p + other.p)

    def __sub__(self, other: "Biquat") -> "Biquat":
        return Biquat(self.u - other.u, self.v - other.v, self.w - other.w, self.p - other.p)

    def __neg__(self) -> "Biquat":
        return Biquat(-self.u, -self.v, -self.w, -self.p)


E = Biquat(1, 1, 0, 0)
I = Biquat.from_matrix([[0, -1j], [-1j, 0]])
J = Biquat.from_matrix([[0, -1], [1, 0]])
K = Biquat.from_matrix([[-1j, 0], [0, 1j]])


def bq_mul(a: Biquat, b: Biquat) -> Biquat:
    return Biquat(
        a.u * b.u + a.w * b.p,
        a.p * b.w + a.v * b.v,
        a.u * b.w + a.w * b.v,
        a.p * b.u + a.v * b.p,
    )


def is_null(a: Biquat, tol: float = NULL_TOL) -> bool:
    return abs(a.det()) <= tol * (1.0 + a.norm() ** 2)


def bq_inv(a: Biquat, tol: float = NULL_TOL) -> Biquat:
    d = a.det()
    if abs(d) <= tol * (1.0 + a.norm() ** 2):
        raise NullDivisor("element is a null divisor", op="bq_inv", det=d)
    return Biquat(a.v / d, a.u / d, -a.w / d, -a.p / d)


def automorphism(a: Biquat, q: Biquat) -> Biquat:
    """Inner automorphism ``q -> a q a^-1``."""
    return bq_mul(bq_mul(a, q), bq_inv(a))


# -- Minkowski slice ----------------------------------------------------------


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: float
    y: float
    z: float

    def __iter__(self):
        return iter((self.t, self.x, self.y, self.z))

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z], dtype=float)

    def interval(self) -> float:
        return self.t**2 - self.x**2 - self.y**2 - self.z**2


def hermitian_embed(x) -> Biquat:
    t, x1, x2, x3 = (float(c) for c in x)
    return Biquat(t + x3, t - x3, x1 - 1j * x2, x1 + 1j * x2)


def is_hermitian(a: Biquat, tol: float = HERMITIAN_TOL) -> bool:
    scale = 1.0 + a.norm()
    return (
        abs(a.u.imag) <= tol * scale
        and abs(a.v.imag) <= tol * scale
        and abs(a.p - a.w.conjugate()) <= tol * scale
    )


def hermitian_extract(a: Biquat, tol: float = HERMITIAN_TOL) -> SpacetimePoint:
    """Inverse of :func:`hermitian_embed`, defined on Hermitian inputs only."""
    if not is_hermitian(a, tol):
        raise NotHermitian("matrix is not Hermitian", op="hermitian_extract", point=a)
    u, v = a.u.real, a.v.real
    return SpacetimePoint((u + v) / 2, a.w.real, -a.w.imag, (u - v) / 2)


def embed_coords(t, x, y, z):
    """Vectorized chart map returning ``(u, v, w, p)`` arrays."""
    t, x, y, z = (np.asarray(c, dtype=float) for c in (t, x, y, z))
    return t + z, t - z, x - 1j * y, x + 1j * y


# -- Hamilton quaternions -----------------------------------------------------


@dataclass(frozen=True)
class Quaternion:
    q0: float
    q1: float
    q2: float
    q3: float

    def __iter__(self):
        return iter((self.q0, self.q1, self.q2, self.q3))

    def as_array(self) -> np.ndarray:
        return np.array([self.q0, self.q1, self.q2, self.q3], dtype=float)

    def norm2(self) -> float:
        return self.q0**2 + self.q1**2 + self.q2**2 + self.q3**2

    def conj(self) -> "Quaternion":
        return Quaternion(self.q0, -self.q1, -self.q2, -self.q3)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return q_mul(self, other)
        return Quaternion(*(c * other for c in self))

    __rmul__ = __mul__

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(*(a + b for a, b in zip(self, other)))

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.q0, -self.q1, -self.q2, -self.q3)


QE = Quaternion(1.0, 0.0, 0.0, 0.0)
QI = Quaternion(0.0, 1.0, 0.0, 0.0)
QJ = Quaternion(0.0, 0.0, 1.0, 0.0)
QK = Quaternion(0.0, 0.0, 0.0, 1.0)


def q_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return Quaternion(
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    )


def q_star_identity(q: Quaternion) -> Quaternion:
    """Conjugate built only from the units: ``-(q + IqI + JqJ + KqK)/2``."""
    total = q
    for unit in (QI, QJ, QK):
        total = total + q_mul(q_mul(unit, q), unit)
    return total * -0.5


def quat_to_biquat(q: Quaternion) -> Biquat:
    q0, q1, q2, q3 = q
    return E * q0 + I * q1 + J * q2 + K * q3


def biquat_to_quat(a: Biquat, tol: float = 1e-12) -> Quaternion:
    """Project onto the unitary slice; raises if ``a`` is not a real quaternion."""
    m = a.matrix
    # coefficients against E, I, J, K under the trace form <A,B> = tr(A B^dagger)/2
    basis = (E, I, J, K)
    coeffs = [np.trace(m @ b.matrix.conj().T) / 2 for b in basis]
    if max(abs(c.imag) for c in coeffs) > tol * (1.0 + a.norm()):
        raise ValueError("biquaternion is not on the real quaternion slice")
    return Quaternion(*(c.real for c in coeffs))
