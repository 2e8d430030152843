"""Closed-form reference solutions: Kerr (Coulomb at a=0), Born, DKS family.

Field outputs use the package normalization: the complex vector ``W`` with
``E_re = Re W`` and ``H_re = -Im W``, so that the Coulomb solution carries
charge ``1/4`` under the ``1/(4 pi)`` flux integral.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OnLocus, OnRing, ValidationError
from .fields import vector_to_spinor
from .polys import GeneratingPoly

RING_TOL = 1e-10
LOCUS_TOL = 1e-12


def _txyz(X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] == 4:
        return X[..., 0], X[..., 1], X[..., 2], X[..., 3]
    if X.shape[-1] == 3:
        return np.zeros(X.shape[:-1]), X[..., 0], X[..., 1], X[..., 2]
    raise ValidationError("points need (t, x, y, z) or (x, y, z) components", shape=X.shape)


# -- generating functions ------------------------------------------------------


def kerr_poly(a=0.0) -> GeneratingPoly:
    """``Pi = G k0 - k1 + 2 i a G``."""
    return GeneratingPoly([(1, 1, 0, 1.0), (0, 0, 1, -1.0), (1, 0, 0, 2j * a)], name=f"kerr(a={a:g})")


def born_poly(b=None, b2=None) -> GeneratingPoly:
    """``Pi = k0 k1 + b^2 G``; pass ``b`` (possibly complex) or ``b2`` directly."""
    if b2 is None:
        if b is None:
            raise ValidationError("born needs b or b2")
        b2 = complex(b) ** 2
    return GeneratingPoly([(0, 1, 1, 1.0), (1, 0, 0, b2)], name=f"born(b2={complex(b2):g})")


def dks_generating(phi, p, q, s) -> GeneratingPoly:
    """``Pi = phi(G) + (qG + s) k1 - (pG + conj(q)) k0``.

    ``phi`` is a sequence of ascending coefficients in ``G``.
    """
    q = complex(q)
    monos = [(k, 0, 0, c) for k, c in enumerate(np.atleast_1d(phi)) if c != 0]
    monos += [(1, 0, 1, q), (0, 0, 1, float(s)), (1, 1, 0, -float(p)), (0, 1, 0, -q.conjugate())]
    return GeneratingPoly([m for m in monos if m[3] != 0])


CATALOG = ("kerr", "born", "coulomb")


def catalog_poly(name, a=0.0, b=None, imaginary_b=False) -> GeneratingPoly:
    if name == "coulomb":
        return kerr_poly(0.0)
    if name == "kerr":
        return kerr_poly(a)
    if name == "born":
        if imaginary_b:
            return born_poly(b2=-(a**2) if b is None else -(b**2))
        return born_poly(b=a if b is None else b)
    raise ValidationError(f"unknown catalog entry {name!r}", known=CATALOG)


# -- Kerr -----------------------------------------------------------------------


@dataclass
class KerrReference:
    G: np.ndarray
    F: np.ndarray
    W: np.ndarray  # the anti-self-dual combination, E_re = Re W, H_re = -Im W

    @property
    def E_re(self):
        return self.W.real

    @property
    def H_re(self):
        return -self.W.imag


def kerr_rstar(x, y, z, a):
    """Principal ``sqrt(x^2 + y^2 + (z + i a)^2)``; equals ``r`` on ``z > 0`` as ``a -> 0``."""
    return np.sqrt((x * x + y * y + (z + 1j * a) ** 2).astype(complex))


def kerr_reference(X, a, sign=1) -> KerrReference:
    """Closed-form branch ``G = p / ((z + ia) +- r*)`` and field ``W = +- r*/(4 r*^3)``."""
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1", sign=sign)
    _, x, y, z = _txyz(X)
    rs = kerr_rstar(x, y, z, a)
    if np.any(np.abs(rs) ** 2 <= RING_TOL * (1 + a * a)):
        raise OnRing("point lies on the Kerr ring", op="kerr_reference", a=a)
    p = x + 1j * y
    den = (z + 1j * a) + sign * rs
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(den != 0, p / np.where(den != 0, den, 1), np.inf)
    vec = np.stack([x + 0j, y + 0j, z + 1j * a], -1)
    W = sign * vec / (4 * rs[..., None] ** 3)
    return KerrReference(G, vector_to_spinor(W), W)


# -- Born -----------------------------------------------------------------------


@dataclass
class BornAux:
    rho2: np.ndarray
    s2: np.ndarray
    M: np.ndarray
    Delta: np.ndarray


@dataclass
class BornReference:
    aux: BornAux
    E_rho: np.ndarray
    E_z: np.ndarray
    H_phi: np.ndarray
    G: np.ndarray
    W: np.ndarray  # Cartesian E - iH (complex for complex b)

    @property
    def E_re(self):
        return self.W.real

    @property
    def H_re(self):
        return -self.W.imag


def born_aux(X, b2) -> BornAux:
    t, x, y, z = _txyz(X)
    rho2 = x * x + y * y
    s2 = t * t - z * z
    M = s2 + rho2 + b2
    return BornAux(rho2, s2, M, M * M - 4 * s2 * rho2)


def born_reference(X, b=None, sign=1, b2=None) -> BornReference:
    """Born field in package units (a quarter of the textbook normalization).

    Upper sign (``sign=+1``): ``E_rho = 2 b^2 rho z / Delta^(3/2)``,
    ``E_z = -b^2 M / Delta^(3/2)``, ``H_phi = 2 b^2 rho t / Delta^(3/2)``,
    carried by the root ``G = (-(wp+uv+b^2) - sqrt(Delta)) / (2wv)``.
    """
    if b2 is None:
        b2 = complex(b) ** 2
    b2 = complex(b2)
    if b2.imag == 0:
        b2 = b2.real
    t, x, y, z = _txyz(X)
    aux = born_aux(X, b2)
    if np.any(np.abs(aux.Delta) <= LOCUS_TOL * (1 + np.abs(aux.M) ** 2)):
        raise OnLocus("point lies on the Born singular locus", op="born_reference")
    sq = np.sqrt(np.asarray(aux.Delta, dtype=complex))
    d32 = aux.Delta * sq
    rho = np.sqrt(aux.rho2)
    E_rho = sign * 2 * b2 * rho * z / d32
    E_z = -sign * b2 * aux.M / d32
    H_phi = sign * 2 * b2 * rho * t / d32
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(rho > 0, x / np.where(rho > 0, rho, 1), 1.0)
        s = np.where(rho > 0, y / np.where(rho > 0, rho, 1), 0.0)
    E = np.stack([E_rho * c, E_rho * s, E_z], -1)
    H = np.stack([-H_phi * s, H_phi * c, np.zeros_like(H_phi)], -1)
    u, v, w, p = t + z, t - z, x - 1j * y, x + 1j * y
    A2, A1, A0 = w * v, w * p + u * v + b2, u * p
    with np.errstate(divide="ignore", invalid="ignore"):
        G = (-A1 - sign * sq) / (2 * A2)
    return BornReference(aux, E_rho, E_z, H_phi, G, E - 1j * H)


# -- multipoles -----------------------------------------------------------------


@dataclass
class Multipoles:
    electric: np.ndarray  # Q_l, potential sum Q_l P_l(cos th) / r^(l+1)
    magnetic: np.ndarray
    radii: tuple


def _axial_projection(field_fn, R, lmax, n_theta, n_phi):
    from numpy.polynomial.legendre import leggauss, legval

    mu, wts = leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    M, PH = np.meshgrid(mu, phi, indexing="ij")
    st = np.sqrt(1 - M**2)
    n = np.stack([st * np.cos(PH), st * np.sin(PH), M], -1)
    E, H = field_fn(R * n.reshape(-1, 3))
    Er = np.sum(np.asarray(E).reshape(n.shape) * n, -1).mean(axis=1)
    Hr = np.sum(np.asarray(H).reshape(n.shape) * n, -1).mean(axis=1)
    out = []
    for radial in (Er, Hr):
        coeffs = []
        for l in range(lmax + 1):
            Pl = legval(mu, [0] * l + [1])
            proj = (2 * l + 1) / 2 * np.sum(wts * radial * Pl)
            coeffs.append(proj * R ** (l + 2) / (l + 1))
        out.append(np.array(coeffs))
    return out


def multipole_moments(field_fn, radii=(4.0, 8.0), lmax=3, n_theta=48, n_phi=32) -> Multipoles:
    """Axial multipole coefficients of the real fields on spheres.

    ``field_fn(points (N, 3)) -> (E_re, H_re)``.  Radial components are
    projected on Legendre polynomials; the estimates at two radii are
    combined by Richardson extrapolation assuming an ``R^-2`` remainder.
    """
    R1, R2 = radii
    e1, m1 = _axial_projection(field_fn, R1, lmax, n_theta, n_phi)
    e2, m2 = _axial_projection(field_fn, R2, lmax, n_theta, n_phi)
    w = R2**2 / (R2**2 - R1**2)
    return Multipoles(w * e2 + (1 - w) * e1, w * m2 + (1 - w) * m1, (R1, R2))


def kerr_field_fn(a, sign=1):
    def fn(pts):
        ref = kerr_reference(pts, a, sign)
        return ref.E_re, ref.H_re

    return fn
