"""Quadratic map from C^3 into the causal cone, SO(3,C) rotations, duplicons."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .algebra import Biquat, SpacetimePoint, hermitian_embed
from .errors import IdenticallyNull, NotOrthogonal, ValidationError

ORTHO_TOL = 1e-10
NULL_TOL = 1e-13


@dataclass
class CMapResult:
    sigma: np.ndarray
    T: np.ndarray
    X: np.ndarray
    S2: np.ndarray

    @property
    def phase(self):
        return np.angle(self.sigma)

    @property
    def cone_residual(self):
        """``|T^2 - |X|^2 - S^2|`` relative to ``T^2``."""
        lhs = self.T**2 - np.sum(self.X**2, axis=-1)
        return np.abs(lhs - self.S2) / (1.0 + self.T**2)


def c3_map(z) -> CMapResult:
    """``sigma = z.z``, ``T = z.conj(z)``, ``X = i z x conj(z)``; batched over leading axes."""
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != 3:
        raise ValidationError("c3_map needs complex 3-vectors", shape=z.shape)
    zb = z.conj()
    sigma = np.sum(z * z, axis=-1)
    T = np.sum(z * zb, axis=-1).real
    X = (1j * np.cross(z, zb)).real
    return CMapResult(sigma, T, X, np.abs(sigma) ** 2)


def orthogonality_residual(R):
    R = np.asarray(R, dtype=complex)
    return np.abs(R @ np.swapaxes(R, -1, -2) - np.eye(3)).max(axis=(-2, -1))


def so3c_rotate(R, z, tol=ORTHO_TOL):
    R = np.asarray(R, dtype=complex)
    if R.shape[-2:] != (3, 3):
        raise ValidationError("rotation must be 3x3", shape=R.shape)
    res = orthogonality_residual(R)
    if np.any(res > tol * (1 + np.abs(R).max(axis=(-2, -1)) ** 2)) or np.any(np.abs(np.linalg.det(R) - 1) > 1e-8):
        raise NotOrthogonal("matrix is not in SO(3,C)", op="so3c_rotate", residual=float(np.max(res)))
    return np.einsum("...ij,...j->...i", R, np.asarray(z, dtype=complex))


def random_so3c(rng, n=None, bound=1.0):
    """``expm`` of random complex antisymmetric matrices with entries bounded by ``bound``."""
    from scipy.linalg import expm

    shape = (n,) if n is not None else ()
    a = rng.uniform(-bound, bound, shape + (3,)) + 1j * rng.uniform(-bound, bound, shape + (3,))
    A = np.zeros(shape + (3, 3), dtype=complex)
    A[..., 0, 1], A[..., 0, 2], A[..., 1, 2] = a[..., 0], a[..., 1], a[..., 2]
    A = A - np.swapaxes(A, -1, -2)
    return expm(A)


def axis_rotation(axis, angle):
    """Rotation about a coordinate axis by a (possibly complex) angle."""
    c, s = np.cos(angle), np.sin(angle)
    i, j = [k for k in range(3) if k != axis]
    R = np.eye(3, dtype=complex)
    R[i, i], R[i, j], R[j, i], R[j, j] = c, -s, s, c
    return R


# -- complex world lines --------------------------------------------------------


def _coeff(c):
    if isinstance(c, (list, tuple)):
        if len(c) != 2:
            raise ValidationError("complex coefficient pairs need [re, im]", value=c)
        return complex(c[0], c[1])
    if isinstance(c, dict):
        return complex(c.get("re", 0.0), c.get("im", 0.0))
    return complex(c)


@dataclass
class WorldLineC:
    """Polynomial curve ``Z(tau)`` in matrix components; ascending coefficients."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        for name in "uvwp":
            c = np.atleast_1d(np.asarray(getattr(self, name), dtype=complex))
            setattr(self, name, c if c.size else np.zeros(1, dtype=complex))

    @classmethod
    def from_cartesian(cls, z0, z1, z2, z3):
        z0, z1, z2, z3 = (np.atleast_1d(np.asarray(c, dtype=complex)) for c in (z0, z1, z2, z3))
        n = max(len(c) for c in (z0, z1, z2, z3))
        z0, z1, z2, z3 = (np.pad(c, (0, n - len(c))) for c in (z0, z1, z2, z3))
        return cls(z0 + z3, z0 - z3, z1 - 1j * z2, z1 + 1j * z2)

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(*([_coeff(c) for c in data[k]] for k in "uvwp"))
        except KeyError as exc:
            raise ValidationError(f"world line needs keys u, v, w, p: missing {exc}") from exc

    @classmethod
    def from_json(cls, path_or_text):
        text = path_or_text
        if not str(path_or_text).lstrip().startswith("{"):
            with open(path_or_text) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        return {k: [[c.real, c.imag] for c in getattr(self, k)] for k in "uvwp"}

    @property
    def degree(self):
        return max(len(np.trim_zeros(getattr(self, k), "b")) for k in "uvwp") - 1

    def __call__(self, tau):
        from numpy.polynomial.polynomial import polyval

        tau = np.asarray(tau, dtype=complex)
        return tuple(polyval(tau, getattr(self, k)) for k in "uvwp")

    def cartesian(self, tau):
        u, v, w, p = self(tau)
        return np.stack([(u + v) / 2, (w + p) / 2, 1j * (w - p) / 2, (u - v) / 2], -1)

    @property
    def is_real(self):
        return bool(
            np.all(np.abs(self.u.imag) == 0) and np.all(np.abs(self.v.imag) == 0) and np.allclose(self.p, self.w.conj(), atol=0)
        )


def null_cone_polynomial(line: WorldLineC, X):
    """Ascending coefficients of ``det(X - Z(tau))``."""
    from numpy.polynomial import polynomial as Pn

    B = X if isinstance(X, Biquat) else hermitian_embed(X if isinstance(X, SpacetimePoint) else SpacetimePoint(*X))
    du = Pn.polysub([B.u], line.u)
    dv = Pn.polysub([B.v], line.v)
    dw = Pn.polysub([B.w], line.w)
    dp = Pn.polysub([B.p], line.p)
    return Pn.polysub(Pn.polymul(du, dv), Pn.polymul(dw, dp))


def null_cone_roots(line: WorldLineC, X, tol=NULL_TOL):
    """All roots of ``det(X - Z(tau)) = 0`` with multiplicity, sorted by (Re, Im)."""
    c = np.asarray(null_cone_polynomial(line, X), dtype=complex)
    scale = np.abs(c).max() if c.size else 0.0
    ref = 1.0 + max(np.abs(getattr(line, k)).max() for k in "uvwp") ** 2
    if scale <= tol * ref:
        raise IdenticallyNull("separation from the world line is null for every tau", op="null_cone_roots")
    big = np.nonzero(np.abs(c) > tol * scale)[0]
    c = c[: big[-1] + 1]
    if len(c) < 2:
        return np.array([], dtype=complex)
    roots, _ = kernels.polyroots(c[None, :])
    r = np.sort_complex(roots[0])
    return r


def duplicons(line: WorldLineC, X):
    """``[(tau_k, z(tau_k))]`` with ``z`` the Cartesian position on the world line."""
    taus = null_cone_roots(line, X)
    return [(complex(t), line.cartesian(t)) for t in taus]
