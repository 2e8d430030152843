"""Differentiability over algebras: Scheffers test, L-R factorization, conformality."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .algebra import Biquat, Quaternion, quat_to_biquat
from .errors import NonCommutativeAlgebra, NotConformal, NotFactorizable, NumericalBreakdown, ValidationError

STEP = 1e-6


@dataclass
class AlgebraSpec:
    """Structure constants ``e_i e_j = sum_k c[i, j, k] e_k``."""

    c: np.ndarray
    unit: int = 0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=complex)
        n = self.c.shape[0]
        if self.c.shape != (n, n, n) or n < 1:
            raise ValidationError("structure constants must have shape (n, n, n)", shape=self.c.shape)
        if not 0 <= self.unit < n:
            raise ValidationError("unit index out of range", unit=self.unit)

    @property
    def dim(self):
        return self.c.shape[0]

    @classmethod
    def from_dict(cls, data):
        try:
            c = np.array(data["c"])
            if c.ndim == 4:  # [re, im] pairs
                c = c[..., 0] + 1j * c[..., 1]
            spec = cls(c, int(data.get("unit", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed algebra spec: {exc}") from exc
        if "dim" in data and int(data["dim"]) != spec.dim:
            raise ValidationError("dim does not match structure constants", dim=data["dim"])
        return spec

    @classmethod
    def from_json(cls, path_or_text):
        text = path_or_text
        if not str(path_or_text).lstrip().startswith("{"):
            with open(path_or_text) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))

    def mul(self, a, b):
        return np.einsum("i,j,ijk->k", np.asarray(a, dtype=complex), np.asarray(b, dtype=complex), self.c)

    def left_matrix(self, h):
        """Matrix of ``x -> h x``: ``M[k, i] = sum_j h_j c[j, i, k]``."""
        return np.einsum("j,jik->ki", np.asarray(h, dtype=complex), self.c)

    def associativity_residual(self):
        lhs = np.einsum("ijm,mkl->ijkl", self.c, self.c)
        rhs = np.einsum("jkm,iml->ijkl", self.c, self.c)
        return float(np.abs(lhs - rhs).max())

    def commutativity_residual(self):
        return float(np.abs(self.c - self.c.transpose(1, 0, 2)).max())

    def unit_residual(self):
        e = np.eye(self.dim)
        return float(max(np.abs(self.c[self.unit] - e).max(), np.abs(self.c[:, self.unit] - e).max()))

    @property
    def is_commutative(self):
        return self.commutativity_residual() <= 1e-12


def complex_numbers():
    c = np.zeros((2, 2, 2))
    c[0, 0, 0] = c[0, 1, 1] = c[1, 0, 1] = 1
    c[1, 1, 0] = -1
    return AlgebraSpec(c)


def dual_numbers():
    c = np.zeros((2, 2, 2))
    c[0, 0, 0] = c[0, 1, 1] = c[1, 0, 1] = 1
    return AlgebraSpec(c)


def quaternions():
    from .algebra import QE, QI, QJ, QK, q_mul

    units = (QE, QI, QJ, QK)
    c = np.array([[q_mul(a, b).as_array() for b in units] for a in units])
    return AlgebraSpec(c)


# -- Jacobians -----------------------------------------------------------------------


def _real_jacobian(F, x, h):
    """Central-difference Jacobian of ``F: R^n -> C^m`` (columns per real input)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(F(x + e), dtype=complex) - np.asarray(F(x - e), dtype=complex)) / (2 * h))
    J = np.stack(cols, -1)
    if not np.all(np.isfinite(J)):
        raise NumericalBreakdown("Jacobian estimate is not finite", op="jacobian", point=x.tolist())
    return J


@dataclass
class SchefferResult:
    H: np.ndarray
    residual: float
    ok: bool


def scheffers_check(F, spec: AlgebraSpec, Z, tol=1e-6) -> SchefferResult:
    """Is the Jacobian of ``F`` at ``Z`` left multiplication by some ``H``?"""
    if not spec.is_commutative:
        raise NonCommutativeAlgebra("Scheffers condition needs a commutative algebra", op="scheffers_check")
    Z = np.asarray(Z, dtype=complex)
    h = STEP * (1 + np.abs(Z).max())
    if np.any(Z.imag != 0):
        J = _real_jacobian(lambda x: F(x[: len(Z)] + 1j * x[len(Z) :]), np.r_[Z.real, Z.imag], h)[:, : len(Z)]
    else:
        J = _real_jacobian(lambda x: F(x), Z.real, h)
    basis = np.stack([spec.left_matrix(np.eye(spec.dim)[j]).reshape(-1) for j in range(spec.dim)], -1)
    H, *_ = np.linalg.lstsq(basis, J.reshape(-1), rcond=None)
    fit = (basis @ H).reshape(J.shape)
    norm = np.linalg.norm(J)
    residual = float(np.linalg.norm(J - fit) / norm) if norm > 0 else 0.0
    return SchefferResult(H, residual, residual <= tol)


@dataclass
class FactorizationResult:
    L: np.ndarray
    R: np.ndarray
    residual: float
    sigma_ratio: float
    alpha_gauge_note: str = "L, R defined up to L -> alpha L, R -> R / alpha"

    def apply(self, dZ):
        return self.L @ np.asarray(dZ) @ self.R


def _as_matrix(Z):
    if isinstance(Z, Biquat):
        return Z.matrix
    return np.asarray(Z, dtype=complex).reshape(2, 2)


def biquat_jacobian(F, Z, h=None):
    """Wirtinger parts ``(dF/dZ, dF/dconj(Z))`` as 4x4 matrices on column-major ``vec``."""
    Z0 = _as_matrix(Z)
    h = STEP * (1 + np.abs(Z0).max()) if h is None else h

    def f(x):
        m = (x[:4] + 1j * x[4:]).reshape(2, 2, order="F")
        out = F(Biquat.from_matrix(m) if not isinstance(Z, np.ndarray) else m)
        return _as_matrix(out).reshape(-1, order="F")

    vz = Z0.reshape(-1, order="F")
    J = _real_jacobian(f, np.r_[vz.real, vz.imag], h)
    Jr, Ji = J[:, :4], J[:, 4:]
    return (Jr - 1j * Ji) / 2, (Jr + 1j * Ji) / 2


def _rearrange(J):
    """Van Loan rearrangement: ``kron(A, B) -> vec(A) vec(B)^T``."""
    R = np.empty((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            R[i + 2 * j] = J[2 * i : 2 * i + 2, 2 * j : 2 * j + 2].reshape(-1, order="F")
    return R


def ncd_factorize(F, Z, tol=1e-6) -> FactorizationResult:
    """Factor ``dF = L dZ R`` at ``Z``; raises ``NotFactorizable`` otherwise.

    With column-major ``vec``, ``vec(L dZ R) = kron(R^T, L) vec(dZ)``, so the
    test is rank one of the rearranged Jacobian.  The gauge is fixed by
    ``||L|| = 1`` (Frobenius) and a real positive first nonzero entry of ``L``.
    """
    Jz, Jzb = biquat_jacobian(F, Z)
    full = np.linalg.norm(Jz) + np.linalg.norm(Jzb)
    if full == 0:
        raise NotFactorizable("map is locally constant", op="ncd_factorize", residual=1.0)
    U, s, Vh = np.linalg.svd(_rearrange(Jz))
    A = np.sqrt(s[0]) * U[:, 0].reshape(2, 2, order="F")
    B = np.sqrt(s[0]) * Vh[0].reshape(2, 2, order="F")
    L, R = B, A.T
    nL = np.linalg.norm(L)
    if nL == 0:
        raise NotFactorizable("no complex-linear part", op="ncd_factorize", residual=1.0)
    first = L.reshape(-1, order="F")[np.argmax(np.abs(L.reshape(-1, order="F")) > 1e-14 * nL)]
    alpha = abs(first) / (first * nL)
    L, R = alpha * L, R / alpha
    recon = np.kron(R.T, L)
    residual = float((np.linalg.norm(Jz - recon) + np.linalg.norm(Jzb)) / full)
    ratio = float(s[1] / s[0]) if s[0] > 0 else np.inf
    if ratio > tol or residual > tol:
        raise NotFactorizable(
            "Jacobian is not of the form dZ -> L dZ R", op="ncd_factorize", residual=residual, sigma_ratio=ratio
        )
    return FactorizationResult(L, R, residual, ratio)


def reconstruction_error(res: FactorizationResult, F, Z):
    Jz, Jzb = biquat_jacobian(F, Z)
    return float((np.linalg.norm(Jz - np.kron(res.R.T, res.L)) + np.linalg.norm(Jzb)) / np.linalg.norm(Jz))


def _quat_vec(a):
    if isinstance(a, Quaternion):
        return a.as_array()
    m = _as_matrix(a)
    # coefficients on E, I, J, K = -i sigma
    return np.array([(m[0, 0] + m[1, 1]) / 2, 1j * (m[0, 1] + m[1, 0]) / 2, (m[1, 0] - m[0, 1]) / 2, 1j * (m[0, 0] - m[1, 1]) / 2])


def conformal_factor(F, q, tol=1e-6) -> float:
    """``Lambda`` with ``J^T J = Lambda * 1`` for ``F`` restricted to real quaternions."""
    q = q if isinstance(q, Quaternion) else Quaternion(*np.asarray(q, dtype=float))

    def f(x):
        out = F(quat_to_biquat(Quaternion(*x)))
        return _quat_vec(out)

    x0 = q.as_array()
    J = _real_jacobian(f, x0, STEP * (1 + np.abs(x0).max()))
    if np.abs(J.imag).max() > tol * (1 + np.abs(J).max()):
        raise NotConformal("map leaves the quaternion slice", op="conformal_factor")
    J = J.real
    M = J.T @ J
    lam = np.trace(M) / 4
    dev = np.abs(M - lam * np.eye(4)).max()
    if lam < 0 or dev > tol * max(lam, 1e-300):
        raise NotConformal("pullback metric is not a multiple of identity", op="conformal_factor", deviation=float(dev / max(lam, 1e-300)))
    return float(lam)
