"""Field strengths, potentials and congruences attached to a root branch.

Conventions (real slice, ``u=t+z, v=t-z, w=x-iy, p=x+iy``)::

    d_u = (d_t + d_z)/2    d_v = (d_t - d_z)/2
    d_w = (d_x + i d_y)/2  d_p = (d_x - i d_y)/2

Spinor strengths ``F_AB`` map to the complex 3-vector ``W`` by::

    F00 = Wx - i Wy,  F01 = -Wz,  F11 = -(Wx + i Wy)

The complex fields are ``E = W, H = iW`` (so ``E + iH = 0``) and the real
pair is ``E_re = Re W, H_re = -Im W``.  For the Kerr generating function at
``a = 0`` this yields the Coulomb field ``r/(4 r^3)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LogPole, NotNull, OnSingularLocus
from .polys import GeneratingPoly
from .twistor import SING_TOL, BranchSolution

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
LOG_TOL = 1e-12


@dataclass
class Derivs:
    """Implicit derivatives of one branch; index order ``(u, v, w, p)``."""

    G: np.ndarray
    P: np.ndarray
    dG: np.ndarray  # (4, ...)
    d2G: np.ndarray  # (4, 4, ...)
    fGG: np.ndarray
    grad: np.ndarray  # Pi_G, Pi_k0, Pi_k1
    hess: np.ndarray
    w: np.ndarray
    v: np.ndarray
    tsing: np.ndarray

    @property
    def singular(self):
        return np.abs(self.P) <= self.tsing

    def dlnG(self):
        return self.dG / self.G

    def d2lnG(self):
        G = self.G
        return (self.d2G * G - self.dG[:, None] * self.dG[None, :]) / G**2


def _coords(Z):
    if isinstance(Z, BranchSolution):
        Z = Z.Z
    if hasattr(Z, "u"):
        return tuple(np.asarray(c, dtype=complex) for c in (Z.u, Z.v, Z.w, Z.p))
    u, v, w, p = (np.asarray(c, dtype=complex) for c in Z)
    return u, v, w, p


def fiber_scale(Pi: GeneratingPoly, u, v, w, p):
    return np.abs(Pi.fiber_coeffs(u, v, w, p)).max(axis=-1)


def derivs_at(Pi: GeneratingPoly, u, v, w, p, G) -> Derivs:
    """Vectorized implicit derivatives of ``G`` defined by ``Pi(G, wG+u, vG+p) = 0``.

    No singularity check; points with ``|P|`` at the threshold give inf/nan.
    """
    u, v, w, p, G = np.broadcast_arrays(*(np.asarray(a, dtype=complex) for a in (u, v, w, p, G)))
    k0 = w * G + u
    k1 = v * G + p
    _, g, H = Pi.partials(G, k0, k1)
    one = np.ones_like(G)
    zero = np.zeros_like(G)
    # Jacobian of (G, k0, k1) over y = (G, u, v, w, p)
    J = np.array(
        [
            [one, zero, zero, zero, zero],
            [w, one, zero, G, zero],
            [v, zero, G, zero, one],
        ]
    )
    fy = np.einsum("m...,my...->y...", g, J)
    fyy = np.einsum("mn...,my...,nz...->yz...", H, J, J)
    # second derivatives of k0, k1 themselves: d2 k0/dG dw = 1, d2 k1/dG dv = 1
    fyy[0, 3] += g[1]
    fyy[3, 0] += g[1]
    fyy[0, 2] += g[2]
    fyy[2, 0] += g[2]
    P = fy[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        dG = -fy[1:] / P
        fGa = fyy[0, 1:]
        d2G = -(
            fyy[1:, 1:]
            + fGa[:, None] * dG[None, :]
            + fGa[None, :] * dG[:, None]
            + fyy[0, 0] * dG[:, None] * dG[None, :]
        ) / P
    tsing = SING_TOL * (1.0 + fiber_scale(Pi, u, v, w, p))
    return Derivs(G, P, dG, d2G, fyy[0, 0], g, H, w, v, tsing)


def implicit_derivatives(Pi: GeneratingPoly, branch: BranchSolution) -> Derivs:
    """First and second derivatives of one regular branch at its point."""
    if branch.at_infinity or branch.ill_conditioned:
        raise OnSingularLocus("branch point or root at infinity", op="implicit_derivatives", point=branch.Z, branch=branch.index)
    d = derivs_at(Pi, *_coords(branch), branch.G)
    if d.singular:
        raise OnSingularLocus("|P| below threshold", op="implicit_derivatives", point=branch.Z, branch=branch.index)
    return d


# -- strengths -----------------------------------------------------------------


def strength_ln_g(d: Derivs) -> np.ndarray:
    """``F00 = d_u d_p lnG, F11 = d_v d_w lnG, F01 = d_w d_p lnG`` as (..., 2, 2)."""
    L = d.d2lnG()
    F00, F11, F01 = L[0, 3], L[1, 2], L[2, 3]
    return np.stack([np.stack([F00, F01], -1), np.stack([F01, F11], -1)], -2)


def twistor_spinor(d: Derivs) -> np.ndarray:
    """``S^AB = (Pi_AB - D(Pi_A Pi_B / P)) / P`` with ``D = d_G + w d_k0 + v d_k1``.

    Built from exact partials of ``Pi`` only.  On a branch this equals
    ``-d_A d_B G`` with ``(d_0, d_1) = (d_u, d_p)``.
    """
    g, H, P = d.grad, d.hess, d.P
    PA = g[1:3]
    PAB = H[1:3, 1:3]
    DPA = H[0, 1:3] + d.w * H[1, 1:3] + d.v * H[2, 1:3]
    DP = d.fGG
    with np.errstate(divide="ignore", invalid="ignore"):
        S = (
            PAB
            - (DPA[:, None] * PA[None, :] + PA[:, None] * DPA[None, :]) / P
            + PA[:, None] * PA[None, :] * DP / P**2
        ) / P
    return S


def strength_twistor(d: Derivs) -> np.ndarray:
    """``F_AB`` from the twistor spinor ``S`` and first derivatives ``G_A = -Pi_A/P``.

    With ``G_up = -S^01``::

        F01 = G_up
        F00 = (G G_up - G_u G_p) / G^2
        F11 = G_u G_p + G G_up

    (the last uses ``G_w = G G_u`` and the wave equation).  When ``Pi`` is
    linear in ``k`` this reduces to ``F00 = S^11, F11 = S^00, F01 = -S^01``,
    which is also regular at ``G = 0``.
    """
    S = twistor_spinor(d)
    g, P, G = d.grad, d.P, d.G
    with np.errstate(divide="ignore", invalid="ignore"):
        Gu, Gp = -g[1] / P, -g[2] / P
        Gup = -S[0, 1]
        linear = np.all(d.hess[1:3, 1:3] == 0, axis=(0, 1))
        F00 = np.where(linear, S[1, 1], (G * Gup - Gu * Gp) / G**2)
        F11 = np.where(linear, S[0, 0], Gu * Gp + G * Gup)
    F01 = Gup
    return np.stack([np.stack([F00, F01], -1), np.stack([F01, F11], -1)], -2)


def em_strength(Pi: GeneratingPoly, branch, method: str = "ln_g", G=None) -> np.ndarray:
    """Spinor field strength ``F_AB`` (..., 2, 2) of a branch.

    ``branch`` is a :class:`BranchSolution`, a :class:`Derivs` bundle, or a
    coordinate tuple ``(u, v, w, p)`` together with ``G``.
    """
    if isinstance(branch, Derivs):
        d = branch
    elif isinstance(branch, BranchSolution):
        d = implicit_derivatives(Pi, branch)
    else:
        d = derivs_at(Pi, *_coords(branch), G)
    if np.any(d.singular):
        raise OnSingularLocus("field requested at a branch point", op="em_strength", method=method)
    if method == "ln_g":
        if np.any(np.abs(d.G) <= LOG_TOL):
            raise LogPole("G = 0: ln G is singular, use method='twistor'", op="em_strength")
        return strength_ln_g(d)
    if method == "twistor":
        if np.any((np.abs(d.G) <= LOG_TOL) & np.any(d.hess[1:3, 1:3] != 0, axis=(0, 1))):
            raise LogPole("G = 0 with curvature in k: field needs ln G", op="em_strength")
        return strength_twistor(d)
    raise ValueError(f"unknown method {method!r}")


def spinor_to_vector(F) -> np.ndarray:
    """``W`` (..., 3) from ``F_AB`` (..., 2, 2)."""
    F = np.asarray(F)
    F00, F01, F11 = F[..., 0, 0], F[..., 0, 1], F[..., 1, 1]
    return np.stack([(F00 - F11) / 2, 1j * (F00 + F11) / 2, -F01], -1)


def vector_to_spinor(W) -> np.ndarray:
    W = np.asarray(W)
    Wx, Wy, Wz = W[..., 0], W[..., 1], W[..., 2]
    F00, F01, F11 = Wx - 1j * Wy, -Wz, -(Wx + 1j * Wy)
    return np.stack([np.stack([F00, F01], -1), np.stack([F01, F11], -1)], -2)


@dataclass
class EHSplit:
    E: np.ndarray
    H: np.ndarray
    E_re: np.ndarray
    H_re: np.ndarray
    selfdual_residual: np.ndarray


def selfdual_residual(E, H, eps=1e-300):
    E, H = np.asarray(E), np.asarray(H)
    num = np.linalg.norm(E + 1j * H, axis=-1)
    return num / (np.linalg.norm(E, axis=-1) + np.linalg.norm(H, axis=-1) + eps)


def split_EH(F) -> EHSplit:
    W = spinor_to_vector(F)
    E, H = W, 1j * W
    return EHSplit(E, H, E.real, H.real, selfdual_residual(E, H))


# -- potentials ------------------------------------------------------------------


def psi_from_derivs(d: Derivs) -> np.ndarray:
    """``Psi_CA`` in the gauge ``xi0 = 1``: rows ``(0, 0)`` and ``(G_u, G_p)``."""
    zero = np.zeros_like(d.G)
    return np.stack([np.stack([zero, zero], -1), np.stack([d.dG[0], d.dG[3]], -1)], -2)


def psi_to_a(Psi) -> np.ndarray:
    """Coordinate components ``(a_t, a_x, a_y, a_z)`` of ``Psi_CA`` (..., 4)."""
    Psi = np.asarray(Psi)
    P00, P01, P10, P11 = Psi[..., 0, 0], Psi[..., 0, 1], Psi[..., 1, 0], Psi[..., 1, 1]
    return np.stack([(P00 + P11) / 2, (P01 + P10) / 2, 1j * (P01 - P10) / 2, (P00 - P11) / 2], -1)


def nabla_to_cartesian(D):
    """Map derivatives over ``(u, v, w, p)`` (leading axis) to ``(t, x, y, z)``."""
    Du, Dv, Dw, Dp = D[0], D[1], D[2], D[3]
    return np.stack([Du + Dv, Dw + Dp, -1j * (Dw - Dp), Du - Dv])


def potential_strength(d: Derivs):
    """``(E, H)`` of ``F = da`` built from the exact derivatives of ``Psi``.

    Independent of :func:`split_EH`: the self-duality ``E + iH = 0`` is an
    outcome of the branch equations here, not of the convention.
    """
    # a_t = G_p/2, a_x = G_u/2, a_y = -i G_u/2, a_z = -G_p/2 ; gradient along (u,v,w,p)
    Gu_b = d.d2G[0]
    Gp_b = d.d2G[3]
    da = np.stack([Gp_b / 2, Gu_b / 2, -0.5j * Gu_b, -Gp_b / 2])  # (nu, b, ...)
    da = np.stack([nabla_to_cartesian(da[n]) for n in range(4)], 1)  # (mu, nu, ...): d_mu a_nu
    F = da - np.swapaxes(da, 0, 1)
    E = np.stack([F[0, 1], F[0, 2], F[0, 3]], -1)
    H = np.stack([F[2, 3], F[3, 1], F[1, 2]], -1)
    return E, H


def lorentz_expression(a, da):
    """``d^mu a_mu + 2 a^mu a_mu`` from components (..., 4) and ``da[mu, nu] = d_mu a_nu``."""
    div = da[0, 0] - da[1, 1] - da[2, 2] - da[3, 3]
    sq = a[..., 0] ** 2 - a[..., 1] ** 2 - a[..., 2] ** 2 - a[..., 3] ** 2
    return div + 2 * sq


def fd_gradient(func, X, h, order=4):
    """Central-difference derivatives of ``func`` at real points ``X`` (..., 4).

    Returns ``D[mu] = d_mu func`` stacked on a new leading axis.
    """
    X = np.asarray(X, dtype=float)
    if order == 2:
        offs, wts = (1, -1), (0.5, -0.5)
    else:
        offs, wts = (2, 1, -1, -2), (-1 / 12, 8 / 12, -8 / 12, 1 / 12)
    out = []
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = h
        acc = 0
        for o, wgt in zip(offs, wts):
            acc = acc + wgt * np.asarray(func(X + o * e))
        out.append(acc / h)
    return np.stack(out)


def strength_from_potential(a_func, X, h=5e-3):
    """``(E, H)`` of ``F = da`` with ``a_func(X) -> (..., 4)`` differentiated numerically."""
    da = fd_gradient(a_func, X, h)  # (mu, ..., nu)
    da = np.moveaxis(da, -1, 1)
    F = da - np.swapaxes(da, 0, 1)
    E = np.stack([F[0, 1], F[0, 2], F[0, 3]], -1)
    H = np.stack([F[2, 3], F[3, 1], F[1, 2]], -1)
    return E, H


# -- congruence and Kerr-Schild ----------------------------------------------------


def congruence_tangent(G, conj_G=None):
    """Null tangent ``k^mu = xi^+ sigma_mu xi`` for ``xi = (1, G)``.

    Returns ``(k_vector, k_form)`` with the form lowered by ``eta``.
    """
    G = np.asarray(G, dtype=complex)
    Gb = np.conj(G) if conj_G is None else np.asarray(conj_G, dtype=complex)
    n = (G * Gb).real
    k = np.stack([1 + n, (G + Gb).real, ((G - Gb) / 1j).real, 1 - n], -1)
    return k, k * np.diag(ETA)


def minkowski_dot(a, b):
    return a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2] - a[..., 3] * b[..., 3]


@dataclass
class KerrSchildMetric:
    eta: np.ndarray
    h: float
    k: np.ndarray
    g: np.ndarray

    @property
    def det(self):
        return float(np.linalg.det(self.g))

    def null_residual(self):
        """``k`` contracted with the inverse of ``g`` (equals the flat value for null k)."""
        ginv = np.linalg.inv(self.g)
        return float(abs(self.k @ ginv @ self.k))


def kerr_schild_assemble(h, k, tol=1e-10) -> KerrSchildMetric:
    """``g = eta + h k k`` for a covariant null 4-vector ``k``."""
    k = np.asarray(k, dtype=float)
    norm = float(k @ ETA @ k)
    if abs(norm) > tol * max(1.0, float(k @ k)):
        raise NotNull("k is not null", op="kerr_schild_assemble", kk=norm)
    g = ETA + float(h) * np.outer(k, k)
    return KerrSchildMetric(ETA.copy(), float(h), k, g)


# -- class II potentials and the Lorentz condition ---------------------------------


def class2_potential(P1, P2, X, seed):
    """``a_mu`` (..., 4) at real points from the class II spinor system.

    Returns ``(a, xi)``; ``seed`` is broadcast against the points.
    """
    from .errors import NoConvergence
    from .twistor import class2_solve_batch, psi_potentials

    X = np.asarray(X, dtype=float)
    u, v, w, p = (X[..., 0] + X[..., 3], X[..., 0] - X[..., 3], X[..., 1] - 1j * X[..., 2], X[..., 1] + 1j * X[..., 2])
    Zm = np.stack([np.stack([u, w], -1), np.stack([p, v], -1)], -2)
    xi, conv, _ = class2_solve_batch(P1, P2, Zm, seed)
    if not conv.all():
        bad = np.argwhere(~conv)[0]
        raise NoConvergence("class II solve failed on a stencil point", op="class2_potential", point=X[tuple(bad)])
    return psi_to_a(psi_potentials(P1, P2, Zm, xi)), xi


def lorentz_residual(P1, P2, X, seed, h=1e-3):
    """Normalized ``|d^mu a_mu + 2 a^mu a_mu|`` with ``a`` from :func:`class2_potential`.

    Derivatives are fourth-order central differences of re-solved spinors.
    Returns ``(normalized, raw)``.
    """
    X = np.asarray(X, dtype=float)
    a, xi = class2_potential(P1, P2, X, seed)
    da = np.moveaxis(fd_gradient(lambda Y: class2_potential(P1, P2, Y, xi)[0], X, h), -1, 1)
    raw = lorentz_expression(a, da)
    scale = sum(np.abs(da[m, m]) for m in range(4)) + 2 * np.sum(np.abs(a) ** 2, -1)
    return np.abs(raw) / np.maximum(scale, 1e-300), raw


def gauge_gradient(d: Derivs, alpha: GeneratingPoly, u=None, p=None):
    """Cartesian gradient (..., 4) of ``ln alpha(G, k0, k1)`` along the branch.

    ``u`` and ``p`` are needed to rebuild ``k0 = wG + u`` and ``k1 = vG + p``.
    """
    G = d.G
    k0, k1 = d.w * G + u, d.v * G + p
    val = alpha(G, k0, k1)
    aG = alpha.derivative(G, k0, k1, (1, 0, 0))
    a0 = alpha.derivative(G, k0, k1, (0, 1, 0))
    a1 = alpha.derivative(G, k0, k1, (0, 0, 1))
    one, zero = np.ones_like(G), np.zeros_like(G)
    dk0 = d.w * d.dG + np.stack([one, zero, G, zero])
    dk1 = d.v * d.dG + np.stack([zero, G, zero, one])
    grad = (aG * d.dG + a0 * dk0 + a1 * dk1) / val
    return np.moveaxis(nabla_to_cartesian(grad), 0, -1)
