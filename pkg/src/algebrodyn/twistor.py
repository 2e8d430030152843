"""Kerr algebraic equation, root branches and class II spinor systems.

In the projective gauge ``xi0 = 1`` a twistor bound to the point ``Z`` has
components ``G = xi1, k0 = w G + u, k1 = v G + p``.  The Kerr equation
``Pi(G, wG+u, vG+p) = 0`` is a univariate polynomial in ``G`` at each point.
Roots whose leading coefficient vanishes sit at ``G = inf``; they are kept
and described in the other gauge ``xi1 = 1`` through ``H = 1/G``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .algebra import Biquat, SpacetimePoint, hermitian_embed
from .errors import BranchCollision, DegenerateAtPoint, NoConvergence, SingularJacobian, ValidationError
from .polys import GeneratingPoly, TwistorPoly

DEGENERATE_TOL = 1e-14
LEAD_TOL = 1e-13
SING_TOL = 1e-8
COND_MAX = 1e12


def as_biquat(Z) -> Biquat:
    if isinstance(Z, Biquat):
        return Z
    if isinstance(Z, SpacetimePoint):
        return hermitian_embed(Z)
    arr = np.asarray(Z)
    if arr.shape == (2, 2):
        return Biquat.from_matrix(arr)
    if arr.shape == (4,):
        return Biquat(*arr)
    raise ValidationError("cannot interpret point", point=Z)


def tol_sing(coeffs) -> float:
    """Branch-point threshold for ``|P|``, relative to the coefficient scale."""
    return SING_TOL * (1.0 + float(np.max(np.abs(coeffs))))


def chordal(a, b):
    """Chordal distance on the Riemann sphere; handles ``inf``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ia, ib = ~np.isfinite(a), ~np.isfinite(b)
    with np.errstate(invalid="ignore", over="ignore"):
        d = 2 * np.abs(a - b) / np.sqrt((1 + np.abs(a) ** 2) * (1 + np.abs(b) ** 2))
        da = 2 / np.sqrt(1 + np.abs(b) ** 2)
        db = 2 / np.sqrt(1 + np.abs(a) ** 2)
    d = np.where(ia & ib, 0.0, np.where(ia, da, np.where(ib, db, d)))
    return d


@dataclass(frozen=True)
class BranchSolution:
    """One root of the Kerr equation at one point.

    For ``at_infinity`` roots ``G`` is ``inf`` and ``P`` is the derivative in
    the reciprocal variable ``H = 1/G`` at ``H = 0``.
    """

    Z: Biquat
    index: int
    G: complex
    P: complex
    cond: float
    ill_conditioned: bool
    at_infinity: bool = False
    residual: float = 0.0

    @property
    def H(self) -> complex:
        return 0j if self.at_infinity else (np.inf if self.G == 0 else 1 / self.G)


def kerr_polynomial(Pi: GeneratingPoly, Z, tol: float = DEGENERATE_TOL) -> np.ndarray:
    """Ascending coefficients of ``Pi(G, wG+u, vG+p)`` at the point ``Z``."""
    Z = as_biquat(Z)
    coeffs = Pi.fiber_coeffs(Z.u, Z.v, Z.w, Z.p)
    scale = Pi.coefficient_scale() * (1.0 + Z.norm()) ** Pi.degree
    if np.max(np.abs(coeffs)) <= tol * scale:
        raise DegenerateAtPoint(
            "generating function vanishes identically on this fiber", op="kerr_polynomial", point=Z
        )
    return coeffs


def effective_degree(coeffs, tol=LEAD_TOL) -> int:
    c = np.abs(np.asarray(coeffs))
    big = np.nonzero(c > tol * c.max())[0]
    return int(big[-1]) if big.size else 0


def _horner(coeffs, x):
    f = 0j
    df = 0j
    for c in coeffs[::-1]:
        df = df * x + f
        f = f * x + c
    return f, df


def kerr_roots(Pi: GeneratingPoly, Z, tol: float = 1e-12) -> list:
    """All roots (with multiplicity) of the Kerr equation at ``Z``.

    Finite roots come first, sorted by (real, imag); roots at infinity follow.
    Each root is polished by Newton steps on the exact coefficients and
    flagged ``ill_conditioned`` when ``|P|`` is below the branch-point
    threshold.
    """
    Z = as_biquat(Z)
    coeffs = kerr_polynomial(Pi, Z)
    n = len(coeffs) - 1
    m = effective_degree(coeffs)
    ts = tol_sing(coeffs)
    absc = np.abs(coeffs)
    out = []
    if m >= 1:
        roots, _ = kernels.polyroots(coeffs[None, : m + 1])
        for G in roots[0]:
            G = complex(G)
            for _ in range(3):
                f, df = _horner(coeffs[: m + 1], G)
                if df == 0 or abs(f) <= tol * (absc @ np.abs(G) ** np.arange(n + 1)):
                    break
                step = f / df
                if abs(step) > 1e-6 * (1 + abs(G)):
                    break  # cluster: Newton would jump between roots
                G -= step
            f, P = _horner(coeffs[: m + 1], G)
            size = float(absc @ (abs(G) ** np.arange(n + 1)))
            cond = size / abs(P) if P != 0 else np.inf
            out.append((G, P, cond, abs(P) < ts, abs(f) / max(size, 1e-300)))
    out.sort(key=lambda r: (r[0].real, r[0].imag))
    sols = [
        BranchSolution(Z, k, G, P, cond, bool(ill), False, res)
        for k, (G, P, cond, ill, res) in enumerate(out)
    ]
    # roots at infinity: reversed polynomial in H = 1/G vanishes at H = 0
    if n > m:
        Ph = coeffs[n - 1] if n - m == 1 else 0j
        for k in range(n - m):
            sols.append(
                BranchSolution(
                    Z, len(sols), complex(np.inf), complex(Ph), np.inf if Ph == 0 else absc.max() / abs(Ph),
                    bool(abs(Ph) < ts), True, 0.0,
                )
            )
    return sols


def roots_batch(Pi: GeneratingPoly, u, v, w, p):
    """Vectorized roots on arrays of points.

    Returns
    -------
    roots : (..., n) complex, sorted per point; ``inf`` marks roots at infinity
    P : (..., n) complex, ``dPi/dG`` at each root (nan at infinity)
    tsing : (...) float, the branch-point threshold at each point
    ok : (...) bool, solver converged and the fiber is not degenerate
    """
    coeffs = Pi.fiber_coeffs(u, v, w, p)
    shape = coeffs.shape[:-1]
    n = coeffs.shape[-1] - 1
    flat = coeffs.reshape(-1, n + 1)
    roots, conv = kernels.polyroots(flat)
    finite = np.isfinite(roots)
    safe = np.where(finite, roots, 0)
    f, df = kernels.horner_batch(flat, safe)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(df != 0, f / df, 0)
    good = finite & np.isfinite(step) & (np.abs(step) < 1e-6 * (1 + np.abs(safe)))
    safe = np.where(good, safe - step, safe)
    _, df = kernels.horner_batch(flat, safe)
    roots = np.where(finite, safe, roots)
    P = np.where(finite, df, np.nan)
    tsing = SING_TOL * (1.0 + np.abs(flat).max(axis=1))
    return (
        roots.reshape(shape + (n,)),
        P.reshape(shape + (n,)),
        tsing.reshape(shape),
        conv.reshape(shape),
    )


# -- continuation -------------------------------------------------------------


@dataclass
class BranchPath:
    """Samples of one branch along a path; ``crossing`` marks an aborted run."""

    samples: list = field(default_factory=list)
    crossing: int | None = None

    @property
    def G(self):
        return np.array([s.G for s in self.samples])


def _select(sols, G_prev):
    Gs = np.array([s.G for s in sols])
    d = chordal(Gs, G_prev)
    k = int(np.argmin(d))
    if len(Gs) > 1:
        gaps = chordal(Gs[:, None], Gs[None, :])
        gaps[np.diag_indices(len(Gs))] = np.inf
        gap = float(gaps.min())
    else:
        gap = np.inf
    return sols[k], float(d[k]), gap


def branch_track(Pi: GeneratingPoly, path, seed: BranchSolution, max_depth: int = 30) -> BranchPath:
    """Continue ``seed`` along ``path`` choosing the nearest root at each step.

    A step is bisected whenever the nearest root is farther than half the
    smallest gap between roots.  Reaching a point with ``|P|`` below the
    branch-point threshold ends the run and records the path index in
    ``crossing``; if bisection cannot separate the roots the step raises
    :class:`BranchCollision`.
    """
    pts = [as_biquat(Z) for Z in path]
    if not pts:
        return BranchPath()
    result = BranchPath([seed])
    if seed.ill_conditioned:
        result.crossing = 0
        return result

    def lerp(a, b, s):
        return Biquat(*(x + s * (y - x) for x, y in zip((a.u, a.v, a.w, a.p), (b.u, b.v, b.w, b.p))))

    def advance(Za, Ga, Zb, depth):
        sol, d, gap = _select(kerr_roots(Pi, Zb), Ga)
        if sol.ill_conditioned or d <= 0.5 * gap:
            return sol
        if depth >= max_depth:
            raise BranchCollision(
                "bisection reached the minimum step near a branch point",
                op="branch_track", point=Zb, branch=seed.index,
            )
        Zm = lerp(Za, Zb, 0.5)
        mid = advance(Za, Ga, Zm, depth + 1)
        if mid.ill_conditioned:
            return mid
        return advance(Zm, mid.G, Zb, depth + 1)

    current = seed
    for i, Zb in enumerate(pts[1:], start=1):
        nxt = advance(pts[i - 1], current.G, Zb, 0)
        if nxt.ill_conditioned:
            result.crossing = i
            result.samples.append(nxt)
            break
        result.samples.append(nxt)
        current = nxt
    return result


# -- class II systems ---------------------------------------------------------


@dataclass(frozen=True)
class Class2Solution:
    xi: np.ndarray
    Q: np.ndarray
    cond: float
    iterations: int


def _zmat(Z):
    Z = np.asarray(Z, dtype=complex)
    if Z.shape[-1] == 4 and Z.shape[-2:] != (2, 2):
        u, v, w, p = np.moveaxis(Z, -1, 0)
        Z = np.stack([np.stack([u, w], -1), np.stack([p, v], -1)], -2)
    return Z


def _system(P1: TwistorPoly, P2: TwistorPoly, Zm, xi):
    """Residual (..., 2), Jacobian Q (..., 2, 2) and d/dkappa (..., 2, 2)."""
    k = np.einsum("...ab,...b->...a", Zm, xi)
    args = (xi[..., 0], xi[..., 1], k[..., 0], k[..., 1])
    F = np.stack([P1(*args), P2(*args)], -1)
    g = np.stack([np.moveaxis(P1.grad(*args), 0, -1), np.moveaxis(P2.grad(*args), 0, -1)], -2)
    dxi = g[..., :2]
    dk = g[..., 2:]
    Q = dxi + np.einsum("...da,...ac->...dc", dk, Zm)
    return F, Q, dk


def class2_solve_batch(P1, P2, Z, seed, tol=1e-12, maxiter=50):
    """Newton solve of ``P1 = P2 = 0`` over a batch of points.

    ``Z`` is (N, 2, 2) or (N, 4) as ``(u, v, w, p)``; ``seed`` is (N, 2).
    Returns ``(xi, converged, cond)``.
    """
    Zm = _zmat(Z)
    xi = np.array(np.broadcast_to(seed, Zm.shape[:-2] + (2,)), dtype=complex)
    done = np.zeros(Zm.shape[:-2], dtype=bool)
    for _ in range(maxiter):
        F, Q, _ = _system(P1, P2, Zm, xi)
        with np.errstate(all="ignore"):
            try:
                step = np.linalg.solve(Q, F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.full_like(xi, np.nan)
                for idx in np.ndindex(Q.shape[:-2]):
                    try:
                        step[idx] = np.linalg.solve(Q[idx], F[idx])
                    except np.linalg.LinAlgError:
                        pass
        xi = np.where(done[..., None], xi, xi - step)
        small = np.max(np.abs(step), -1) <= tol * (1 + np.max(np.abs(xi), -1))
        done = done | (small & np.isfinite(xi).all(-1))
        if done.all():
            break
    F, Q, _ = _system(P1, P2, Zm, xi)
    scale = 1 + np.max(np.abs(xi), -1)
    converged = done & (np.max(np.abs(F), -1) <= 1e3 * tol * scale**2)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(Q) if Q.ndim > 2 else np.array(np.linalg.cond(Q))
    return xi, converged, np.where(np.isfinite(cond), cond, np.inf)


def class2_solve(P1: TwistorPoly, P2: TwistorPoly, Z, seed, tol=1e-12, maxiter=50) -> Class2Solution:
    """Solve the two constraints ``P^(D)(xi, Z xi) = 0`` for the spinor ``xi``."""
    Zm = as_biquat(Z).matrix
    xi = np.asarray(seed, dtype=complex).copy()
    for it in range(1, maxiter + 1):
        F, Q, _ = _system(P1, P2, Zm, xi)
        if not np.all(np.isfinite(F)) or not np.all(np.isfinite(Q)):
            break
        try:
            step = np.linalg.solve(Q, F)
        except np.linalg.LinAlgError:
            raise SingularJacobian("Q matrix is singular during Newton", op="class2_solve", point=Z, xi=xi)
        xi = xi - step
        if np.max(np.abs(step)) <= tol * (1 + np.max(np.abs(xi))):
            F, Q, _ = _system(P1, P2, Zm, xi)
            cond = float(np.linalg.cond(Q))
            if not np.isfinite(cond) or cond > COND_MAX:
                raise SingularJacobian("Q matrix not invertible at the root", op="class2_solve", point=Z, cond=cond)
            return Class2Solution(xi, Q, cond, it)
    raise NoConvergence("Newton did not converge", op="class2_solve", point=Z, seed=tuple(seed), iterations=maxiter)


def psi_potentials(P1: TwistorPoly, P2: TwistorPoly, Z, xi) -> np.ndarray:
    """``Psi_CA = -sum_D (Q^-1)_CD dPi^(D)/dk^A``, so that ``d_AB xi_C = Psi_CA xi_B``.

    Broadcasts over leading axes of ``Z`` ((..., 2, 2) or (..., 4)) and ``xi``.
    """
    Zm = _zmat(as_biquat(Z).matrix if isinstance(Z, (Biquat, SpacetimePoint)) else Z)
    xi = np.asarray(xi, dtype=complex)
    _, Q, dk = _system(P1, P2, Zm, xi)
    cond = np.linalg.cond(Q)
    if np.any(~np.isfinite(cond) | (cond > COND_MAX)):
        raise SingularJacobian("Q matrix not invertible", op="psi_potentials", cond=float(np.max(cond)))
    return -np.linalg.solve(Q, dk)


# -- class II eikonal ---------------------------------------------------------


def eikonal_class2(Pi: GeneratingPoly, Z) -> list:
    """Stationary values ``Sigma = Pi(G*)`` at the roots of ``dPi/dG``.

    Returns a list of ``(G*, Sigma)`` pairs sorted by ``G*``.
    """
    Z = as_biquat(Z)
    coeffs = kerr_polynomial(Pi, Z)
    d = coeffs[1:] * np.arange(1, len(coeffs))
    scale = np.max(np.abs(coeffs))
    if d.size == 0 or np.max(np.abs(d)) <= DEGENERATE_TOL * scale:
        raise DegenerateAtPoint("generating function does not depend on G here", op="eikonal_class2", point=Z)
    m = effective_degree(d)
    if m == 0:
        raise DegenerateAtPoint("dPi/dG has no finite root", op="eikonal_class2", point=Z)
    roots, _ = kernels.polyroots(d[None, : m + 1])
    return [(complex(G), complex(np.polyval(coeffs[::-1], G))) for G in roots[0]]


def sigma_gradient(Pi: GeneratingPoly, Z, G) -> np.ndarray:
    """Gradient of the stationary value over ``(u, v, w, p)`` at ``G*``.

    Since ``dPi/dG`` vanishes at ``G*`` only the explicit dependence counts:
    ``(Pi_0, G Pi_1, G Pi_0, Pi_1)``.
    """
    Z = as_biquat(Z)
    k0, k1 = Z.w * G + Z.u, Z.v * G + Z.p
    P0 = complex(Pi.derivative(G, k0, k1, (0, 1, 0)))
    P1 = complex(Pi.derivative(G, k0, k1, (0, 0, 1)))
    return np.array([P0, G * P1, G * P0, P1])
