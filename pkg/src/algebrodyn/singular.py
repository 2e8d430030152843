"""Singular loci (branch points of the Kerr equation) and flux charge audits."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .algebra import embed_coords
from .errors import DegenerateResultant, EmptyLocus, SphereIntersectsLocus, ValidationError
from .fields import derivs_at, spinor_to_vector, strength_twistor
from .grid import GridSpec, track_cloud
from .polys import GeneratingPoly
from .twistor import roots_batch

ZERO_TOL = 1e-13
LEBEDEV_ORDERS = (
    (3, 6), (5, 14), (7, 26), (9, 38), (11, 50), (13, 74), (15, 86), (17, 110),
    (19, 146), (21, 170), (23, 194), (25, 230), (27, 266), (29, 302), (31, 350), (35, 434),
    (41, 590), (47, 770), (53, 974), (59, 1202), (65, 1454), (71, 1730), (77, 2030), (83, 2354),
    (89, 2702), (95, 3074), (101, 3470), (107, 3890), (113, 4334), (119, 4802), (125, 5294), (131, 5810),
)
MIN_LEBEDEV_ORDER = 35


# -- resultant ------------------------------------------------------------------


@dataclass
class LocusCondition:
    """Polynomial condition on ``(u, v, w, p)`` whose zero set is the branch locus.

    For fibers of degree >= 2 this is the discriminant in ``G`` (the resultant
    of the fiber polynomial and its derivative divided by the leading
    coefficient); for degree 1 it is the leading coefficient.
    """

    expr: object
    degree: int
    _f: object = field(repr=False, default=None)
    _grad: object = field(repr=False, default=None)

    def __call__(self, u, v, w, p):
        u, v, w, p = np.broadcast_arrays(*(np.asarray(a, dtype=complex) for a in (u, v, w, p)))
        return np.broadcast_to(self._f(u, v, w, p), u.shape).astype(complex)

    def real_slice(self, t, x, y, z):
        return self(*embed_coords(t, x, y, z))

    def real_gradient(self, t, x, y, z):
        """Spatial gradient ``d/dx, d/dy, d/dz`` on the real slice, shape (3, ...)."""
        u, v, w, p = (np.asarray(a, dtype=complex) for a in embed_coords(t, x, y, z))
        u, v, w, p = np.broadcast_arrays(u, v, w, p)
        du, dv, dw, dp = (np.broadcast_to(g, u.shape) for g in self._grad(u, v, w, p))
        return np.stack([dw + dp, -1j * dw + 1j * dp, du - dv])


def _fiber_expr(Pi: GeneratingPoly):
    import sympy as sp

    G, u, v, w, p = sp.symbols("G u v w p")
    expr = sum(
        sp.sympify(complex(c)) * G**i * (w * G + u) ** j * (v * G + p) ** k for i, j, k, c in Pi.terms
    )
    return sp.expand(expr), (G, u, v, w, p)


def _chop(expr, syms, scale):
    import sympy as sp

    poly = sp.Poly(sp.expand(expr), *syms)
    kept = [(m, c) for m, c in poly.terms() if abs(complex(c)) > ZERO_TOL * scale]
    if not kept:
        return sp.Integer(0)
    return sum(sp.sympify(complex(c)) * sp.prod([s**e for s, e in zip(syms, m)]) for m, c in kept)


def locus_resultant(Pi: GeneratingPoly) -> LocusCondition:
    return _locus_resultant_cached(Pi)


def _generic_symbols(deg):
    import sympy as sp

    return sp.symbols(f"c0:{deg + 1}")


@lru_cache(maxsize=8)
def _generic_discriminant(deg):
    # exact integer-coefficient discriminant; floating coefficients are substituted
    # afterwards since sympy's division-based algorithms fail over inexact domains
    import sympy as sp

    c = _generic_symbols(deg)
    x = sp.Symbol("x")
    return sp.discriminant(sum(ci * x**i for i, ci in enumerate(c)), x)


@lru_cache(maxsize=32)
def _locus_resultant_cached(Pi: GeneratingPoly) -> LocusCondition:
    import sympy as sp

    expr, (G, u, v, w, p) = _fiber_expr(Pi)
    coords = (u, v, w, p)
    scale = Pi.coefficient_scale()
    poly = sp.Poly(_chop(expr, (G,) + coords, scale), G)
    deg = poly.degree()
    if deg < 1:
        raise DegenerateResultant("fiber polynomial does not depend on G", op="locus_resultant")
    if deg == 1:
        cond = poly.LC()
    else:
        cond = sp.expand(_generic_discriminant(deg).subs(dict(zip(_generic_symbols(deg), poly.all_coeffs()[::-1])), simultaneous=True))
    cond = _chop(cond, coords, scale ** (2 * deg - 2) if deg > 1 else scale)
    if cond == 0:
        raise DegenerateResultant("resultant vanishes identically (repeated factor in G)", op="locus_resultant")
    f = sp.lambdify(coords, cond, "numpy")
    grad = sp.lambdify(coords, [sp.diff(cond, s) for s in coords], "numpy")
    return LocusCondition(cond, deg, f, grad)


# -- locus extraction -------------------------------------------------------------


@dataclass
class LocusCloud:
    t: float
    points: np.ndarray  # (N, 3)
    residual: np.ndarray  # (N, 2): |Pi|, |P|
    G: np.ndarray
    tol: float
    labels: np.ndarray
    dims: dict
    spacing: float = float("nan")

    @property
    def n_components(self):
        return len(self.dims)

    def component(self, k):
        return self.points[self.labels == k]

    def centroids(self):
        return np.array([self.component(k).mean(axis=0) for k in range(self.n_components)])

    def to_csv(self, path_or_buf):
        from .residuals import fmt

        lines = ["t,x,y,z,component,dim"]
        for (x, y, z), lab in zip(self.points, self.labels):
            lines.append(",".join([fmt(self.t), fmt(x), fmt(y), fmt(z), str(int(lab)), str(self.dims[int(lab)])]))
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)

    def to_dict(self):
        return {
            "t": self.t,
            "tol": self.tol,
            "components": [
                {"id": k, "dim": self.dims[k], "count": int(np.sum(self.labels == k)), "centroid": self.component(k).mean(axis=0).tolist()}
                for k in range(self.n_components)
            ],
            "points": self.points.tolist(),
            "labels": self.labels.tolist(),
            "residual": self.residual.tolist(),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def _joint_system(Pi: GeneratingPoly, t, X, G):
    """``Pi`` and ``P`` with their derivatives over ``(x, y, z, G)`` at fixed ``t``."""
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    u, v, w, p = embed_coords(t, x, y, z)
    k0 = w * G + u
    k1 = v * G + p
    val, g, H = Pi.partials(G, k0, k1)
    PG, P0, P1 = g
    P = PG + w * P0 + v * P1
    # d(k0, k1)/d(x, y, z) and d(w, v)/d(x, y, z)
    one = np.ones_like(G)
    zero = np.zeros_like(G)
    dk0 = np.stack([G, -1j * G, one])
    dk1 = np.stack([one, 1j * one, -G])
    dw = np.stack([one, -1j * one, zero])
    dv = np.stack([zero, zero, -one])
    dPi_dX = P0 * dk0 + P1 * dk1
    A0 = H[0, 1] + w * H[1, 1] + v * H[2, 1]
    A1 = H[0, 2] + w * H[1, 2] + v * H[2, 2]
    dP_dX = A0 * dk0 + A1 * dk1 + P0 * dw + P1 * dv
    dP_dG = H[0, 0] + 2 * w * H[0, 1] + 2 * v * H[0, 2] + w * w * H[1, 1] + 2 * w * v * H[1, 2] + v * v * H[2, 2]
    return val, P, dPi_dX, dP_dX, P, dP_dG


def refine_locus(Pi: GeneratingPoly, t, X, G, tol=1e-12, maxiter=60, fix_z=False):
    """Gauss-Newton on ``(Re Pi, Im Pi, Re P, Im P)`` over ``(x, y, z, Re G, Im G)``.

    Minimum-norm steps move each seed to a nearby locus point.  Returns
    ``(X, G, residual (N, 2), converged)``.
    """
    X = np.array(X, dtype=float, copy=True)
    G = np.array(G, dtype=complex, copy=True)
    scale = Pi.coefficient_scale()
    ncol = 4 if fix_z else 5
    for _ in range(maxiter):
        val, P, dPiX, dPX, dPiG, dPG = _joint_system(Pi, t, X, G)
        size = scale * (1 + np.abs(X).max(axis=1)) ** Pi.degree * (1 + np.abs(G)) ** Pi.degree
        done = (np.abs(val) <= tol * size) & (np.abs(P) <= tol * size)
        if done.all():
            break
        cols_pi = [dPiX[0], dPiX[1]] + ([] if fix_z else [dPiX[2]]) + [dPiG, 1j * dPiG]
        cols_p = [dPX[0], dPX[1]] + ([] if fix_z else [dPX[2]]) + [dPG, 1j * dPG]
        J = np.empty((len(G), 4, ncol))
        for c, (a, b) in enumerate(zip(cols_pi, cols_p)):
            J[:, 0, c], J[:, 1, c] = a.real, a.imag
            J[:, 2, c], J[:, 3, c] = b.real, b.imag
        F = np.stack([val.real, val.imag, P.real, P.imag], -1)
        with np.errstate(all="ignore"):
            step = -np.einsum("nij,nj->ni", np.linalg.pinv(J, rcond=1e-12), F)
        step = np.where(np.isfinite(step), step, 0.0)
        step[done] = 0.0
        # cap the step to keep seeds local
        big = np.linalg.norm(step, axis=1)
        cap = 0.5 * (1 + np.abs(X).max(axis=1))
        step *= np.minimum(1.0, cap / np.maximum(big, 1e-300))[:, None]
        if fix_z:
            X[:, :2] += step[:, :2]
        else:
            X += step[:, :3]
        G += step[:, -2] + 1j * step[:, -1]
    val, P, *_ = _joint_system(Pi, t, X, G)
    size = scale * (1 + np.abs(X).max(axis=1)) ** Pi.degree * (1 + np.abs(G)) ** Pi.degree
    res = np.stack([np.abs(val), np.abs(P)], -1)
    ok = (res[:, 0] <= tol * size * 10) & (res[:, 1] <= tol * size * 10) & np.isfinite(G)
    return X, G, res, ok


def _seed_G(Pi, t, X):
    u, v, w, p = embed_coords(t, X[:, 0], X[:, 1], X[:, 2])
    roots, _, _, _ = roots_batch(Pi, u, v, w, p)
    n = roots.shape[-1]
    if n < 2:
        return np.where(np.isfinite(roots[:, 0]), roots[:, 0], 0)
    best = np.full(len(X), np.inf)
    G0 = np.zeros(len(X), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            with np.errstate(invalid="ignore"):
                d = np.abs(roots[:, i] - roots[:, j])
                mid = 0.5 * (roots[:, i] + roots[:, j])
            better = np.isfinite(d) & (d < best)
            best = np.where(better, d, best)
            G0 = np.where(better, mid, G0)
    return G0


def _components(points, link):
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    from scipy.spatial import cKDTree

    n = len(points)
    pairs = cKDTree(points).query_pairs(link, output_type="ndarray")
    A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(A, directed=False)
    # relabel by size (largest first), ties by centroid for determinism
    ids = np.unique(labels)
    order = sorted(ids, key=lambda k: (-np.sum(labels == k), tuple(np.round(points[labels == k].mean(0), 9))))
    remap = {k: i for i, k in enumerate(order)}
    return np.array([remap[k] for k in labels], dtype=np.int64)


def estimate_dimension(points, h):
    """0 (point), 1 (curve) or 2 (surface) from local PCA at radius ``10 h``."""
    from scipy.spatial import cKDTree

    pts = np.asarray(points)
    extent = np.ptp(pts, axis=0).max() if len(pts) else 0.0
    if len(pts) < 3 or extent < 2 * h:
        return 0
    r = min(10 * h, extent / 4)
    tree = cKDTree(pts)
    probe = pts[:: max(1, len(pts) // 64)]
    dims = []
    for q in probe:
        nb = pts[tree.query_ball_point(q, r)]
        if len(nb) < 3:
            continue
        sv = np.linalg.svd(nb - nb.mean(0), compute_uv=False) / np.sqrt(len(nb))
        dims.append(int(np.sum(sv > 0.25 * sv[0])) if sv[0] > h / 4 else 0)
    if not dims:
        return 0
    return int(np.clip(np.round(np.median(dims)), 0, 3))


def _dedupe(X, G, res, spacing):
    key = np.round(X / (1e-3 * spacing)).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    idx = np.sort(idx)
    return X[idx], G[idx], res[idx]


def locus_scan(Pi: GeneratingPoly, grid: GridSpec, t=None, tol=1e-12, fix_z=None, condition=None) -> LocusCloud:
    """Seed cells near the zero set of the discriminant, refine, cluster.

    ``fix_z`` restricts the search to the plane ``z = fix_z`` (a 2-D scan
    over the grid's x, y axes).
    """
    t = grid.times[0] if t is None else float(t)
    cond = condition or locus_resultant(Pi)
    x, y, z = grid.axes()
    if fix_z is not None:
        z = np.array([float(fix_z)])
    hs = [a[1] - a[0] for a in (x, y)] + ([] if fix_z is not None else [z[1] - z[0]])
    h = max(hs)
    seeds = []
    for k0 in range(0, len(x), max(1, 2**16 // (len(y) * len(z)))):
        xs = x[k0 : k0 + max(1, 2**16 // (len(y) * len(z)))]
        X, Y, Zc = np.meshgrid(xs, y, z, indexing="ij")
        D = cond.real_slice(t, X, Y, Zc)
        gD = cond.real_gradient(t, X, Y, Zc)
        if fix_z is not None:
            gD = gD[:2]
        gn = np.sqrt(np.sum(np.abs(gD) ** 2, axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(gn > 0, np.abs(D) / gn, np.where(np.abs(D) == 0, 0.0, np.inf))
        sel = dist <= 1.5 * h
        seeds.append(np.stack([X[sel], Y[sel], Zc[sel]], -1))
    seeds = np.concatenate(seeds) if seeds else np.zeros((0, 3))
    if len(seeds) == 0:
        raise EmptyLocus("no grid cell lies near the branch locus", op="locus_scan", t=t)
    G0 = _seed_G(Pi, t, seeds)
    Xr, Gr, res, ok = refine_locus(Pi, t, seeds, G0, tol=tol, fix_z=fix_z is not None)
    lo = np.array([b[0] for b in grid.bounds]) - 2 * h
    hi = np.array([b[1] for b in grid.bounds]) + 2 * h
    inside = np.all((Xr >= lo) & (Xr <= hi), axis=1)
    keep = ok & inside
    if not keep.any():
        raise EmptyLocus("refinement found no locus point in the grid", op="locus_scan", t=t)
    Xr, Gr, res = _dedupe(Xr[keep], Gr[keep], res[keep], h)
    labels = _components(Xr, 3 * h)
    dims = {k: estimate_dimension(Xr[labels == k], h) for k in range(labels.max() + 1)}
    return LocusCloud(t, Xr, res, Gr, tol, labels, dims, h)


def cross_section_radii(cloud: LocusCloud, z0=0.0, ztol=1e-6, gap=None):
    """Distinct cylindrical radii of locus points with ``|z - z0| < ztol``."""
    pts = cloud.points[np.abs(cloud.points[:, 2] - z0) < ztol]
    if len(pts) == 0:
        return np.array([])
    rho = np.sort(np.hypot(pts[:, 0], pts[:, 1]))
    gap = gap or 2 * cloud.spacing
    breaks = np.nonzero(np.diff(rho) > gap)[0]
    groups = np.split(rho, breaks + 1)
    return np.array([np.median(g) for g in groups])


def locus_evolve(Pi: GeneratingPoly, grid: GridSpec, times=None, tol=1e-12):
    """Per-time scans; components carry a ``track`` id matched by nearest centroid."""
    times = grid.times if times is None else tuple(times)
    cond = locus_resultant(Pi)
    clouds = []
    prev = None
    next_id = 0
    for t in times:
        try:
            c = locus_scan(Pi, grid, t, tol, condition=cond)
        except EmptyLocus:
            clouds.append(None)
            prev = None
            continue
        cents = c.centroids()
        tracks = {}
        if prev is not None:
            pc, pids = prev
            for k, cen in enumerate(cents):
                j = int(np.argmin(np.linalg.norm(pc - cen, axis=1)))
                if pids[j] not in tracks.values():
                    tracks[k] = pids[j]
        for k in range(len(cents)):
            if k not in tracks:
                tracks[k] = next_id
                next_id += 1
        next_id = max(next_id, max(tracks.values()) + 1)
        c.tracks = tracks
        clouds.append(c)
        prev = (cents, [tracks[k] for k in range(len(cents))])
    return clouds


# -- charge audits --------------------------------------------------------------------


@dataclass
class ChargeAudit:
    center: tuple
    radius: float
    nodes: int
    q: float
    N: int
    deviation: float

    @property
    def quantum(self):
        return self.N / 4

    def to_dict(self):
        return {
            "center": list(self.center),
            "radius": self.radius,
            "nodes": self.nodes,
            "q": self.q,
            "N": self.N,
            "nearest_quantum": self.quantum,
            "deviation": self.deviation,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


# fixed generic rotation: keeps Lebedev nodes off the coordinate axes, where
# Kerr-type branches take the values 0 and infinity
_ROT = None


def _node_rotation():
    global _ROT
    if _ROT is None:
        from scipy.spatial.transform import Rotation

        _ROT = Rotation.from_euler("zyz", [0.3141592653589793, 0.2718281828459045, 0.5772156649015329]).as_matrix()
    return _ROT


def sphere_nodes(nodes=5810):
    """Lebedev nodes (rotated) and weights summing to 4 pi; smallest rule with >= ``nodes`` points."""
    from scipy.integrate import lebedev_rule

    for order, m in LEBEDEV_ORDERS:
        if m >= nodes and order >= MIN_LEBEDEV_ORDER:
            break
    else:
        if nodes > LEBEDEV_ORDERS[-1][1]:
            return _product_nodes(nodes)
    x, w = lebedev_rule(order)
    return (_node_rotation() @ x).T, w


def _product_nodes(nodes):
    """Gauss-Legendre x uniform longitude product rule."""
    n_th = int(np.ceil(np.sqrt(nodes / 2)))
    mu, wm = np.polynomial.legendre.leggauss(n_th)
    n_ph = 2 * n_th
    ph = 2 * np.pi * (np.arange(n_ph) + 0.5) / n_ph
    M, PH = np.meshgrid(mu, ph, indexing="ij")
    st = np.sqrt(1 - M**2)
    pts = np.stack([st * np.cos(PH), st * np.sin(PH), M], -1).reshape(-1, 3)
    w = (wm[:, None] * np.full(n_ph, 2 * np.pi / n_ph)).reshape(-1)
    return pts, w


def flux(field, center, radius, nodes=5810):
    """``(1/4 pi) * closed-surface integral of E . n``; ``field(points (N, 3)) -> (N, 3)``."""
    n, w = sphere_nodes(nodes)
    pts = np.asarray(center, dtype=float) + radius * n
    E = np.asarray(field(pts))
    return float(radius**2 * np.sum(w * np.sum(E * n, axis=1)) / (4 * np.pi)), len(w)


def audit(q, center, radius, nodes) -> ChargeAudit:
    N = int(np.round(4 * q))
    return ChargeAudit(tuple(float(c) for c in center), float(radius), int(nodes), float(q), N, abs(q - N / 4))


def charge_flux(field, center=(0.0, 0.0, 0.0), radius=2.0, nodes=5810) -> ChargeAudit:
    """Flux audit for an arbitrary real field sampler."""
    if radius <= 0:
        raise ValidationError("radius must be positive", radius=radius)
    q, m = flux(field, center, radius, nodes)
    if not np.isfinite(q):
        raise SphereIntersectsLocus("field is not finite on the sphere", op="charge_flux", radius=radius)
    return audit(q, center, radius, m)


def locus_distance(Pi: GeneratingPoly, t, pts):
    """First-order distance estimate ``|D| / |grad D|`` to the branch locus."""
    try:
        cond = locus_resultant(Pi)
    except DegenerateResultant:
        return np.full(len(pts), np.inf)
    tt = np.full(len(pts), float(t))
    D = cond.real_slice(tt, pts[:, 0], pts[:, 1], pts[:, 2])
    g = cond.real_gradient(tt, pts[:, 0], pts[:, 1], pts[:, 2])
    gn = np.sqrt(np.sum(np.abs(g) ** 2, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(gn > 0, np.abs(D) / gn, np.where(D == 0, 0.0, np.inf))


def _check_clearance(Pi, t, pts, factor=2.0):
    """Raise when sample points come within a few node spacings of the locus."""
    if len(pts) < 4:
        return
    from scipy.spatial import cKDTree

    spacing = float(np.median(cKDTree(pts).query(pts, k=2)[0][:, 1]))
    dist = locus_distance(Pi, t, pts)
    k = int(np.argmin(dist))
    if dist[k] < factor * spacing:
        raise SphereIntersectsLocus(
            "integration surface passes too close to the branch locus",
            op="branch_field", point=pts[k].tolist(), t=t, distance=float(dist[k]),
        )


def branch_field_on_points(Pi: GeneratingPoly, t, pts, seed_value=0j, seed_point=None, margin=1e-6):
    """Real fields of one continued branch on scattered points.

    The branch is fixed by the root nearest ``seed_value`` at the point
    closest to ``seed_point`` (default: the point with the largest z) and
    continued over a nearest-neighbour graph.
    """
    pts = np.asarray(pts, dtype=float)
    u, v, w, p = embed_coords(np.full(len(pts), float(t)), pts[:, 0], pts[:, 1], pts[:, 2])
    roots, P, tsing, ok = roots_batch(Pi, u, v, w, p)
    if seed_point is None:
        seed = int(np.argmax(pts[:, 2]))
    else:
        seed = int(np.argmin(np.linalg.norm(pts - np.asarray(seed_point), axis=1)))
    _check_clearance(Pi, t, pts)
    G = track_cloud(pts, roots, seed, complex(seed_value))
    d = derivs_at(Pi, u, v, w, p, G)
    scale = np.abs(Pi.fiber_coeffs(u, v, w, p)).max(axis=-1)
    if not np.all(ok) or np.any(~np.isfinite(G)) or np.any(np.abs(d.P) <= margin * (1 + scale)):
        bad = int(np.argmin(np.abs(d.P) / (1 + scale)))
        raise SphereIntersectsLocus(
            "sample points touch the branch locus", op="branch_field", point=pts[bad].tolist(), t=t
        )
    W = spinor_to_vector(strength_twistor(d))
    return W.real, -W.imag, G


def pipeline_charge(
    Pi: GeneratingPoly, t=0.0, center=(0.0, 0.0, 0.0), radius=2.0, nodes=5810, seed_value=0j, seed_point=None
) -> ChargeAudit:
    """Charge of the branch selected by ``seed_value`` at ``seed_point`` (default: top of the sphere)."""
    n, w = sphere_nodes(nodes)
    pts = np.asarray(center, dtype=float) + radius * n
    if seed_point is None:
        seed_point = np.asarray(center, dtype=float) + np.array([0, 0, radius])
    E, _, _ = branch_field_on_points(Pi, t, pts, seed_value, seed_point=seed_point)
    q = float(radius**2 * np.sum(w * np.sum(E * n, axis=1)) / (4 * np.pi))
    return audit(q, center, radius, len(w))
