"""Verification of the field equations on branches.

Two families of checks:

* exact: eikonal, shear-free (SFC), wave and harmonicity identities from the
  implicit derivatives at scattered points (machine-level residuals);
* finite-difference: the same identities plus the vacuum Maxwell system on
  a tracked space-time grid (second-order residuals, used for convergence
  studies).

Maxwell is checked for the real pair in the form ``div E = div H = 0``,
``curl E = -dH/dt``, ``curl H = dE/dt``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .algebra import embed_coords
from .errors import StencilCrossesSingularity, ValidationError
from .fields import derivs_at, spinor_to_vector, strength_twistor
from .grid import GridSpec, track_grid
from .polys import GeneratingPoly
from .twistor import roots_batch

CHECKS = ("eikonal", "wave", "sfc", "maxwell", "harm")
TINY = 1e-300
CHUNK = 65536


def _rel(num, den):
    return np.abs(num) / (den + TINY)


def exact_residuals(Pi: GeneratingPoly, u, v, w, p, G):
    """Normalized pointwise residuals from exact implicit derivatives.

    Returns a dict of arrays keyed by ``eikonal, sfc, wave, harm``.
    """
    d = derivs_at(Pi, u, v, w, p, G)
    Gu, Gv, Gw, Gp = d.dG
    H = d.d2G
    out = {
        "eikonal": _rel(Gu * Gv - Gw * Gp, np.abs(Gu * Gv) + np.abs(Gw * Gp)),
        "sfc": (np.abs(Gw - d.G * Gu) + np.abs(Gv - d.G * Gp))
        / (np.abs(Gw) + np.abs(d.G * Gu) + np.abs(Gv) + np.abs(d.G * Gp) + TINY),
        "wave": _rel(H[0, 1] - H[2, 3], np.abs(H[0, 1]) + np.abs(H[2, 3])),
    }
    with np.errstate(divide="ignore", invalid="ignore"):
        L = d.d2lnG()
        harm = _rel(L[0, 1] - L[2, 3], np.abs(L[0, 1]) + np.abs(L[2, 3]))
    out["harm"] = np.where(np.abs(d.G) > 0, harm, np.nan)
    return out


# -- tracked grids ----------------------------------------------------------------


@dataclass
class GridBranch:
    """One branch tracked over a ``(nt, nx, ny, nz)`` space-time grid."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    G: np.ndarray
    P: np.ndarray
    flagged: np.ndarray
    spacing: tuple  # (dt, dx, dy, dz); dt is nan for a single time

    @property
    def shape(self):
        return self.G.shape

    def coords(self):
        return embed_coords(self.t, self.x, self.y, self.z)


def solve_grid(Pi: GeneratingPoly, grid: GridSpec, seed=0, seed_index=None) -> GridBranch:
    """All roots on the grid, then one branch selected by continuation.

    ``seed`` is either an integer (root index, sorted order, at the seed
    point) or a complex value whose nearest root is taken at the seed point.
    """
    t, x, y, z = grid.mesh()
    u, v, w, p = embed_coords(t, x, y, z)
    roots, P, tsing, ok = roots_batch(Pi, u, v, w, p)
    if seed_index is None:
        seed_index = (0, 0, 0, 0)
    seed_index = tuple(seed_index)
    if isinstance(seed, (int, np.integer)):
        seed_value = roots[seed_index][int(seed)]
    else:
        seed_value = complex(seed)
    G, choice, amb = track_grid(roots, seed_value, seed_index)
    Pc = np.take_along_axis(P, choice[..., None], -1)[..., 0]
    flagged = amb | ~ok | ~np.isfinite(G) | ~(np.abs(Pc) > tsing)
    times = np.asarray(grid.times)
    dt = float(times[1] - times[0]) if len(times) > 1 else float("nan")
    if len(times) > 2 and not np.allclose(np.diff(times), dt):
        raise ValidationError("finite differences need uniformly spaced times", times=grid.times)
    return GridBranch(t, x, y, z, G, Pc, flagged, (dt,) + grid.spacing)


def grid_fields(Pi: GeneratingPoly, gb: GridBranch):
    """Real fields ``(E_re, H_re)`` with shape ``grid + (3,)``; nan where flagged."""
    u, v, w, p = gb.coords()
    W = np.full(gb.shape + (3,), np.nan + 0j)
    flat = [a.reshape(-1) for a in (u, v, w, p, gb.G)]
    good = ~gb.flagged.reshape(-1)
    Wf = W.reshape(-1, 3)
    idx = np.nonzero(good)[0]
    for start in range(0, idx.size, CHUNK):
        sel = idx[start : start + CHUNK]
        d = derivs_at(Pi, *(a[sel] for a in flat))
        Wf[sel] = spinor_to_vector(strength_twistor(d))
    return W.real, -W.imag


def _d1(f, axis, h):
    n = f.shape[axis]
    hi = np.take(f, range(2, n), axis=axis)
    lo = np.take(f, range(0, n - 2), axis=axis)
    return (hi - lo) / (2 * h)


def _d2(f, axis, h):
    n = f.shape[axis]
    hi = np.take(f, range(2, n), axis=axis)
    mid = np.take(f, range(1, n - 1), axis=axis)
    lo = np.take(f, range(0, n - 2), axis=axis)
    return (hi - 2 * mid + lo) / h**2


def _interior(f, skip):
    """Trim one cell on every grid axis except the ones in ``skip``."""
    idx = tuple(slice(None) if ax == skip else slice(1, -1) for ax in range(4))
    return f[idx]


def _partial(f, axis, h, order=1):
    """Derivative along grid ``axis`` restricted to the common interior."""
    d = _d1(f, axis, h) if order == 1 else _d2(f, axis, h)
    return _interior(d, axis)


@dataclass
class CheckStat:
    abs: np.ndarray
    rel: np.ndarray

    @staticmethod
    def _reduce(func, a):
        finite = a[np.isfinite(a)]
        return float(func(finite)) if finite.size else float("nan")

    @property
    def max_abs(self):
        return self._reduce(np.max, self.abs)

    @property
    def max_rel(self):
        return self._reduce(np.max, self.rel)

    @property
    def mean_rel(self):
        return self._reduce(np.mean, self.rel)

    def summary(self):
        return {"max_abs": self.max_abs, "max_rel": self.max_rel, "mean_rel": self.mean_rel}


@dataclass
class ResidualReport:
    spacing: tuple
    checks: dict = field(default_factory=dict)
    excluded: int = 0
    evaluated: int = 0
    mask: np.ndarray | None = None  # interior points kept

    def summary(self):
        return {
            "spacing": list(self.spacing),
            "excluded": self.excluded,
            "evaluated": self.evaluated,
            "checks": {k: v.summary() for k, v in self.checks.items()},
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def fd_residuals(Pi: GeneratingPoly, gb: GridBranch, which=("eikonal", "wave", "sfc", "maxwell"), strict=False):
    """Second-order finite-difference residuals on a tracked grid.

    Points whose 3x3x3x3 stencil touches a flagged point are excluded and
    counted (or raise :class:`StencilCrossesSingularity` when ``strict``).
    Returned arrays cover the grid interior; excluded points are nan.
    """
    which = tuple(which)
    for name in which:
        if name not in CHECKS:
            raise ValidationError(f"unknown residual check {name!r}")
    if gb.shape[0] < 3 and any(c in which for c in ("wave", "maxwell", "eikonal", "sfc")):
        raise ValidationError("finite-difference checks need at least 3 time levels")
    dt, dx, dy, dz = gb.spacing
    hs = (dt, dx, dy, dz)
    # exclusion: dilate the flagged set by one cell in every direction
    bad = gb.flagged.copy()
    for ax in range(4):
        bad = np.logical_or.reduce(
            [bad, np.roll(bad, 1, axis=ax), np.roll(bad, -1, axis=ax)]
        )
    keep = ~bad[1:-1, 1:-1, 1:-1, 1:-1]
    excluded = int((~keep).sum())
    if strict and excluded:
        raise StencilCrossesSingularity(
            "stencil touches the singular locus", op="fd_residuals", count=excluded
        )
    report = ResidualReport(hs, excluded=excluded, evaluated=int(keep.sum()), mask=keep)

    G = np.where(gb.flagged, 0, gb.G)
    need_first = {"eikonal", "sfc"} & set(which)
    if need_first:
        Gt, Gx, Gy, Gz = (_partial(G, ax, hs[ax]) for ax in range(4))
        Gc = _interior(G, None)
        if "eikonal" in which:
            num = (Gt**2 - Gx**2 - Gy**2 - Gz**2) / 4
            den = (np.abs(Gt) ** 2 + np.abs(Gx) ** 2 + np.abs(Gy) ** 2 + np.abs(Gz) ** 2) / 4
            report.checks["eikonal"] = _stat(num, den, keep)
        if "sfc" in which:
            Gu, Gv = (Gt + Gz) / 2, (Gt - Gz) / 2
            Gw, Gp = (Gx + 1j * Gy) / 2, (Gx - 1j * Gy) / 2
            num = np.abs(Gw - Gc * Gu) + np.abs(Gv - Gc * Gp)
            den = np.abs(Gw) + np.abs(Gc * Gu) + np.abs(Gv) + np.abs(Gc * Gp)
            report.checks["sfc"] = _stat(num, den, keep)
    if "wave" in which:
        parts = [_partial(G, ax, hs[ax], order=2) for ax in range(4)]
        num = parts[0] - parts[1] - parts[2] - parts[3]
        den = sum(np.abs(q) for q in parts)
        report.checks["wave"] = _stat(num, den, keep)
    if "maxwell" in which:
        E, H = grid_fields(Pi, gb)
        E = np.where(gb.flagged[..., None], 0, E)
        H = np.where(gb.flagged[..., None], 0, H)
        report.checks["maxwell"] = _maxwell(E, H, hs, keep)
    return report


def _stat(num, den, keep):
    a = np.where(keep, np.abs(num), np.nan)
    r = np.where(keep, np.abs(num) / (den + TINY), np.nan)
    return CheckStat(a, r)


def _maxwell(E, H, hs, keep):
    def D(f, comp, ax):
        return _partial(f[..., comp], ax, hs[ax])

    div_e = D(E, 0, 1) + D(E, 1, 2) + D(E, 2, 3)
    div_h = D(H, 0, 1) + D(H, 1, 2) + D(H, 2, 3)
    curl_e = [D(E, 2, 2) - D(E, 1, 3), D(E, 0, 3) - D(E, 2, 1), D(E, 1, 1) - D(E, 0, 2)]
    curl_h = [D(H, 2, 2) - D(H, 1, 3), D(H, 0, 3) - D(H, 2, 1), D(H, 1, 1) - D(H, 0, 2)]
    dt_e = [D(E, c, 0) for c in range(3)]
    dt_h = [D(H, c, 0) for c in range(3)]
    eqs = [div_e, div_h] + [ce + th for ce, th in zip(curl_e, dt_h)] + [ch - te for ch, te in zip(curl_h, dt_e)]
    num = np.sqrt(sum(np.abs(q) ** 2 for q in eqs))
    # scale: magnitude of the individual derivative terms
    terms = []
    for f in (E, H):
        for c in range(3):
            for ax in range(4):
                terms.append(np.abs(D(f, c, ax)))
    den = sum(terms)
    return _stat(num, den, keep)


def pointwise_maxwell(field_fn, X, h=1e-3):
    """Normalized vacuum Maxwell residual at scattered points ``X`` (N, 4).

    ``field_fn(X) -> (E_re, H_re)``; derivatives are fourth-order central
    differences, so any linear combination of solutions passes.
    """
    from .fields import fd_gradient

    X = np.asarray(X, dtype=float)
    D = fd_gradient(lambda Y: np.concatenate(field_fn(Y), -1), X, h)  # (4, N, 6)
    E, H = D[..., :3], D[..., 3:]
    div_e = E[1, :, 0] + E[2, :, 1] + E[3, :, 2]
    div_h = H[1, :, 0] + H[2, :, 1] + H[3, :, 2]

    def curl(F):
        return np.stack([F[2, :, 2] - F[3, :, 1], F[3, :, 0] - F[1, :, 2], F[1, :, 1] - F[2, :, 0]], -1)

    eqs = np.c_[div_e, div_h, curl(E) + H[0], curl(H) - E[0]]
    scale = np.abs(D).sum(axis=(0, 2))
    return np.linalg.norm(eqs, axis=-1) / (scale + TINY)


def convergence_study(Pi: GeneratingPoly, center, h, n=64, t0=0.0, which=("wave", "maxwell"), seed=0):
    """Max residuals at spacing ``h`` and ``h/2`` compared on shared points.

    Each grid has ``n`` points per axis centred on ``center`` and three time
    levels ``t0 - h, t0, t0 + h`` (time step equal to the spatial step).
    ``seed`` picks the branch at ``center`` (root index or complex value).
    Returns ``{check: (max_h, max_h2, ratio)}`` plus the two reports.
    """
    if n % 2:
        raise ValidationError("convergence grids need an even point count", n=n)
    reports = []
    for step in (h, h / 2):
        grid = GridSpec.centered(center, step, n, times=(t0 - step, t0, t0 + step))
        gb = solve_grid(Pi, grid, seed=seed, seed_index=(1, n // 2, n // 2, n // 2))
        reports.append(fd_residuals(Pi, gb, which))
    c = n // 2 - 1  # centre index in the interior arrays
    # coarse interior index i maps to fine interior index 2 (i - c) + c
    lo = int(np.ceil(c / 2))
    hi = (n - 3 + c) // 2
    coarse_sl = slice(lo, hi + 1)
    fine_sl = slice(2 * lo - c, 2 * hi - c + 1, 2)
    out = {}
    for name in which:
        a = reports[0].checks[name].abs[0][coarse_sl, coarse_sl, coarse_sl]
        b = reports[1].checks[name].abs[0][fine_sl, fine_sl, fine_sl]
        ok = np.isfinite(a) & np.isfinite(b)
        ma, mb = float(np.max(a[ok])), float(np.max(b[ok]))
        out[name] = (ma, mb, ma / mb if mb > 0 else np.inf)
    return out, reports


def export_grid_csv(path, gb: GridBranch, E_re, H_re, report: ResidualReport | None = None, branch=0):
    """Write one row per grid point; residual columns are blank on the boundary."""
    cols = ["t", "x", "y", "z", "branch", "ReG", "ImG", "absP", "Ex", "Ey", "Ez", "Hx", "Hy", "Hz"]
    names = list(report.checks) if report else []
    cols += [f"res_{k}" for k in names]
    res = {}
    for k in names:
        full = np.full(gb.shape, np.nan)
        full[1:-1, 1:-1, 1:-1, 1:-1] = report.checks[k].rel
        res[k] = full.reshape(-1)
    flat = [a.reshape(-1) for a in (gb.t, gb.x, gb.y, gb.z)]
    G = gb.G.reshape(-1)
    P = np.abs(gb.P).reshape(-1)
    E = E_re.reshape(-1, 3)
    H = H_re.reshape(-1, 3)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for i in range(G.size):
            row = [flat[0][i], flat[1][i], flat[2][i], flat[3][i]]
            row = [fmt(q) for q in row] + [str(branch)]
            row += [fmt(G[i].real), fmt(G[i].imag), fmt(P[i])]
            row += [fmt(q) for q in E[i]] + [fmt(q) for q in H[i]]
            row += [fmt(res[k][i]) for k in names]
            wr.writerow(row)


def export_grid_jsonl(path, gb: GridBranch, E_re, H_re, branch=0):
    flat = [a.reshape(-1) for a in (gb.t, gb.x, gb.y, gb.z)]
    G = gb.G.reshape(-1)
    P = np.abs(gb.P).reshape(-1)
    E = E_re.reshape(-1, 3)
    H = H_re.reshape(-1, 3)
    with open(path, "w") as fh:
        for i in range(G.size):
            rec = {
                "t": flat[0][i], "x": flat[1][i], "y": flat[2][i], "z": flat[3][i], "branch": branch,
                "G": [G[i].real, G[i].imag], "absP": P[i], "E_re": list(E[i]), "H_re": list(H[i]),
            }
            fh.write(json.dumps(rec, default=float) + "\n")


def fmt(x):
    """17 significant digits, scientific notation; empty for nan."""
    x = float(x)
    if np.isnan(x):
        return ""
    return f"{x:.16e}"
