"""Space-time sampling grids and branch continuation over them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .twistor import chordal


@dataclass(frozen=True)
class GridSpec:
    """Regular spatial grid ``bounds x samples`` at one or more times."""

    bounds: tuple
    samples: tuple
    times: tuple = (0.0,)

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        samples = tuple(int(n) for n in self.samples)
        times = tuple(float(t) for t in np.atleast_1d(self.times))
        if len(bounds) != 3 or len(samples) != 3:
            raise ValidationError("grid needs three spatial axes", bounds=self.bounds, samples=self.samples)
        for (lo, hi), n in zip(bounds, samples):
            if not lo < hi:
                raise ValidationError("grid bounds must satisfy min < max", bounds=(lo, hi))
            if n < 2:
                raise ValidationError("grid needs at least 2 samples per axis", samples=n)
        if not times:
            raise ValidationError("grid needs at least one time")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "times", times)

    @classmethod
    def cube(cls, half_width, n, times=(0.0,)):
        b = (-half_width, half_width)
        return cls((b, b, b), (n, n, n), times)

    @classmethod
    def centered(cls, center, h, n, times=(0.0,)):
        """``n`` points per axis at spacing ``h`` with ``center`` at index ``n // 2``."""
        c = np.asarray(center, dtype=float)
        lo = c - h * (n // 2)
        hi = lo + h * (n - 1)
        return cls(tuple(zip(lo, hi)), (n, n, n), times)

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(tuple(map(tuple, data["bounds"])), tuple(data["samples"]), tuple(np.atleast_1d(data.get("times", [0.0]))))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed grid spec: {exc}") from exc

    def to_dict(self):
        return {"bounds": [list(b) for b in self.bounds], "samples": list(self.samples), "times": list(self.times)}

    @property
    def spacing(self):
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.samples))

    def axes(self):
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.samples)]

    def mesh(self, t=None):
        """Arrays ``(t, x, y, z)`` of shape ``(nt, nx, ny, nz)`` (or without the time axis)."""
        x, y, z = self.axes()
        if t is None:
            return np.meshgrid(np.asarray(self.times), x, y, z, indexing="ij")
        X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
        return np.full_like(X, float(t)), X, Y, Z


def track_grid(roots, seed_value, seed_index=None):
    """Select one continuous branch from per-point root sets on a grid.

    ``roots`` has shape ``grid_shape + (n,)``.  Starting from ``seed_index``
    (default: the first grid point) with the root nearest ``seed_value``, the
    branch is swept axis by axis, each point taking the root nearest (in the
    chordal metric) to its already assigned neighbour.

    Returns ``(values, choice, ambiguous)``; ``ambiguous`` marks points where
    the nearest root is farther than half the gap to the next one.
    """
    roots = np.asarray(roots, dtype=complex)
    shape = roots.shape[:-1]
    ndim = len(shape)
    if seed_index is None:
        seed_index = (0,) * ndim
    choice = np.zeros(shape, dtype=np.int64)
    ambiguous = np.zeros(shape, dtype=bool)
    values = np.empty(shape, dtype=complex)

    def pick(cands, prev):
        d = chordal(cands, prev[..., None])
        k = np.argmin(d, axis=-1)
        best = np.take_along_axis(d, k[..., None], -1)[..., 0]
        if cands.shape[-1] > 1:
            gap = chordal(np.take_along_axis(cands, k[..., None], -1), cands)
            gap = np.where(np.arange(cands.shape[-1]) == k[..., None], np.inf, gap).min(-1)
            amb = best > 0.5 * gap
        else:
            amb = np.zeros(k.shape, dtype=bool)
        return k, np.take_along_axis(cands, k[..., None], -1)[..., 0], amb

    # seed point
    s = tuple(seed_index)
    k, val, amb = pick(roots[s][None], np.array([seed_value], dtype=complex))
    choice[s], values[s], ambiguous[s] = k[0], val[0], amb[0]

    # grow the assigned region one axis at a time: a line, then a plane, ...
    for axis in range(ndim):
        # index of the already-filled hyperplane: all axes < axis are full, the rest at the seed
        def sl(i):
            idx = []
            for ax in range(ndim):
                if ax < axis:
                    idx.append(slice(None))
                elif ax == axis:
                    idx.append(i)
                else:
                    idx.append(s[ax])
            return tuple(idx)

        for direction in (1, -1):
            i = s[axis] + direction
            while 0 <= i < shape[axis]:
                prev = values[sl(i - direction)]
                k, val, amb = pick(roots[sl(i)], prev)
                choice[sl(i)], values[sl(i)], ambiguous[sl(i)] = k, val, amb
                i += direction
    return values, choice, ambiguous


def track_cloud(points, roots, seed_idx, seed_value, neighbours=8):
    """Branch continuation over scattered points by breadth-first growth.

    Each point inherits the root nearest to that of an already assigned
    neighbour among its ``neighbours`` closest points.
    """
    from collections import deque

    from scipy.spatial import cKDTree

    pts = np.asarray(points, dtype=float)
    roots = np.asarray(roots, dtype=complex)
    n = len(pts)
    tree = cKDTree(pts)
    _, nbr = tree.query(pts, k=min(neighbours + 1, n))
    values = np.full(n, np.nan + 0j)
    done = np.zeros(n, dtype=bool)
    d = chordal(roots[seed_idx], seed_value)
    values[seed_idx] = roots[seed_idx][int(np.argmin(d))]
    done[seed_idx] = True
    queue = deque([seed_idx])
    while queue:
        i = queue.popleft()
        for j in np.atleast_1d(nbr[i]):
            if j >= n or done[j]:
                continue
            d = chordal(roots[j], values[i])
            values[j] = roots[j][int(np.argmin(d))]
            done[j] = True
            queue.append(j)
    if not done.all():
        # disconnected neighbour graph: fall back to nearest assigned point
        _, near = cKDTree(pts[done]).query(pts[~done])
        src = values[done][near]
        rest = roots[~done]
        k = np.argmin(chordal(rest, src[:, None]), axis=1)
        values[~done] = rest[np.arange(len(k)), k]
    return values
