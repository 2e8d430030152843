import io
import json

import numpy as np
import pytest

from algebrodyn.algebra import embed_coords
from algebrodyn.catalog import born_poly, born_reference, kerr_field_fn, kerr_poly, kerr_reference
from algebrodyn.errors import StencilCrossesSingularity, ValidationError
from algebrodyn.grid import GridSpec
from algebrodyn.polys import GeneratingPoly
from algebrodyn.residuals import (
    convergence_study, exact_residuals, export_grid_csv, fd_residuals, grid_fields, pointwise_maxwell, solve_grid,
)
from conftest import random_regular_points


def test_exact_residuals_kerr(rng):
    a = 0.5
    X = random_regular_points(rng, 500, a)
    u, v, w, p = embed_coords(*X.T)
    ex = exact_residuals(kerr_poly(a), u, v, w, p, kerr_reference(X, a).G)
    for k in ("eikonal", "sfc", "wave", "harm"):
        assert np.nanmax(ex[k]) < 1e-10, k


def test_exact_residuals_born(rng):
    X = rng.uniform(-2, 2, (2000, 4))
    ref = born_reference(X, b=0.7)
    ok = np.abs(ref.aux.Delta) > 1e-2
    u, v, w, p = embed_coords(*X[ok].T)
    ex = exact_residuals(born_poly(b=0.7), u, v, w, p, ref.G[ok])
    assert np.nanmax(ex["eikonal"]) < 1e-10 and np.nanmax(ex["sfc"]) < 1e-10


def test_constant_branch_has_no_field():
    Pi = GeneratingPoly([(1, 0, 0, 1.0), (0, 0, 0, -0.4)])
    grid = GridSpec.cube(1.0, 5, times=(-0.1, 0.0, 0.1))
    gb = solve_grid(Pi, grid)
    assert np.allclose(gb.G, 0.4)
    E, H = grid_fields(Pi, gb)
    assert np.all(E == 0) and np.all(H == 0)
    rep = fd_residuals(Pi, gb, which=("wave", "maxwell"))
    assert rep.checks["wave"].max_abs == 0


def test_small_convergence():
    a = 0.5
    c = np.array([0.6, 0.4, 1.2])
    x, y, z = c
    G = (x + 1j * y) / ((z + 1j * a) + np.sqrt(x * x + y * y + (z + 1j * a) ** 2))
    out, reps = convergence_study(kerr_poly(a), c, 0.02, 12, which=("eikonal", "wave", "maxwell"), seed=G)
    for k, (_, _, ratio) in out.items():
        assert 3.2 <= ratio <= 4.8, (k, ratio)
    with pytest.raises(ValidationError):
        convergence_study(kerr_poly(a), c, 0.02, 11)


def test_stencil_exclusion():
    grid = GridSpec.cube(1.0, 9, times=(-0.1, 0.0, 0.1))
    gb = solve_grid(kerr_poly(0.0), grid)
    assert gb.flagged.any()
    rep = fd_residuals(kerr_poly(0.0), gb, which=("wave",))
    assert rep.excluded > 0
    with pytest.raises(StencilCrossesSingularity):
        fd_residuals(kerr_poly(0.0), gb, which=("wave",), strict=True)


def test_export_csv(tmp_path):
    grid = GridSpec.cube(1.0, 4, times=(0.0,))
    gb = solve_grid(kerr_poly(0.5), grid)
    E, H = grid_fields(kerr_poly(0.5), gb)
    path = tmp_path / "f.csv"
    export_grid_csv(str(path), gb, E, H)
    rows = path.read_text().splitlines()
    assert rows[0].startswith("t,x,y,z,branch,ReG,ImG") and len(rows) == 1 + 64


def test_pointwise_maxwell(rng):
    a = 0.5
    X = random_regular_points(rng, 50, a, margin=0.4)
    f1, f2 = kerr_field_fn(a, 1), kerr_field_fn(0.2, 1)
    shift = np.array([0.0, 0.0, 0.0, 3.0])

    def total(Y):
        (E1, H1), (E2, H2) = f1(Y), f2(Y - shift)
        return E1 + 2 * E2, H1 + 2 * H2

    assert pointwise_maxwell(total, X).max() < 1e-6
    # a non-solution: drop the magnetic part
    assert pointwise_maxwell(lambda Y: (f1(Y)[0], 0 * f1(Y)[1] + Y[:, 1:] * 0.3), X).max() > 1e-2
