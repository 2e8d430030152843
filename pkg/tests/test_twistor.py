import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algebrodyn import kernels
from algebrodyn.algebra import Biquat, SpacetimePoint, hermitian_embed
from algebrodyn.catalog import born_poly, kerr_poly, kerr_reference
from algebrodyn.errors import BranchCollision, DegenerateAtPoint, NoConvergence, ValidationError
from algebrodyn.polys import GeneratingPoly, TwistorPoly, constant_spinor_system, gauge_constraint
from algebrodyn.twistor import (
    branch_track, class2_solve, eikonal_class2, kerr_polynomial, kerr_roots, psi_potentials, sigma_gradient,
)
from algebrodyn.residuals import exact_residuals


def pt(t, x, y, z):
    return SpacetimePoint(t, x, y, z)


def test_poly_json_roundtrip(tmp_path):
    P = kerr_poly(0.5)
    again = GeneratingPoly.from_dict(P.to_dict())
    assert again == P
    f = tmp_path / "pi.json"
    f.write_text('{"monomials": [{"i": 1, "j": 0, "k": 0, "re": 1.0, "im": 0.0}]}')
    assert GeneratingPoly.from_json(str(f)).terms == ((1, 0, 0, 1 + 0j),)


def test_poly_rejects_empty():
    with pytest.raises(ValidationError):
        GeneratingPoly([])
    with pytest.raises(ValidationError):
        GeneratingPoly([(0, 0, 0, 3.0)])


def test_kerr_polynomial_coefficients():
    a = 0.5
    Z = Biquat(0.3 + 0.1j, -0.2, 1 + 1j, 0.7j)
    c = kerr_polynomial(kerr_poly(a), Z)
    expect = [-Z.p, Z.u - Z.v + 2j * a, Z.w]
    assert np.allclose(c, expect)


def test_born_polynomial_coefficients():
    b2 = 0.49
    Z = Biquat(0.3, -0.2 + 1j, 1 + 1j, 0.7j)
    c = kerr_polynomial(born_poly(b2=b2), Z)
    assert np.allclose(c, [Z.u * Z.p, Z.w * Z.p + Z.u * Z.v + b2, Z.w * Z.v])


def test_linear_fiber_degenerate():
    P = GeneratingPoly([(0, 1, 0, 1.0)])  # Pi = k0
    with pytest.raises(DegenerateAtPoint):
        kerr_polynomial(P, Biquat(0, 1, 0, 2))
    c = kerr_polynomial(P, Biquat(1.5, 1, 0, 2))
    assert np.allclose(c, [1.5, 0])


def test_kerr_roots_examples():
    r = kerr_roots(kerr_poly(0.0), pt(0, 0, 0, 1))
    finite = [s.G for s in r if not s.at_infinity]
    assert any(abs(g) < 1e-14 for g in finite)
    assert any(s.at_infinity for s in r)
    r = kerr_roots(kerr_poly(0.0), pt(0, 1, 0, 0))
    assert np.allclose(sorted(s.G.real for s in r), [-1, 1])
    assert all(abs(s.G.imag) < 1e-14 for s in r)


def test_born_locus_points():
    a = 0.5
    P = born_poly(b2=-a * a)
    # on the t = 0 ring every coefficient vanishes: the whole fiber solves
    with pytest.raises(DegenerateAtPoint):
        kerr_roots(P, pt(0, a, 0, 0))
    # on the expanding ring rho = t - a the root is double
    r = kerr_roots(P, pt(1.0, 0.5, 0, 0))
    assert len(r) == 2 and all(s.ill_conditioned for s in r)
    assert abs(r[0].G - r[1].G) < 1e-6


def test_roots_match_closed_form(rng):
    a = 0.5
    P = kerr_poly(a)
    for X in rng.uniform(-2, 2, (200, 4)):
        sols = kerr_roots(P, pt(*X))
        for sign in (1, -1):
            G = kerr_reference(X, a, sign).G
            assert min(abs(s.G - G) for s in sols) < 1e-10 * (1 + abs(G))


def test_root_count_matches_companion(rng):
    P = GeneratingPoly([(3, 0, 0, 1.0), (1, 1, 1, 0.5j), (0, 2, 0, -0.3), (1, 0, 1, 1.0)])
    for X in rng.normal(size=(30, 4)):
        Z = hermitian_embed(pt(*X))
        c = kerr_polynomial(P, Z)
        sols = kerr_roots(P, Z)
        assert len(sols) == len(c) - 1
        comp = np.sort_complex(kernels.companion_roots(c[None])[0])
        mine = np.sort_complex(np.array([s.G for s in sols]))
        assert np.allclose(comp, mine, atol=1e-8)


def test_roots_deterministic(rng):
    X = pt(*rng.normal(size=4))
    P = born_poly(b=0.7)
    assert [s.G for s in kerr_roots(P, X)] == [s.G for s in kerr_roots(P, X)]


def test_backends_agree(rng):
    c = rng.normal(size=(500, 5)) + 1j * rng.normal(size=(500, 5))
    prev = kernels.BACKEND
    try:
        out = []
        for name in ("python", "cython"):
            try:
                kernels.use_backend(name)
            except ImportError:
                pytest.skip("compiled kernels not built")
            out.append(kernels.polyroots(c)[0])
        assert np.allclose(out[0], out[1], atol=1e-9)
    finally:
        kernels.use_backend(prev)


def test_branch_track_continuous():
    a = 0.5
    P = kerr_poly(a)
    path = [pt(0, x, 0.0, 0.0) for x in np.linspace(2, 3, 21)]
    seed = min(kerr_roots(P, path[0]), key=lambda s: abs(s.G - kerr_reference([0, 2, 0, 0], a, 1).G))
    res = branch_track(P, path, seed)
    assert res.crossing is None and len(res.samples) == 21
    ref = kerr_reference(np.array([[0, x, 0, 0] for x in np.linspace(2, 3, 21)]), a, 1).G
    assert np.allclose(res.G, ref, atol=1e-10)


def test_branch_track_constant_path():
    P = kerr_poly(0.5)
    X = pt(0, 1, 1, 1)
    seed = kerr_roots(P, X)[0]
    res = branch_track(P, [X] * 5, seed)
    assert np.allclose(res.G, seed.G)


def test_branch_track_through_ring():
    a = 0.5
    P = kerr_poly(a)
    path = [pt(0, x, 0, 0) for x in np.linspace(0.8, 0.5, 7)]
    seed = kerr_roots(P, path[0])[0]
    try:
        res = branch_track(P, path, seed)
    except BranchCollision:
        return
    assert res.crossing is not None


def test_class2_constant_spinor():
    P1, P2 = constant_spinor_system()
    sol = class2_solve(P1, P2, hermitian_embed(pt(0.1, 0.2, 0.3, 0.4)), [1.3, 0.2])
    assert np.allclose(sol.xi, [1, 0])
    assert np.allclose(psi_potentials(P1, P2, hermitian_embed(pt(0.1, 0.2, 0.3, 0.4)), sol.xi), 0)


def test_class2_gauge_reduction(rng):
    a = 0.5
    P = kerr_poly(a)
    P1, P2 = P.homogenize(), gauge_constraint()
    for X in rng.uniform(-2, 2, (20, 4)):
        Z = hermitian_embed(pt(*X))
        G = kerr_reference(X, a, 1).G
        sol = class2_solve(P1, P2, Z, [1.0, G + 1e-3])
        assert abs(sol.xi[0] - 1) < 1e-12 and abs(sol.xi[1] - G) < 1e-10
        Psi = psi_potentials(P1, P2, Z, sol.xi)
        assert np.allclose(Psi[0], 0)


def test_psi_gse_residual(rng):
    """d_AB xi_C = Psi_CA xi_B checked by finite differences of re-solved spinors."""
    a = 0.5
    P1, P2 = kerr_poly(a).homogenize(), TwistorPoly([(1, 0, 0, 0, 1), (0, 0, 0, 0, -1), (0, 0, 1, 0, -0.3)])
    X = np.array([0.3, 0.8, -0.4, 0.9])
    from conftest import kerr_seed_xi

    def xi_at(Z):
        return class2_solve(P1, P2, Z, kerr_seed_xi(X, a, 0.3)).xi

    Z0 = hermitian_embed(pt(*X))
    xi0 = xi_at(Z0)
    Psi = psi_potentials(P1, P2, Z0, xi0)
    h = 1e-5
    # complex directions in (u, v, w, p); index pairs (A, B): u=(0,0), w=(0,1), p=(1,0), v=(1,1)
    for name, (A, B) in {"u": (0, 0), "w": (0, 1), "p": (1, 0), "v": (1, 1)}.items():
        d = {k: 0 for k in "uvwp"}
        d[name] = h
        Zp = Biquat(Z0.u + d["u"], Z0.v + d["v"], Z0.w + d["w"], Z0.p + d["p"])
        Zm = Biquat(Z0.u - d["u"], Z0.v - d["v"], Z0.w - d["w"], Z0.p - d["p"])
        dxi = (xi_at(Zp) - xi_at(Zm)) / (2 * h)
        # the derivative along Z^{AB} acts on xi_C as Psi_CA xi_B
        assert np.allclose(dxi, Psi[:, A] * xi0[B], atol=1e-8)


def test_class2_no_convergence():
    P1 = TwistorPoly([(0, 2, 0, 0, 1), (2, 0, 0, 0, 1)])  # xi1^2 + xi0^2
    P2 = TwistorPoly([(0, 2, 0, 0, 1), (2, 0, 0, 0, -1), (0, 0, 0, 0, 1)])
    with pytest.raises((NoConvergence, Exception)):
        class2_solve(P1, P2, hermitian_embed(pt(0, 0, 0, 0)), [1e6, -1e6], maxiter=5)


def test_eikonal_class2(rng):
    # quadratic in G: derivative is linear, unique stationary point
    P = GeneratingPoly([(2, 0, 0, 1.0), (0, 1, 0, 1.0), (0, 0, 1, 0.5j)])
    Z = hermitian_embed(pt(*rng.normal(size=4)))
    out = eikonal_class2(P, Z)
    assert len(out) == 1
    with pytest.raises(DegenerateAtPoint):
        eikonal_class2(GeneratingPoly([(0, 0, 1, 1.0)]), Biquat(1, 1, 0, 0))


def test_eikonal_class2_kerr_residual(rng):
    a = 0.5
    P = kerr_poly(a)
    worst = 0.0
    for X in rng.uniform(-2, 2, (100, 4)):
        Z = hermitian_embed(pt(*X))
        for G, _ in eikonal_class2(P, Z):
            gu, gv, gw, gp = sigma_gradient(P, Z, G)
            worst = max(worst, abs(gu * gv - gw * gp) / (abs(gu * gv) + abs(gw * gp) + 1e-300))
    assert worst < 1e-6


def test_eikonal_class2_fd_gradient():
    """sigma_gradient agrees with differences of Sigma itself."""
    a = 0.5
    P = kerr_poly(a)
    Z = Biquat(0.3 + 0.1j, 0.9, 0.4 - 0.2j, 1.1j)
    G, S = eikonal_class2(P, Z)[0]
    grad = sigma_gradient(P, Z, G)
    h = 1e-6
    for i, name in enumerate("uvwp"):
        d = {k: 0 for k in "uvwp"}
        d[name] = h
        Sp = eikonal_class2(P, Biquat(Z.u + d["u"], Z.v + d["v"], Z.w + d["w"], Z.p + d["p"]))[0][1]
        Sm = eikonal_class2(P, Biquat(Z.u - d["u"], Z.v - d["v"], Z.w - d["w"], Z.p - d["p"]))[0][1]
        assert abs((Sp - Sm) / (2 * h) - grad[i]) < 1e-6


def test_kerr_roots_satisfy_sfc(rng):
    P = born_poly(b=0.7)
    X = rng.uniform(-2, 2, (200, 4))
    from algebrodyn.algebra import embed_coords
    from algebrodyn.twistor import roots_batch

    u, v, w, p = embed_coords(*X.T)
    roots, Pd, ts, ok = roots_batch(P, u, v, w, p)
    for k in range(roots.shape[1]):
        good = ok & np.isfinite(roots[:, k]) & (np.abs(Pd[:, k]) > 1e-6)
        r = exact_residuals(P, u[good], v[good], w[good], p[good], roots[good, k])
        assert np.max(r["sfc"]) < 1e-6 and np.max(r["eikonal"]) < 1e-6


def test_conformal_invariance(rng):
    """Roots transform by the Mobius action of xi -> P^-1 xi under X -> P^+ X P."""
    a = 0.5
    Pi = kerr_poly(a)
    M = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    M /= np.sqrt(np.linalg.det(M))
    Pi2 = Pi.substitute_linear(M)
    Minv = np.linalg.inv(M)
    for X in rng.uniform(-2, 2, (10, 4)):
        Zm = hermitian_embed(pt(*X)).matrix
        Zt = M.conj().T @ Zm @ M
        G_old = np.array([s.G for s in kerr_roots(Pi, Biquat.from_matrix(Zm))])
        G_new = np.array([s.G for s in kerr_roots(Pi2, Biquat.from_matrix(Zt))])
        # xi' = P^-1 xi with xi = (1, G)
        mapped = (Minv[1, 0] + Minv[1, 1] * G_old) / (Minv[0, 0] + Minv[0, 1] * G_old)
        for g in mapped:
            assert np.min(np.abs(G_new - g) / (1 + abs(g))) < 1e-8
