import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algebrodyn.algebra import SpacetimePoint, embed_coords, hermitian_embed
from algebrodyn.catalog import born_poly, born_reference, kerr_poly, kerr_reference
from algebrodyn.errors import LogPole, NotNull, OnSingularLocus
from algebrodyn.fields import (
    congruence_tangent, derivs_at, fd_gradient, em_strength, gauge_gradient, implicit_derivatives, kerr_schild_assemble,
    lorentz_residual, minkowski_dot, potential_strength, spinor_to_vector, split_EH, strength_ln_g,
    strength_twistor, vector_to_spinor,
)
from algebrodyn.polys import GeneratingPoly, TwistorPoly
from algebrodyn.residuals import exact_residuals
from algebrodyn.twistor import kerr_roots
from conftest import kerr_seed_xi, random_regular_points


def branch_near(Pi, X, G):
    return min(kerr_roots(Pi, SpacetimePoint(*X)), key=lambda s: abs(s.G - G))


def test_implicit_derivatives_axis_branch():
    P = kerr_poly(0.0)
    b = branch_near(P, [0, 0, 0, 1.0], 0)
    d = implicit_derivatives(P, b)
    Gu, Gv, Gw, Gp = d.dG
    assert abs(Gw) < 1e-15 and abs(Gv) < 1e-15
    assert abs(Gu) == 0 or abs(Gp) > 0


def test_implicit_vs_complex_step(rng):
    """Derivatives agree with complex steps of the closed-form branch."""
    a = 0.5
    P = kerr_poly(a)
    X = random_regular_points(rng, 1000, a)
    u, v, w, p = embed_coords(*X.T)
    G = kerr_reference(X, a, 1).G
    d = derivs_at(P, u, v, w, p, G)
    # closed form in (u, v, w, p): z = (u - v)/2, x + iy = p, r*^2 = wp + (z + ia)^2
    def Gc(u, v, w, p):
        zc = (u - v) / 2 + 1j * a
        return p / (zc + np.sqrt(w * p + zc**2))

    # G is holomorphic in each chart variable: a contour average of complex
    # steps gives the derivative without cancellation
    r, n = 1e-2, 16
    phase = np.exp(2j * np.pi * np.arange(n) / n)
    for i in range(4):
        acc = 0
        for e in phase:
            args = [u, v, w, p]
            args[i] = args[i] + r * e
            acc = acc + Gc(*args) / e
        cs = acc / (n * r)
        assert np.max(np.abs(cs - d.dG[i]) / (1 + np.abs(d.dG[i]))) < 1e-10
    r = exact_residuals(P, u, v, w, p, G)
    assert np.max(r["sfc"]) < 1e-10 and np.max(r["eikonal"]) < 1e-10


def test_kappa_free_pi_has_zero_gradient():
    P = GeneratingPoly([(2, 0, 0, 1.0), (0, 0, 0, -4.0)])  # G^2 - 4
    d = derivs_at(P, 0.3, 0.2, 0.1 + 1j, 0.1 - 1j, 2.0)
    assert np.allclose(d.dG, 0)


def test_singular_locus_raises():
    a = 0.5
    P = kerr_poly(a)
    b = kerr_roots(P, SpacetimePoint(1.0, 0.5, 0, 0))  # ring is static
    with pytest.raises(OnSingularLocus):
        implicit_derivatives(P, b[0])


def test_coulomb_field():
    P = kerr_poly(0.0)
    for r in (0.5, 1.0, 3.0):
        b = branch_near(P, [0, r, 0, 0], 1.0)
        sp = split_EH(em_strength(P, b, "ln_g"))
        assert np.allclose(sp.E_re, [1 / (4 * r * r), 0, 0], atol=1e-15)
        assert np.allclose(sp.H_re, 0, atol=1e-15)
        assert sp.selfdual_residual < 1e-14


def test_log_pole_and_twistor_route():
    P = kerr_poly(0.0)
    b = branch_near(P, [0, 0, 0, 2.0], 0)
    with pytest.raises(LogPole):
        em_strength(P, b, "ln_g")
    W = spinor_to_vector(em_strength(P, b, "twistor"))
    assert np.allclose(W, [0, 0, 1 / 16])


def test_linear_pi_zero_field(rng):
    P = GeneratingPoly([(0, 1, 0, 1.0), (0, 0, 1, 2.0 - 1j), (0, 0, 0, 0.3)])
    for X in rng.normal(size=(10, 4)):
        sols = kerr_roots(P, SpacetimePoint(*X))
        for s in sols:
            if not s.at_infinity and not s.ill_conditioned:
                assert np.allclose(em_strength(P, s, "twistor"), 0, atol=1e-12)


def test_born_component_oracle():
    b = 0.7
    X = np.array([0.0, 1.0, 0.0, 1.0])  # rho = 1, z = 1, t = 0
    ref = born_reference(X, b)
    P = born_poly(b=b)
    s = branch_near(P, X, ref.G)
    W = spinor_to_vector(em_strength(P, s, "twistor"))
    assert np.allclose(W, ref.W, rtol=1e-12)
    assert abs(ref.E_rho.real - 2 * b * b * 1 / ref.aux.Delta ** 1.5) < 1e-14


def test_methods_agree_generic_cubic(rng):
    P = GeneratingPoly([(3, 0, 0, 0.3), (1, 1, 1, 1.0), (0, 2, 0, 0.5j), (1, 0, 1, -1.0), (0, 0, 1, 0.2)])
    X = rng.uniform(-1, 1, (300, 4))
    u, v, w, p = embed_coords(*X.T)
    from algebrodyn.twistor import roots_batch

    roots, Pd, ts, ok = roots_batch(P, u, v, w, p)
    for k in range(roots.shape[1]):
        g = ok & np.isfinite(roots[:, k]) & (np.abs(Pd[:, k]) > 1e-3) & (np.abs(roots[:, k]) > 1e-3)
        d = derivs_at(P, u[g], v[g], w[g], p[g], roots[g, k])
        F1, F2 = strength_ln_g(d), strength_twistor(d)
        rel = np.abs(F1 - F2).max(axis=(-2, -1)) / np.abs(F1).max(axis=(-2, -1))
        assert np.max(rel) < 1e-8


def test_spinor_vector_roundtrip(rng):
    W = rng.normal(size=(20, 3)) + 1j * rng.normal(size=(20, 3))
    assert np.allclose(spinor_to_vector(vector_to_spinor(W)), W)
    F = vector_to_spinor(W)
    assert np.allclose(F[..., 0, 1], F[..., 1, 0])
    sp = split_EH(np.zeros((2, 2)))
    assert np.all(sp.E_re == 0) and np.all(sp.H_re == 0)


def test_potential_route_self_dual(rng):
    a = 0.5
    P = kerr_poly(a)
    X = random_regular_points(rng, 200, a)
    u, v, w, p = embed_coords(*X.T)
    G = kerr_reference(X, a, 1).G
    d = derivs_at(P, u, v, w, p, G)
    E, H = potential_strength(d)
    W = spinor_to_vector(strength_twistor(d))
    assert np.max(np.linalg.norm(E + 1j * H, axis=-1) / np.linalg.norm(E, axis=-1)) < 1e-12
    assert np.allclose(E, W, rtol=1e-10, atol=1e-14)


def test_weak_gauge_invariance(rng):
    """Psi -> Psi - i grad ln alpha leaves F unchanged: the added field is a pure gradient."""
    a = 0.5
    P = kerr_poly(a)
    alpha = GeneratingPoly([(0, 0, 0, 2.0), (1, 0, 0, 0.3j), (0, 1, 1, 0.1), (2, 1, 0, -0.05)])
    X0 = random_regular_points(rng, 5, a)

    def grad_at(X):
        u, v, w, p = embed_coords(*np.moveaxis(X, -1, 0))
        G = kerr_reference(X, a, 1).G
        return gauge_gradient(derivs_at(P, u, v, w, p, G), alpha, u, p)

    for X in X0:
        # field strength of the gauge term: antisymmetrized derivative of grad ln alpha
        D = fd_gradient(grad_at, X[None], 1e-3)[:, 0]
        curl = D - D.T
        assert np.abs(curl).max() < 1e-8 * (1 + np.abs(D).max())


def test_lorentz_condition_nontrivial_gauge(rng):
    a = 0.5
    P1 = kerr_poly(a).homogenize()
    X = random_regular_points(rng, 20, a, box=1.5, margin=0.4)
    for c in (0.3, 0.2 + 0.4j):
        P2 = TwistorPoly([(1, 0, 0, 0, 1), (0, 0, 0, 0, -1), (0, 0, 1, 0, -c)])
        norm, raw = lorentz_residual(P1, P2, X, kerr_seed_xi(X, a, c))
        assert np.max(norm) < 1e-6


def test_congruence_tangent_examples(rng):
    k, _ = congruence_tangent(0)
    assert np.allclose(k / k[0], [1, 0, 0, 1])
    k, _ = congruence_tangent(1)
    assert np.allclose(k / k[0], [1, 1, 0, 0])
    G = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    k, form = congruence_tangent(G)
    assert np.max(np.abs(minkowski_dot(k, k)) / k[:, 0] ** 2) < 1e-12
    assert np.all(k[:, 0] > 0)
    assert np.allclose(form, k * [1, -1, -1, -1])


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_tangent_null_property(G):
    k, _ = congruence_tangent(G)
    assert abs(minkowski_dot(k, k)) <= 1e-12 * k[0] ** 2


def test_kerr_schild(rng):
    k, form = congruence_tangent(0.3 - 0.7j)
    m = kerr_schild_assemble(0.0, form)
    assert np.allclose(m.g, m.eta)
    for G in rng.normal(size=10) + 1j * rng.normal(size=10):
        _, form = congruence_tangent(G)
        form = form / np.abs(form).max()
        m = kerr_schild_assemble(1.0, form)
        assert abs(m.det + 1) < 1e-12
        assert np.allclose(m.g, m.g.T)
        assert m.null_residual() < 1e-12
    with pytest.raises(NotNull):
        kerr_schild_assemble(1.0, [1, 0, 0, 0])


def test_superposition_breaks_eikonal(rng):
    a = 0.5
    P = kerr_poly(a)
    X = random_regular_points(rng, 200, a)
    u, v, w, p = embed_coords(*X.T)
    Gs = [kerr_reference(X, a, s).G for s in (1, -1)]
    ds = [derivs_at(P, u, v, w, p, G) for G in Gs]
    dS = ds[0].dG + ds[1].dG
    eik = np.abs(dS[0] * dS[1] - dS[2] * dS[3]) / (np.abs(dS[0] * dS[1]) + np.abs(dS[2] * dS[3]))
    assert np.mean(eik > 0.1) >= 0.9
