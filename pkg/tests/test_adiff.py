import json

import numpy as np
import pytest

from algebrodyn.adiff import (
    AlgebraSpec, biquat_jacobian, complex_numbers, conformal_factor, dual_numbers, ncd_factorize, quaternions,
    reconstruction_error, scheffers_check,
)
from algebrodyn.algebra import Biquat, Quaternion, bq_inv, quat_to_biquat
from algebrodyn.errors import NonCommutativeAlgebra, NotConformal, NotFactorizable, ValidationError


def _cmul(a, b):
    return np.array([a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]])


def _dmul(a, b):
    return np.array([a[0] * b[0], a[0] * b[1] + a[1] * b[0]])


def test_algebra_axioms():
    for spec in (complex_numbers(), dual_numbers(), quaternions()):
        assert spec.associativity_residual() < 1e-14
        assert spec.unit_residual() < 1e-14
    assert complex_numbers().is_commutative and not quaternions().is_commutative


def test_algebra_json(tmp_path):
    spec = dual_numbers()
    doc = {"dim": 2, "unit": 0, "c": spec.c.real.tolist()}
    again = AlgebraSpec.from_json(json.dumps(doc))
    assert np.array_equal(again.c, spec.c)
    pairs = {"dim": 2, "c": np.stack([spec.c.real, spec.c.imag], -1).tolist()}
    path = tmp_path / "alg.json"
    path.write_text(json.dumps(pairs))
    assert np.array_equal(AlgebraSpec.from_json(str(path)).c, spec.c)
    with pytest.raises(ValidationError):
        AlgebraSpec.from_dict({"dim": 3, "c": spec.c.real.tolist()})
    with pytest.raises(ValidationError):
        AlgebraSpec.from_dict({"dim": 2})


def test_scheffers_complex():
    res = scheffers_check(lambda z: _cmul(z, z), complex_numbers(), [1.0, 1.0])
    assert res.ok and np.allclose(res.H, [2, 2], atol=1e-8)
    bad = scheffers_check(lambda z: np.array([z[0], -z[1]]), complex_numbers(), [1.0, 1.0])
    assert not bad.ok and abs(bad.residual - 1) < 1e-6
    # holomorphic sample with a nontrivial derivative
    res = scheffers_check(lambda z: np.array([np.exp(z[0]) * np.cos(z[1]), np.exp(z[0]) * np.sin(z[1])]), complex_numbers(), [0.3, -0.4])
    assert res.ok and np.allclose(res.H, [np.exp(0.3) * np.cos(0.4), -np.exp(0.3) * np.sin(0.4)], atol=1e-8)


def test_scheffers_dual():
    a, b = 1.3, -0.7
    res = scheffers_check(lambda z: _dmul(z, z), dual_numbers(), [a, b])
    assert res.ok and np.allclose(res.H, [2 * a, 2 * b], atol=1e-8)


def test_scheffers_noncommutative():
    with pytest.raises(NonCommutativeAlgebra):
        scheffers_check(lambda z: z, quaternions(), np.ones(4))


def _random_biquat(rng):
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return Biquat.from_matrix(m)


def _proportional(A, B):
    a, b = np.asarray(A).reshape(-1), np.asarray(B).reshape(-1)
    alpha = np.vdot(a, b) / np.vdot(a, a)
    return np.linalg.norm(b - alpha * a) / np.linalg.norm(b)


def test_linear_map(rng):
    A, B, Z = (_random_biquat(rng) for _ in range(3))
    res = ncd_factorize(lambda X: A @ X + B, Z)
    assert _proportional(A.matrix, res.L) < 1e-9 and _proportional(np.eye(2), res.R) < 1e-9
    assert abs(np.linalg.norm(res.L) - 1) < 1e-14
    assert reconstruction_error(res, lambda X: A @ X + B, Z) < 1e-9


def test_inversion(rng):
    Z = _random_biquat(rng)
    Zi = bq_inv(Z).matrix
    res = ncd_factorize(bq_inv, Z)
    assert _proportional(-Zi, res.L) < 1e-8 and _proportional(Zi, res.R) < 1e-8
    # against the exact Jacobian dZ -> -Z^-1 dZ Z^-1
    exact = np.kron(Zi.T, -Zi)
    assert np.linalg.norm(np.kron(res.R.T, res.L) - exact) / np.linalg.norm(exact) < 1e-8


def test_alpha_gauge(rng):
    Z = _random_biquat(rng)
    res = ncd_factorize(bq_inv, Z)
    for alpha in (2.0, 1j, 0.3 - 4j):
        a = np.kron(res.R.T, res.L)
        b = np.kron((res.R / alpha).T, alpha * res.L)
        assert np.abs(a - b).max() < 1e-12 * np.abs(a).max()
    assert "alpha" in res.alpha_gauge_note


def test_compositions(rng):
    A, B, C = (_random_biquat(rng) for _ in range(3))
    maps = [
        lambda X: X + B,
        lambda X: A @ X @ bq_inv(A),
        lambda X: 2.5 * X,
        bq_inv,
    ]
    for _ in range(6):
        idx = rng.integers(0, 4, 3)

        def F(X, idx=idx):
            for i in idx:
                X = maps[i](X)
            return X

        Z = _random_biquat(rng)
        res = ncd_factorize(F, Z)
        assert reconstruction_error(res, F, Z) < 1e-9
    F = lambda X: bq_inv(A @ X + C)
    assert reconstruction_error(ncd_factorize(F, Z), F, Z) < 1e-9


def test_not_factorizable(rng):
    Z = _random_biquat(rng)
    with pytest.raises(NotFactorizable):
        ncd_factorize(lambda X: Biquat.from_matrix(X.matrix.conj()), Z)
    with pytest.raises(NotFactorizable):
        ncd_factorize(lambda X: X @ X, Z)
    with pytest.raises(NotFactorizable):
        ncd_factorize(lambda X: Biquat.from_matrix(X.matrix.T), Z)


def test_jacobian_matrix_input(rng):
    Z = _random_biquat(rng).matrix
    Jz, Jzb = biquat_jacobian(lambda m: m @ m, Z)
    exact = np.kron(Z.T, np.eye(2)) + np.kron(np.eye(2), Z)
    assert np.abs(Jz - exact).max() < 1e-8 and np.abs(Jzb).max() < 1e-8


def test_conformal_factors(rng):
    q = Quaternion(*rng.normal(size=4))
    a = Quaternion(*rng.normal(size=4))
    a = a * (1 / np.sqrt(a.norm2()))
    ab = quat_to_biquat(a)
    assert abs(conformal_factor(lambda X: ab @ X @ bq_inv(ab), q) - 1) < 1e-8
    assert abs(conformal_factor(lambda X: 1.7 * X, q) - 1.7**2) < 1e-8
    assert abs(conformal_factor(bq_inv, q) - 1 / q.norm2() ** 2) < 1e-8 / q.norm2() ** 2
    with pytest.raises(NotConformal):
        conformal_factor(lambda X: X @ X, q)
    with pytest.raises(NotConformal):
        conformal_factor(lambda X: Biquat(X.u, X.v, 2 * X.w, 2 * X.p), q)
