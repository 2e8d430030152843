import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def kerr_seed_xi(X, a, c=0.0):
    """Spinor seed ``lam (1, G+)`` for the gauge ``xi0 - 1 - c k0 = 0``."""
    from algebrodyn.algebra import embed_coords

    t, x, y, z = np.moveaxis(np.asarray(X, dtype=float), -1, 0)
    rs = np.sqrt(x * x + y * y + (z + 1j * a) ** 2)
    G = (x + 1j * y) / ((z + 1j * a) + rs)
    u, v, w, p = embed_coords(t, x, y, z)
    lam = 1 / (1 - c * (w * G + u))
    return np.stack([lam, lam * G], -1)


def random_regular_points(rng, n, a=0.5, box=2.0, margin=0.2):
    """Points away from the Kerr ring and the z axis."""
    X = rng.uniform(-box, box, (4 * n, 4))
    rho = np.hypot(X[:, 1], X[:, 2])
    ok = (np.hypot(rho - a, X[:, 3]) > margin) & (rho > margin)
    return X[ok][:n]
