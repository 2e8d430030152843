"""Backend selection for the batched root-finding kernels.

The compiled extension is used when importable; setting the environment
variable ``ALGEBRODYN_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("ALGEBRODYN_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled

        _impl = _compiled
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

LEAD_TOL = 1e-13


def use_backend(name):
    """Switch backend at runtime (``"cython"`` or ``"python"``); returns the previous one."""
    global _impl, BACKEND
    previous = BACKEND
    if name == "python":
        _impl, BACKEND = _kernels_py, "python"
    elif name == "cython":
        from . import _kernels as _compiled

        _impl, BACKEND = _compiled, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def aberth_batch(coeffs, maxiter=200, tol=4e-16):
    return _impl.aberth_batch(coeffs, maxiter, tol)


def horner_batch(coeffs, z):
    return _impl.horner_batch(coeffs, z)


def companion_roots(coeffs):
    """Eigenvalues of the companion matrices of a batch (leading column nonzero)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    N, n1 = coeffs.shape
    n = n1 - 1
    comp = np.zeros((N, n, n), dtype=complex)
    comp[:, 1:, :-1] = np.eye(n - 1)
    comp[:, :, -1] = -coeffs[:, :n] / coeffs[:, n : n + 1]
    return np.linalg.eigvals(comp)


def _polish(coeffs, roots, steps=2):
    for _ in range(steps):
        f, df = horner_batch(coeffs, roots)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        ok = np.isfinite(step) & (np.abs(step) < 1e-6 * (1 + np.abs(roots)))
        roots = np.where(ok, roots - step, roots)
    return roots


def polyroots(coeffs, maxiter=200):
    """All roots of a batch of polynomials, sorted by (real, imag) per row.

    Rows whose leading coefficient is negligible are solved in the
    reciprocal variable ``H = 1/G``; the vanishing ``H`` roots come back as
    ``inf``.  Rows that are identically zero return NaN.

    Returns
    -------
    roots : (N, n) complex
    converged : (N,) bool
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    N, n1 = coeffs.shape
    n = n1 - 1
    if n < 1:
        raise ValueError("polynomial degree must be at least 1")
    scale = np.abs(coeffs).max(axis=1)
    zero = scale == 0
    small_lead = (np.abs(coeffs[:, n]) <= LEAD_TOL * scale) & ~zero
    work = coeffs.copy()
    work[small_lead] = coeffs[small_lead, ::-1]
    work[zero] = 0
    work[zero, n] = 1
    # row-normalize so tolerances are scale free
    work = work / np.abs(work).max(axis=1, keepdims=True)
    lead_bad = np.abs(work[:, n]) <= LEAD_TOL
    work[lead_bad, n] = LEAD_TOL  # both ends degenerate; perturb and flag
    roots, iters = aberth_batch(work, maxiter)
    converged = iters < maxiter
    if not converged.all():
        bad = ~converged
        comp = companion_roots(work[bad])
        roots[bad] = _polish(work[bad], comp)
        f, _ = horner_batch(work[bad], roots[bad])
        converged[bad] = np.all(np.abs(f) < 1e-8, axis=1)
    if small_lead.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            h = roots[small_lead]
            g = np.where(np.abs(h) <= 1e-12, complex(np.inf, 0.0), 1.0 / h)
        roots[small_lead] = g
    roots[zero] = np.nan
    converged[zero | lead_bad] = False
    order = np.lexsort((roots.imag, roots.real), axis=-1)
    roots = np.take_along_axis(roots, order, axis=1)
    return roots, converged
