"""Pure numpy implementations of the batched polynomial kernels.

Same signatures as the compiled ``_kernels`` extension; used when the
extension is not built or ``ALGEBRODYN_PURE_PYTHON`` is set.
"""
import numpy as np


def horner_batch(coeffs, z):
    """Evaluate p and p' for each row of ascending ``coeffs`` at ``z[row, k]``."""
    coeffs = np.ascontiguousarray(coeffs, dtype=complex)
    z = np.asarray(z, dtype=complex)
    n = coeffs.shape[1] - 1
    c = coeffs[:, :, None]
    f = np.broadcast_to(c[:, n], z.shape).copy()
    df = np.zeros_like(z)
    for k in range(n - 1, -1, -1):
        df = df * z + f
        f = f * z + c[:, k]
    return f, df


def initial_guesses(coeffs):
    coeffs = np.asarray(coeffs, dtype=complex)
    n = coeffs.shape[1] - 1
    lead = coeffs[:, n]
    centre = -coeffs[:, n - 1] / (n * lead)
    # Fujiwara-type bound on the root moduli
    bound = np.zeros(coeffs.shape[0])
    for k in range(n):
        bound = np.maximum(bound, np.abs(coeffs[:, k] / lead) ** (1.0 / (n - k)))
    radius = np.maximum(bound, 1e-3)
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    return centre[:, None] + radius[:, None] * np.exp(1j * angles)[None, :]


def aberth_batch(coeffs, maxiter=200, tol=4e-16):
    """Simultaneous Aberth-Ehrlich iteration for a batch of polynomials.

    Parameters
    ----------
    coeffs : (N, n+1) complex
        Ascending coefficients; the leading column must be nonzero.

    Returns
    -------
    roots : (N, n) complex
    iters : (N,) int
        Iterations used per row; ``maxiter`` means not converged.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=complex)
    N, n1 = coeffs.shape
    n = n1 - 1
    iters = np.full(N, maxiter, dtype=np.int32)
    if n == 1:
        roots = (-coeffs[:, 0] / coeffs[:, 1])[:, None]
        iters[:] = 0
        return roots, iters
    z = initial_guesses(coeffs)
    active = np.arange(N)
    eye = np.eye(n, dtype=bool)
    for it in range(maxiter):
        za = z[active]
        f, df = horner_batch(coeffs[active], za)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = np.where(df != 0, f / df, f / 1e-300)
            diff = za[:, :, None] - za[:, None, :]
            diff[:, eye] = np.inf
            s = (1.0 / diff).sum(axis=2)
            step = ratio / (1.0 - ratio * s)
        step = np.where(np.isfinite(step), step, 0.0)
        za = za - step
        z[active] = za
        done = np.all(np.abs(step) <= tol * (1.0 + np.abs(za)), axis=1) | np.all(f == 0, axis=1)
        iters[active[done]] = it + 1
        active = active[~done]
        if active.size == 0:
            break
    return z, iters
