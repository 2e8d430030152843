# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched polynomial kernels (Aberth-Ehrlich, Horner)."""
import numpy as np

from libc.math cimport cos, sin, pow, fmax, M_PI


cdef inline double cmod(double complex z) noexcept nogil:
    return abs(z)


cdef inline double complex crecip(double complex z) noexcept nogil:
    # avoids the libgcc __divdc3 call; inputs here are never near overflow
    cdef double a = z.real, b = z.imag
    cdef double d = a * a + b * b
    return (a - 1j * b) / d


cdef inline void _horner(const double complex* c, int n, double complex z,
                         double complex* f, double complex* df) noexcept nogil:
    cdef double complex fv = c[n]
    cdef double complex dv = 0
    cdef int k
    for k in range(n - 1, -1, -1):
        dv = dv * z + fv
        fv = fv * z + c[k]
    f[0] = fv
    df[0] = dv


cdef int _aberth_one(const double complex* c, int n, double complex* z,
                     int maxiter, double tol) noexcept nogil:
    cdef double complex lead = c[n]
    cdef double complex centre = -c[n - 1] / (n * lead)
    cdef double bound = 0.0
    cdef double radius
    cdef int k, j, it
    cdef double complex f, df, ratio, s, step
    cdef bint done
    for k in range(n):
        bound = fmax(bound, pow(cmod(c[k] / lead), 1.0 / (n - k)))
    radius = fmax(bound, 1e-3)
    for k in range(n):
        z[k] = centre + radius * (cos(2 * M_PI * k / n + 0.4) + 1j * sin(2 * M_PI * k / n + 0.4))
    for it in range(maxiter):
        done = True
        for k in range(n):
            _horner(c, n, z[k], &f, &df)
            if f == 0:
                continue
            if df == 0:
                ratio = f * 1e300
            else:
                ratio = f * crecip(df)
            s = 0
            for j in range(n):
                if j != k:
                    s = s + crecip(z[k] - z[j])
            step = ratio * crecip(1.0 - ratio * s)
            if step != step:
                continue
            z[k] = z[k] - step
            if cmod(step) > tol * (1.0 + cmod(z[k])):
                done = False
        if done:
            return it + 1
    return maxiter


def aberth_batch(coeffs, int maxiter=200, double tol=4e-16):
    cdef double complex[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef Py_ssize_t N = c.shape[0]
    cdef int n = <int>c.shape[1] - 1
    roots = np.empty((N, n), dtype=np.complex128)
    iters = np.empty(N, dtype=np.int32)
    cdef double complex[:, ::1] r = roots
    cdef int[::1] it = iters
    cdef Py_ssize_t i
    if n == 1:
        for i in range(N):
            r[i, 0] = -c[i, 0] / c[i, 1]
            it[i] = 0
        return roots, iters
    with nogil:
        for i in range(N):
            it[i] = _aberth_one(&c[i, 0], n, &r[i, 0], maxiter, tol)
    return roots, iters


def horner_batch(coeffs, z):
    cdef double complex[:, ::1] c = np.ascontiguousarray(coeffs, dtype=np.complex128)
    zz = np.ascontiguousarray(z, dtype=np.complex128)
    cdef double complex[:, ::1] zv = zz
    cdef Py_ssize_t N = zv.shape[0], m = zv.shape[1]
    cdef int n = <int>c.shape[1] - 1
    f = np.empty((N, m), dtype=np.complex128)
    df = np.empty((N, m), dtype=np.complex128)
    cdef double complex[:, ::1] fv = f
    cdef double complex[:, ::1] dv = df
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(N):
            for k in range(m):
                _horner(&c[i, 0], n, zv[i, k], &fv[i, k], &dv[i, k])
    return f, df
