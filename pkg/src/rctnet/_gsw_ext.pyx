# cython: language_level=3
"""Compiled kernel for batches of Gram-Schmidt walks.

Same contract and randomness protocol as ``rctnet._gsw_py.gsw_walk``; the
step direction is obtained from a d x d Cholesky solve instead of a batched
LU, so results agree with the numpy kernel up to rounding.
"""

import numpy as np

from libc.math cimport fabs, floor, sqrt
from libc.stdlib cimport free, malloc

cdef double DEGENERATE_STEP = 1e-12


cdef int _chol_solve(double* g, double* b, Py_ssize_t d) noexcept nogil:
    # In-place Cholesky of the row-major SPD matrix g, then solve g x = b into b.
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(d):
        s = g[j * d + j]
        for k in range(j):
            s -= g[j * d + k] * g[j * d + k]
        if s <= 0.0:
            return -1
        s = sqrt(s)
        g[j * d + j] = s
        for i in range(j + 1, d):
            for k in range(j):
                g[i * d + j] -= g[i * d + k] * g[j * d + k]
            g[i * d + j] /= s
    for i in range(d):
        s = b[i]
        for k in range(i):
            s -= g[i * d + k] * b[k]
        b[i] = s / g[i * d + i]
    for i in range(d - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, d):
            s -= g[k * d + i] * b[k]
        b[i] = s / g[i * d + i]
    return 0


cdef Py_ssize_t _pick(char* alive, Py_ssize_t n, double draw) noexcept nogil:
    cdef Py_ssize_t i, count = 0, target
    for i in range(n):
        count += alive[i]
    target = <Py_ssize_t>floor(draw * count)
    if target >= count:
        target = count - 1
    for i in range(n):
        if alive[i]:
            if target == 0:
                return i
            target -= 1
    return -1


cdef int _walk(
    const double[:, ::1] xs,
    double phi,
    double eps,
    const double[:] uni,
    signed char[:] out,
    double* z,
    double* u,
    char* alive,
    double* g,
    double* w,
    bint use_x,
) noexcept nogil:
    cdef Py_ssize_t n = xs.shape[0], d = xs.shape[1]
    cdef Py_ssize_t i, a, b2, p, t, kdraw = 0, n_alive = n
    cdef Py_ssize_t i_plus, i_minus, blk
    cdef double c = 1.0 - phi
    cdef double d_plus, d_minus, tow, awy, au, s_plus, s_minus, delta, face, acc

    for i in range(n):
        z[i] = 0.0
        alive[i] = 1
    p = _pick(alive, n, uni[kdraw])
    kdraw += 1

    t = 0
    while n_alive > 0 and t < n:
        if not alive[p]:
            p = _pick(alive, n, uni[kdraw])
            kdraw += 1

        for i in range(n):
            u[i] = 0.0
        if use_x:
            for a in range(d):
                for b2 in range(d):
                    g[a * d + b2] = phi if a == b2 else 0.0
            for i in range(n):
                if alive[i] and i != p:
                    for a in range(d):
                        for b2 in range(a + 1):
                            g[a * d + b2] += c * xs[i, a] * xs[i, b2]
            for a in range(d):
                for b2 in range(a + 1, d):
                    g[a * d + b2] = g[b2 * d + a]
                w[a] = xs[p, a]
            if _chol_solve(g, w, d) != 0:
                return -1
            for i in range(n):
                if alive[i] and i != p:
                    acc = 0.0
                    for a in range(d):
                        acc += xs[i, a] * w[a]
                    u[i] = -c * acc
        u[p] = 1.0

        d_plus = 1.0e300
        d_minus = 1.0e300
        i_plus = p
        i_minus = p
        for i in range(n):
            if alive[i] and u[i] != 0.0:
                au = fabs(u[i])
                if u[i] > 0.0:
                    tow = (1.0 - z[i]) / au
                    awy = (1.0 + z[i]) / au
                else:
                    tow = (1.0 + z[i]) / au
                    awy = (1.0 - z[i]) / au
                if tow < d_plus:
                    d_plus = tow
                    i_plus = i
                if awy < d_minus:
                    d_minus = awy
                    i_minus = i
        s_plus = 1.0 if u[i_plus] > 0.0 else -1.0
        s_minus = -1.0 if u[i_minus] > 0.0 else 1.0

        if d_plus <= DEGENERATE_STEP or d_minus <= DEGENERATE_STEP:
            if d_plus <= DEGENERATE_STEP:
                z[i_plus] = s_plus
            if d_minus <= DEGENERATE_STEP:
                z[i_minus] = s_minus
        else:
            if uni[n + t] < d_minus / (d_plus + d_minus):
                delta = d_plus
                blk = i_plus
                face = s_plus
            else:
                delta = -d_minus
                blk = i_minus
                face = s_minus
            for i in range(n):
                if alive[i]:
                    z[i] += delta * u[i]
            z[blk] = face

        for i in range(n):
            if alive[i] and fabs(z[i]) >= 1.0 - eps:
                z[i] = 1.0 if z[i] > 0.0 else -1.0
                alive[i] = 0
                n_alive -= 1
        t += 1

    for i in range(n):
        out[i] = 1 if z[i] > 0.0 else -1
    return 0


def gsw_walk(xs, double phi, double eps, uniforms):
    """Run one walk per row of ``uniforms``; see ``rctnet._gsw_py.gsw_walk``."""
    cdef const double[:, ::1] xv = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[:, ::1] uv = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1], reps = uv.shape[0], r
    if uv.shape[1] < 2 * n:
        raise ValueError(f"need {2 * n} uniforms per replicate, got {uv.shape[1]}")
    result = np.empty((reps, n), dtype=np.int8)
    cdef signed char[:, ::1] ov = result
    cdef bint use_x = (1.0 - phi) > 0.0 and d > 0 and bool(np.any(np.asarray(xv)))
    cdef double* z = <double*>malloc(max(n, 1) * sizeof(double))
    cdef double* u = <double*>malloc(max(n, 1) * sizeof(double))
    cdef char* alive = <char*>malloc(max(n, 1) * sizeof(char))
    cdef double* g = <double*>malloc(max(d * d, 1) * sizeof(double))
    cdef double* w = <double*>malloc(max(d, 1) * sizeof(double))
    cdef int status = 0
    if z == NULL or u == NULL or alive == NULL or g == NULL or w == NULL:
        free(z); free(u); free(alive); free(g); free(w)
        raise MemoryError()
    try:
        with nogil:
            for r in range(reps):
                status = _walk(xv, phi, eps, uv[r], ov[r], z, u, alive, g, w, use_x)
                if status != 0:
                    break
    finally:
        free(z); free(u); free(alive); free(g); free(w)
    if status != 0:
        raise ArithmeticError("step-direction system lost positive definiteness")
    return result
