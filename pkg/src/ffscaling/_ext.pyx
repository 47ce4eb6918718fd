# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pure.py``.

Same signatures and semantics; the Newton step uses Tikhonov-regularised
normal equations in place of a minimum-norm least-squares solve.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, cos, sin
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef double complex cplx

cdef int STATUS_OK = 0
cdef int STATUS_FAILED = 1
cdef int STATUS_NODE = 2
cdef int STATUS_JUMP = 3


cdef inline void matvec(const cplx[:, :] h, const cplx* x, cplx* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef cplx acc
    for i in range(n):
        acc = 0
        for j in range(n):
            acc = acc + h[i, j] * x[j]
        out[i] = acc


def rk4_sampled(hs_in, psi0, double dt):
    cdef const cplx[:, :, :] hs = np.ascontiguousarray(hs_in, dtype=np.complex128)
    cdef Py_ssize_t n = (hs.shape[0] - 1) // 2
    cdef Py_ssize_t dim = hs.shape[1]
    out_arr = np.empty((n + 1, dim), dtype=np.complex128)
    cdef cplx[:, :] out = out_arr
    cdef cplx* y = <cplx*> malloc(6 * dim * sizeof(cplx))
    if y == NULL:
        raise MemoryError()
    cdef cplx* tmp = y + dim
    cdef cplx* k1 = y + 2 * dim
    cdef cplx* k2 = y + 3 * dim
    cdef cplx* k3 = y + 4 * dim
    cdef cplx* k4 = y + 5 * dim
    cdef cplx mi = -1j
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef Py_ssize_t j, i
    cdef const cplx[:] p0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    try:
        with nogil:
            for i in range(dim):
                y[i] = p0[i]
                out[0, i] = y[i]
            for j in range(n):
                matvec(hs[2 * j], y, k1, dim)
                for i in range(dim):
                    k1[i] = mi * k1[i]
                    tmp[i] = y[i] + half * k1[i]
                matvec(hs[2 * j + 1], tmp, k2, dim)
                for i in range(dim):
                    k2[i] = mi * k2[i]
                    tmp[i] = y[i] + half * k2[i]
                matvec(hs[2 * j + 1], tmp, k3, dim)
                for i in range(dim):
                    k3[i] = mi * k3[i]
                    tmp[i] = y[i] + dt * k3[i]
                matvec(hs[2 * j + 2], tmp, k4, dim)
                for i in range(dim):
                    k4[i] = mi * k4[i]
                    y[i] = y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                    out[j + 1, i] = y[i]
    finally:
        free(y)
    return out_arr


cdef inline double cimag(cplx z) noexcept nogil:
    return z.imag


cdef inline double cabs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef double residual_jac(
    const double* phi, const cplx[:] apsi, const cplx[:, :] b, const cplx[:] psil,
    const double[:, :] xdiag, Py_ssize_t n, Py_ssize_t m,
    cplx* y, cplx* by, cplx* w, double* r, double* jac,
) noexcept nogil:
    """Fill r (n) and jac (n x m, row major); return max |r|."""
    cdef Py_ssize_t s, a, j
    cdef double theta, mag, res = 0.0
    cdef cplx acc, d, term
    for s in range(n):
        theta = 0.0
        for a in range(m):
            theta += phi[a] * xdiag[a, s]
        y[s] = (cos(theta) - 1j * sin(theta)) * psil[s]
    matvec(b, y, by, n)
    for s in range(n):
        mag = sqrt(cabs2(psil[s]))
        if mag > 0:
            r[s] = cimag(psil[s].conjugate() * apsi[s] - y[s].conjugate() * by[s]) / mag
        else:
            r[s] = 0.0
        if fabs(r[s]) > res:
            res = fabs(r[s])
    for a in range(m):
        for j in range(n):
            w[j] = xdiag[a, j] * y[j]
        for s in range(n):
            acc = 0
            for j in range(n):
                acc = acc + b[s, j] * w[j]
            mag = sqrt(cabs2(psil[s]))
            if mag > 0:
                term = y[s].conjugate() * by[s]
                d = 1j * xdiag[a, s] * term - 1j * y[s].conjugate() * acc
                jac[s * m + a] = -cimag(d) / mag
            else:
                jac[s * m + a] = 0.0
    return res


cdef int gauss_newton_step(
    const double* jac, const double* r, Py_ssize_t n, Py_ssize_t m,
    double* ata, double* rhs, double* step,
) noexcept nogil:
    """Solve (J^T J + mu I) step = -J^T r by Gaussian elimination with pivoting."""
    cdef Py_ssize_t i, j, k, p
    cdef double acc, trace = 0.0, mu, best, f, tmp
    for i in range(m):
        for j in range(m):
            acc = 0.0
            for k in range(n):
                acc += jac[k * m + i] * jac[k * m + j]
            ata[i * m + j] = acc
        trace += ata[i * m + i]
        acc = 0.0
        for k in range(n):
            acc += jac[k * m + i] * r[k]
        rhs[i] = -acc
    mu = 1e-26 * trace / m + 1e-300
    for i in range(m):
        ata[i * m + i] += mu
    for i in range(m):
        p = i
        best = fabs(ata[i * m + i])
        for k in range(i + 1, m):
            if fabs(ata[k * m + i]) > best:
                best = fabs(ata[k * m + i])
                p = k
        if best == 0.0:
            return -1
        if p != i:
            for j in range(m):
                tmp = ata[i * m + j]
                ata[i * m + j] = ata[p * m + j]
                ata[p * m + j] = tmp
            tmp = rhs[i]
            rhs[i] = rhs[p]
            rhs[p] = tmp
        for k in range(i + 1, m):
            f = ata[k * m + i] / ata[i * m + i]
            for j in range(i, m):
                ata[k * m + j] -= f * ata[i * m + j]
            rhs[k] -= f * rhs[i]
    for i in range(m - 1, -1, -1):
        acc = rhs[i]
        for j in range(i + 1, m):
            acc -= ata[i * m + j] * step[j]
        step[i] = acc / ata[i * m + i]
    return 0


def reality_sweep(apsi_in, bs_in, psil_in, xdiag_in, history, Py_ssize_t start, Py_ssize_t stop,
                  double tol, int max_iter, double node_eps, double jump):
    cdef const cplx[:, :] apsi = np.ascontiguousarray(apsi_in, dtype=np.complex128)
    cdef const cplx[:, :, :] bs = np.ascontiguousarray(bs_in, dtype=np.complex128)
    cdef const cplx[:, :] psil = np.ascontiguousarray(psil_in, dtype=np.complex128)
    cdef const double[:, :] xdiag = np.ascontiguousarray(xdiag_in, dtype=np.float64)
    cdef Py_ssize_t n = psil.shape[1]
    cdef Py_ssize_t m = xdiag.shape[0]
    phases_arr = np.zeros((stop - start, m))
    resid_arr = np.zeros(stop - start)
    cdef double[:, :] phases = phases_arr
    cdef double[:] resids = resid_arr
    hist_arr = np.ascontiguousarray(np.atleast_2d(history)[-3:], dtype=np.float64)
    cdef const double[:, :] hist_v = hist_arr
    cdef Py_ssize_t nh = hist_v.shape[0]

    cdef cplx* cbuf = <cplx*> malloc(3 * n * sizeof(cplx))
    cdef double* dbuf = <double*> malloc((n + n * m + m * m + 7 * m) * sizeof(double))
    if cbuf == NULL or dbuf == NULL:
        free(cbuf)
        free(dbuf)
        raise MemoryError()
    cdef cplx* y = cbuf
    cdef cplx* by = cbuf + n
    cdef cplx* w = cbuf + 2 * n
    cdef double* r = dbuf
    cdef double* jac = dbuf + n
    cdef double* ata = jac + n * m
    cdef double* rhs = ata + m * m
    cdef double* step = rhs + m
    cdef double* x = step + m
    cdef double* xprev = x + m
    cdef double* xp = xprev + m
    cdef double* x1 = xp + m
    cdef double* x2 = x1 + m

    cdef Py_ssize_t k, a, s, it
    cdef double res, resp, snorm, xnorm, mn, dev
    cdef int status = STATUS_OK
    cdef Py_ssize_t index = stop
    try:
        with nogil:
            # xprev, x1, x2: newest to oldest accepted solutions
            for a in range(m):
                xprev[a] = hist_v[nh - 1, a]
                x1[a] = hist_v[nh - 2, a] if nh >= 2 else 0.0
                x2[a] = hist_v[nh - 3, a] if nh >= 3 else 0.0
            for k in range(start, stop):
                mn = 1e300
                for s in range(n):
                    if sqrt(cabs2(psil[k, s])) < mn:
                        mn = sqrt(cabs2(psil[k, s]))
                if mn < node_eps:
                    status = STATUS_NODE
                    index = k
                    break
                for a in range(m):
                    if nh >= 3:
                        x[a] = 3.0 * xprev[a] - 3.0 * x1[a] + x2[a]
                    elif nh == 2:
                        x[a] = 2.0 * xprev[a] - x1[a]
                    else:
                        x[a] = xprev[a]
                res = residual_jac(x, apsi[k], bs[k], psil[k], xdiag, n, m, y, by, w, r, jac)
                it = 0
                while res > tol and it < max_iter:
                    if gauss_newton_step(jac, r, n, m, ata, rhs, step) != 0:
                        break
                    snorm = 0.0
                    xnorm = 0.0
                    for a in range(m):
                        x[a] += step[a]
                        snorm += step[a] * step[a]
                        xnorm += x[a] * x[a]
                    res = residual_jac(x, apsi[k], bs[k], psil[k], xdiag, n, m, y, by, w, r, jac)
                    it += 1
                    if sqrt(snorm) <= 1e-15 * (1.0 + sqrt(xnorm)):
                        break
                if res <= tol:
                    if gauss_newton_step(jac, r, n, m, ata, rhs, step) == 0:
                        for a in range(m):
                            xp[a] = x[a] + step[a]
                        resp = residual_jac(xp, apsi[k], bs[k], psil[k], xdiag, n, m, y, by, w, r, jac)
                        if resp <= res:
                            res = resp
                            for a in range(m):
                                x[a] = xp[a]
                if res > tol:
                    status = STATUS_FAILED
                    index = k
                    break
                dev = 0.0
                for a in range(m):
                    if fabs(x[a] - xprev[a]) > dev:
                        dev = fabs(x[a] - xprev[a])
                if dev > jump:
                    status = STATUS_JUMP
                    index = k
                    break
                for a in range(m):
                    phases[k - start, a] = x[a]
                    x2[a] = x1[a]
                    x1[a] = xprev[a]
                    xprev[a] = x[a]
                if nh < 3:
                    nh += 1
                resids[k - start] = res
    finally:
        free(cbuf)
        free(dbuf)
    return phases_arr, resid_arr, status, index
