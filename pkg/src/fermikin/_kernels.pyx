"""Compiled hot kernels: Hermitian Jacobi eigenvalues and the fermion RHS.

Mirrors ``fermikin._pykernels`` operation for operation; the test suite
checks the two against each other.
"""
import numpy as np

from libc.math cimport sqrt, fabs, hypot, copysign


def jacobi_eigvalsh(a, double rel_tol=1e-14, int max_sweeps=100):
    cdef double complex[:, ::1] A = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j, k, p, q
    cdef double norm2 = 0.0, off, thresh, r, app, aqq, theta, t, c, s
    cdef double complex apq, e, ec, akp, akq
    cdef int sweep

    for i in range(n):
        for j in range(n):
            norm2 += A[i, j].real * A[i, j].real + A[i, j].imag * A[i, j].imag
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] w = out
    if n == 1 or norm2 == 0.0:
        for i in range(n):
            w[i] = A[i, i].real
        out.sort()
        return out
    thresh = rel_tol * rel_tol * norm2

    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += A[i, j].real * A[i, j].real + A[i, j].imag * A[i, j].imag
        if off <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                r = hypot(apq.real, apq.imag)
                if r == 0.0:
                    continue
                e = apq / r
                ec = e.conjugate()
                app = A[p, p].real
                aqq = A[q, q].real
                theta = (aqq - app) / (2.0 * r)
                if fabs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * ec * akq
                    A[k, q] = s * akp + c * ec * akq
                for k in range(n):
                    akp = A[p, k]
                    akq = A[q, k]
                    A[p, k] = c * akp - s * e * akq
                    A[q, k] = s * akp + c * e * akq
                A[p, p] = app - t * r
                A[q, q] = aqq + t * r
                A[p, q] = 0.0
                A[q, p] = 0.0

    for i in range(n):
        w[i] = A[i, i].real
    out.sort()
    return out


cdef void _fermion_rhs(const double complex[:, ::1] rho, const double complex[:, ::1] h,
                       const double[:, ::1] omega, double[::1] a1, double[::1] a2,
                       double complex[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double complex comm, hole
    for i in range(n):
        a1[i] = 0.0
        a2[i] = 0.0
    for i in range(n):
        for j in range(n):
            # a1[j] += w[i,j](1 - f_i); a2[i] += w[i,j] f_j
            a1[j] += 0.5 * omega[i, j] * (1.0 - rho[i, i].real)
            a2[i] += 0.5 * omega[i, j] * rho[j, j].real
    for i in range(n):
        for j in range(n):
            comm = 0.0
            for k in range(n):
                comm = comm + rho[i, k] * h[k, j] - h[i, k] * rho[k, j]
            hole = -rho[i, j]
            if i == j:
                hole = hole + 1.0
            out[i, j] = 1j * comm - rho[i, j] * (a1[i] + a1[j]) + hole * (a2[i] + a2[j])


def fermion_rhs(rho, h, omega):
    cdef const double complex[:, ::1] r = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef const double complex[:, ::1] hh = np.ascontiguousarray(h, dtype=np.complex128)
    cdef const double[:, ::1] w = np.ascontiguousarray(omega, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0]
    out = np.empty((n, n), dtype=np.complex128)
    cdef double[::1] a1 = np.empty(n)
    cdef double[::1] a2 = np.empty(n)
    _fermion_rhs(r, hh, w, a1, a2, out)
    return out


def fermion_rk4_step(rho, h0, hm, h1, omega, double dt):
    cdef const double complex[:, ::1] r = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef const double complex[:, ::1] g0 = np.ascontiguousarray(h0, dtype=np.complex128)
    cdef const double complex[:, ::1] gm = np.ascontiguousarray(hm, dtype=np.complex128)
    cdef const double complex[:, ::1] g1 = np.ascontiguousarray(h1, dtype=np.complex128)
    cdef const double[:, ::1] w = np.ascontiguousarray(omega, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t i, j
    cdef double[::1] a1 = np.empty(n)
    cdef double[::1] a2 = np.empty(n)
    cdef double complex[:, ::1] k1 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k2 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k3 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k4 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.empty((n, n), dtype=np.complex128)
    out = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    with nogil:
        _fermion_rhs(r, g0, w, a1, a2, k1)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = r[i, j] + 0.5 * dt * k1[i, j]
        _fermion_rhs(tmp, gm, w, a1, a2, k2)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = r[i, j] + 0.5 * dt * k2[i, j]
        _fermion_rhs(tmp, gm, w, a1, a2, k3)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = r[i, j] + dt * k3[i, j]
        _fermion_rhs(tmp, g1, w, a1, a2, k4)
        for i in range(n):
            for j in range(n):
                o[i, j] = r[i, j] + (dt / 6.0) * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
    return out
