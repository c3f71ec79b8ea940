"""Reference numpy implementations of the hot kernels.

Same signatures and arithmetic as ``_kernels.pyx``; used when the compiled
extension is unavailable or ``FERMIKIN_BACKEND=python`` is set.
"""
import math

import numpy as np


def jacobi_eigvalsh(a, rel_tol=1e-14, max_sweeps=100):
    """Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``rel_tol * ||a||_F``. Returns the eigenvalues sorted ascending.
    """
    A = np.array(a, dtype=np.complex128, copy=True)
    n = A.shape[0]
    norm2 = float(np.vdot(A, A).real)
    if n == 1 or norm2 == 0.0:
        return np.sort(A.diagonal().real.copy())
    thresh = rel_tol * rel_tol * norm2
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = A[offmask]
        if float(np.vdot(off, off).real) <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                r = math.hypot(apq.real, apq.imag)
                if r == 0.0:
                    continue
                e = apq / r
                app = A[p, p].real
                aqq = A[q, q].real
                theta = (aqq - app) / (2.0 * r)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = c * colp - s * e.conjugate() * colq
                A[:, q] = s * colp + c * e.conjugate() * colq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = c * rowp - s * e * rowq
                A[q, :] = s * rowp + c * e * rowq
                A[p, p] = app - t * r
                A[q, q] = aqq + t * r
                A[p, q] = 0.0
                A[q, p] = 0.0
    return np.sort(A.diagonal().real.copy())


def _fermion_rates(rho, omega):
    f = rho.diagonal().real
    a1 = 0.5 * ((1.0 - f) @ omega)
    a2 = 0.5 * (omega @ f)
    return a1, a2


def fermion_rhs(rho, h, omega):
    a1, a2 = _fermion_rates(rho, omega)
    eye = np.eye(rho.shape[0])
    out = 1j * (rho @ h - h @ rho)
    out -= rho * (a1[:, None] + a1[None, :])
    out += (eye - rho) * (a2[:, None] + a2[None, :])
    return out


def fermion_rk4_step(rho, h0, hm, h1, omega, dt):
    k1 = fermion_rhs(rho, h0, omega)
    k2 = fermion_rhs(rho + 0.5 * dt * k1, hm, omega)
    k3 = fermion_rhs(rho + 0.5 * dt * k2, hm, omega)
    k4 = fermion_rhs(rho + dt * k3, h1, omega)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
