# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping kernels.

Same call signatures as :mod:`qcgate._pykernels`. Matrices are at most
8 x 8, so everything works on small stack buffers and the step loops run
without the GIL.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, cos, sin

cnp.import_array()

ctypedef double complex cplx

cdef enum:
    MAXD = 8
    MAXD2 = 64

cdef double JACOBI_TOL = 1e-14
cdef int JACOBI_MAX_SWEEPS = 100
cdef double MAGNUS_C = 0.28867513459481287  # sqrt(3) / 6


cdef inline double _abs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline cplx _cis(double theta) noexcept nogil:
    # exp(-i theta)
    cdef cplx z = cos(theta) - 1j * sin(theta)
    return z


cdef int _jacobi(cplx* a, cplx* v, double* w, int n) noexcept nogil:
    """Cyclic complex Jacobi on the Hermitian n x n matrix ``a`` (destroyed).

    Columns of ``v`` receive the eigenvectors, ``w`` the ascending
    eigenvalues. Returns the number of sweeps, or -1 without convergence.
    """
    cdef int i, j, k, p, q, sweep, best
    cdef double off, scale, r, app, aqq, theta, t, c, s, thresh, tmpw
    cdef cplx e, jpp, jpq, jqp, jqq, x, y
    cdef int converged = 0

    for i in range(n):
        for j in range(n):
            v[i * n + j] = 1.0 if i == j else 0.0
    scale = 0.0
    for i in range(n * n):
        scale += _abs2(a[i])
    thresh = JACOBI_TOL * sqrt(scale)

    for sweep in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += _abs2(a[p * n + q])
        if sqrt(off) <= thresh:
            converged = 1
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                r = sqrt(_abs2(a[p * n + q]))
                if r == 0.0:
                    continue
                e = a[p * n + q] / r
                app = a[p * n + p].real
                aqq = a[q * n + q].real
                theta = (aqq - app) / (2.0 * r)
                if fabs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                jpp = c
                jpq = s
                jqp = -s * e.conjugate()
                jqq = c * e.conjugate()
                for k in range(n):
                    x = a[k * n + p]
                    y = a[k * n + q]
                    a[k * n + p] = x * jpp + y * jqp
                    a[k * n + q] = x * jpq + y * jqq
                for k in range(n):
                    x = a[p * n + k]
                    y = a[q * n + k]
                    a[p * n + k] = jpp.conjugate() * x + jqp.conjugate() * y
                    a[q * n + k] = jpq.conjugate() * x + jqq.conjugate() * y
                a[p * n + q] = 0.0
                a[q * n + p] = 0.0
                a[p * n + p] = a[p * n + p].real
                a[q * n + q] = a[q * n + q].real
                for k in range(n):
                    x = v[k * n + p]
                    y = v[k * n + q]
                    v[k * n + p] = x * jpp + y * jqp
                    v[k * n + q] = x * jpq + y * jqq

    for i in range(n):
        w[i] = a[i * n + i].real
    # selection sort, n <= 8
    for i in range(n - 1):
        best = i
        for j in range(i + 1, n):
            if w[j] < w[best]:
                best = j
        if best != i:
            tmpw = w[i]
            w[i] = w[best]
            w[best] = tmpw
            for k in range(n):
                x = v[k * n + i]
                v[k * n + i] = v[k * n + best]
                v[k * n + best] = x
    if not converged:
        return -1
    return sweep


cdef inline void _matmul(const cplx* a, const cplx* b, cplx* out, int n) noexcept nogil:
    cdef int i, j, k
    cdef cplx acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc = acc + a[i * n + k] * b[k * n + j]
            out[i * n + j] = acc


cdef int _exp_from_hermitian(cplx* k_mat, cplx* out, int n) noexcept nogil:
    """out = exp(-i K) for Hermitian K (destroyed)."""
    cdef cplx v[MAXD2]
    cdef double w[MAXD]
    cdef cplx ph[MAXD]
    cdef int i, j, m, status
    cdef cplx acc
    status = _jacobi(k_mat, v, w, n)
    for m in range(n):
        ph[m] = _cis(w[m])
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for m in range(n):
                acc = acc + v[i * n + m] * ph[m] * v[j * n + m].conjugate()
            out[i * n + j] = acc
    return status


def eigh(h):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix."""
    cdef cplx[:, ::1] hv = np.ascontiguousarray(h, dtype=np.complex128)
    cdef int n = hv.shape[0]
    if n > MAXD or hv.shape[1] != n:
        raise ValueError(f"expected a square matrix of size <= {MAXD}, got {h.shape}")
    cdef cplx a[MAXD2]
    cdef cplx v[MAXD2]
    cdef double w[MAXD]
    cdef int i, j, status
    for i in range(n):
        for j in range(n):
            a[i * n + j] = hv[i, j]
    with nogil:
        status = _jacobi(a, v, w, n)
    if status < 0:
        raise ArithmeticError("Jacobi eigensolver did not converge")
    wout = np.empty(n, dtype=np.float64)
    vout = np.empty((n, n), dtype=np.complex128)
    cdef double[::1] wv = wout
    cdef cplx[:, ::1] vv = vout
    for i in range(n):
        wv[i] = w[i]
        for j in range(n):
            vv[i, j] = v[i * n + j]
    return wout, vout


def expm_herm(h, double s):
    """exp(-i s h) for Hermitian h."""
    cdef cplx[:, ::1] hv = np.ascontiguousarray(h, dtype=np.complex128)
    cdef int n = hv.shape[0]
    if n > MAXD or hv.shape[1] != n:
        raise ValueError(f"expected a square matrix of size <= {MAXD}, got {h.shape}")
    cdef cplx a[MAXD2]
    cdef cplx u[MAXD2]
    cdef int i, j, status
    for i in range(n):
        for j in range(n):
            a[i * n + j] = s * hv[i, j]
    with nogil:
        status = _exp_from_hermitian(a, u, n)
    if status < 0:
        raise ArithmeticError("Jacobi eigensolver did not converge")
    out = np.empty((n, n), dtype=np.complex128)
    cdef cplx[:, ::1] ov = out
    for i in range(n):
        for j in range(n):
            ov[i, j] = u[i * n + j]
    return out


def chain_magnus4(h1, h2, double dt, int stride):
    """Accumulate U over steps using the two-node fourth-order Magnus step.

    ``h1[k]``, ``h2[k]`` are the Hamiltonians at the Gauss-Legendre nodes of
    step k. Returns U after every ``stride`` steps, starting with identity.
    """
    cdef cplx[:, :, ::1] a1 = np.ascontiguousarray(h1, dtype=np.complex128)
    cdef cplx[:, :, ::1] a2 = np.ascontiguousarray(h2, dtype=np.complex128)
    cdef Py_ssize_t nsteps = a1.shape[0]
    cdef int n = a1.shape[1]
    if n > MAXD or a2.shape[0] != nsteps:
        raise ValueError("inconsistent Hamiltonian samples")
    if stride < 1 or nsteps % stride != 0:
        raise ValueError("stride must divide the number of steps")
    out = np.empty((nsteps // stride + 1, n, n), dtype=np.complex128)
    cdef cplx[:, :, ::1] ov = out
    cdef cplx u[MAXD2]
    cdef cplx km[MAXD2]
    cdef cplx step[MAXD2]
    cdef cplx tmp[MAXD2]
    cdef cplx p12[MAXD2]
    cdef cplx p21[MAXD2]
    cdef Py_ssize_t k, slot = 0
    cdef int i, j, bad = 0
    cdef double half = 0.5 * dt
    cdef cplx comm_scale = 1j * (MAGNUS_C * 0.5) * dt * dt  # i sqrt(3)/12 dt^2

    with nogil:
        for i in range(n * n):
            u[i] = 0.0
        for i in range(n):
            u[i * n + i] = 1.0
        for i in range(n):
            for j in range(n):
                ov[0, i, j] = u[i * n + j]
        for k in range(nsteps):
            _matmul(&a1[k, 0, 0], &a2[k, 0, 0], p12, n)
            _matmul(&a2[k, 0, 0], &a1[k, 0, 0], p21, n)
            for i in range(n):
                for j in range(n):
                    km[i * n + j] = half * (a1[k, i, j] + a2[k, i, j]) \
                        + comm_scale * (p12[i * n + j] - p21[i * n + j])
            if _exp_from_hermitian(km, step, n) < 0:
                bad = 1
            _matmul(step, u, tmp, n)
            for i in range(n * n):
                u[i] = tmp[i]
            if (k + 1) % stride == 0:
                slot = (k + 1) // stride
                for i in range(n):
                    for j in range(n):
                        ov[slot, i, j] = u[i * n + j]
    if bad:
        raise ArithmeticError("Jacobi eigensolver did not converge")
    return out


def chain_midpoint(hm, double dt, int stride):
    """Accumulate U with one exponential of the midpoint Hamiltonian per step."""
    cdef cplx[:, :, ::1] am = np.ascontiguousarray(hm, dtype=np.complex128)
    cdef Py_ssize_t nsteps = am.shape[0]
    cdef int n = am.shape[1]
    if n > MAXD:
        raise ValueError("matrix too large")
    if stride < 1 or nsteps % stride != 0:
        raise ValueError("stride must divide the number of steps")
    out = np.empty((nsteps // stride + 1, n, n), dtype=np.complex128)
    cdef cplx[:, :, ::1] ov = out
    cdef cplx u[MAXD2]
    cdef cplx km[MAXD2]
    cdef cplx step[MAXD2]
    cdef cplx tmp[MAXD2]
    cdef Py_ssize_t k, slot
    cdef int i, j, bad = 0

    with nogil:
        for i in range(n * n):
            u[i] = 0.0
        for i in range(n):
            u[i * n + i] = 1.0
        for i in range(n):
            for j in range(n):
                ov[0, i, j] = u[i * n + j]
        for k in range(nsteps):
            for i in range(n):
                for j in range(n):
                    km[i * n + j] = dt * am[k, i, j]
            if _exp_from_hermitian(km, step, n) < 0:
                bad = 1
            _matmul(step, u, tmp, n)
            for i in range(n * n):
                u[i] = tmp[i]
            if (k + 1) % stride == 0:
                slot = (k + 1) // stride
                for i in range(n):
                    for j in range(n):
                        ov[slot, i, j] = u[i * n + j]
    if bad:
        raise ArithmeticError("Jacobi eigensolver did not converge")
    return out


cdef void _lindblad_rhs(const cplx* h, const cplx* rho, const cplx* ls, const cplx* ldl,
                        int nl, double gamma, cplx* out, int n) noexcept nogil:
    cdef cplx t1[MAXD2]
    cdef cplx t2[MAXD2]
    cdef int i, j, k, l
    cdef cplx acc
    _matmul(h, rho, t1, n)
    _matmul(rho, h, t2, n)
    for i in range(n * n):
        out[i] = -1j * (t1[i] - t2[i])
    if gamma == 0.0:
        return
    _matmul(ldl, rho, t1, n)
    _matmul(rho, ldl, t2, n)
    for i in range(n * n):
        out[i] = out[i] - 0.5 * gamma * (t1[i] + t2[i])
    for l in range(nl):
        # L rho L^dagger
        _matmul(&ls[l * n * n], rho, t1, n)
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for k in range(n):
                    acc = acc + t1[i * n + k] * ls[l * n * n + j * n + k].conjugate()
                out[i * n + j] = out[i * n + j] + gamma * acc


def rk4_lindblad(hs, ls, double gamma, rho0, double dt, int stride):
    """Classic RK4 on the master equation for a batch of density matrices.

    ``hs`` holds the Hamiltonian on the half-step grid (2N + 1 samples for
    N steps). ``ls`` are the jump operators (rate ``gamma`` each). Every
    step is followed by Hermitization and, when the trace has drifted by
    more than 1e-9, renormalization.
    """
    cdef cplx[:, :, ::1] hv = np.ascontiguousarray(hs, dtype=np.complex128)
    cdef int n = hv.shape[1]
    ls_arr = np.ascontiguousarray(ls, dtype=np.complex128).reshape(-1, n, n)
    cdef cplx[:, :, ::1] lv = ls_arr
    cdef int nl = lv.shape[0]
    ldl_arr = np.ascontiguousarray(
        np.einsum("lki,lkj->ij", ls_arr.conj(), ls_arr) if nl else np.zeros((n, n)),
        dtype=np.complex128,
    )
    cdef cplx[:, ::1] ldlv = ldl_arr
    cdef cplx[:, :, ::1] r0 = np.ascontiguousarray(rho0, dtype=np.complex128).reshape(-1, n, n)
    cdef Py_ssize_t nb = r0.shape[0]
    cdef Py_ssize_t nsteps = (hv.shape[0] - 1) // 2
    if hv.shape[0] != 2 * nsteps + 1 or nsteps < 1:
        raise ValueError("need 2N + 1 Hamiltonian samples on the half-step grid")
    if n > MAXD:
        raise ValueError("matrix too large")
    if stride < 1 or nsteps % stride != 0:
        raise ValueError("stride must divide the number of steps")
    out = np.empty((nsteps // stride + 1, nb, n, n), dtype=np.complex128)
    cdef cplx[:, :, :, ::1] ov = out
    cdef cplx rho[MAXD2]
    cdef cplx tmp[MAXD2]
    cdef cplx k1[MAXD2]
    cdef cplx k2[MAXD2]
    cdef cplx k3[MAXD2]
    cdef cplx k4[MAXD2]
    cdef Py_ssize_t b, k, slot
    cdef int i, j
    cdef cplx tr
    cdef cplx* lptr = &lv[0, 0, 0] if nl else NULL
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0

    with nogil:
        for b in range(nb):
            for i in range(n):
                for j in range(n):
                    rho[i * n + j] = r0[b, i, j]
                    ov[0, b, i, j] = rho[i * n + j]
            for k in range(nsteps):
                _lindblad_rhs(&hv[2 * k, 0, 0], rho, lptr, &ldlv[0, 0], nl, gamma, k1, n)
                for i in range(n * n):
                    tmp[i] = rho[i] + h2 * k1[i]
                _lindblad_rhs(&hv[2 * k + 1, 0, 0], tmp, lptr, &ldlv[0, 0], nl, gamma, k2, n)
                for i in range(n * n):
                    tmp[i] = rho[i] + h2 * k2[i]
                _lindblad_rhs(&hv[2 * k + 1, 0, 0], tmp, lptr, &ldlv[0, 0], nl, gamma, k3, n)
                for i in range(n * n):
                    tmp[i] = rho[i] + dt * k3[i]
                _lindblad_rhs(&hv[2 * k + 2, 0, 0], tmp, lptr, &ldlv[0, 0], nl, gamma, k4, n)
                for i in range(n * n):
                    rho[i] = rho[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                for i in range(n):
                    for j in range(i, n):
                        tr = 0.5 * (rho[i * n + j] + rho[j * n + i].conjugate())
                        rho[i * n + j] = tr
                        rho[j * n + i] = tr.conjugate()
                tr = 0.0
                for i in range(n):
                    tr = tr + rho[i * n + i]
                if fabs(tr.real - 1.0) > 1e-9:
                    for i in range(n * n):
                        rho[i] = rho[i] / tr.real
                if (k + 1) % stride == 0:
                    slot = (k + 1) // stride
                    for i in range(n):
                        for j in range(n):
                            ov[slot, b, i, j] = rho[i * n + j]
    return out
