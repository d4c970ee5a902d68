"""Numpy implementation of the time-stepping kernels.

Reference fallback for :mod:`qcgate._ckernels`; the two modules expose the
same functions with the same signatures. Per-step exponentials are batched
through LAPACK, only the ordered product runs as a Python loop.
"""
import numpy as np

MAGNUS_C = np.sqrt(3.0) / 6.0


def eigh(h):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix."""
    h = np.asarray(h, dtype=np.complex128)
    return np.linalg.eigh(h)


def _exp_batch(k):
    # exp(-i K) for a stack of Hermitian K
    w, v = np.linalg.eigh(k)
    return (v * np.exp(-1j * w)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def expm_herm(h, s):
    """exp(-i s h) for Hermitian h."""
    return _exp_batch(s * np.asarray(h, dtype=np.complex128))


def _chain(steps, stride):
    nsteps, n = steps.shape[0], steps.shape[1]
    if stride < 1 or nsteps % stride:
        raise ValueError("stride must divide the number of steps")
    out = np.empty((nsteps // stride + 1, n, n), dtype=np.complex128)
    u = np.eye(n, dtype=np.complex128)
    out[0] = u
    for k in range(nsteps):
        u = steps[k] @ u
        if (k + 1) % stride == 0:
            out[(k + 1) // stride] = u
    return out


def chain_magnus4(h1, h2, dt, stride):
    """Accumulate U over steps using the two-node fourth-order Magnus step."""
    h1 = np.asarray(h1, dtype=np.complex128)
    h2 = np.asarray(h2, dtype=np.complex128)
    if h1.shape != h2.shape:
        raise ValueError("inconsistent Hamiltonian samples")
    comm = h1 @ h2 - h2 @ h1
    k = 0.5 * dt * (h1 + h2) + 1j * (MAGNUS_C / 2) * dt * dt * comm
    return _chain(_exp_batch(k), stride)


def chain_midpoint(hm, dt, stride):
    """Accumulate U with one exponential of the midpoint Hamiltonian per step."""
    hm = np.asarray(hm, dtype=np.complex128)
    return _chain(_exp_batch(dt * hm), stride)


def rk4_lindblad(hs, ls, gamma, rho0, dt, stride):
    """Classic RK4 on the master equation for a batch of density matrices."""
    hs = np.asarray(hs, dtype=np.complex128)
    n = hs.shape[1]
    ls = np.asarray(ls, dtype=np.complex128).reshape(-1, n, n)
    ldl = np.einsum("lki,lkj->ij", ls.conj(), ls) if len(ls) else np.zeros((n, n))
    ls_dag = np.swapaxes(ls.conj(), -1, -2)
    rho = np.array(rho0, dtype=np.complex128).reshape(-1, n, n)
    nsteps = (hs.shape[0] - 1) // 2
    if hs.shape[0] != 2 * nsteps + 1 or nsteps < 1:
        raise ValueError("need 2N + 1 Hamiltonian samples on the half-step grid")
    if stride < 1 or nsteps % stride:
        raise ValueError("stride must divide the number of steps")

    def rhs(h, r):
        out = -1j * (h @ r - r @ h)
        if gamma:
            out -= 0.5 * gamma * (ldl @ r + r @ ldl)
            for lk, lk_dag in zip(ls, ls_dag):
                out += gamma * (lk @ r @ lk_dag)
        return out

    out = np.empty((nsteps // stride + 1,) + rho.shape, dtype=np.complex128)
    out[0] = rho
    for k in range(nsteps):
        ha, hb, hc = hs[2 * k], hs[2 * k + 1], hs[2 * k + 2]
        k1 = rhs(ha, rho)
        k2 = rhs(hb, rho + 0.5 * dt * k1)
        k3 = rhs(hb, rho + 0.5 * dt * k2)
        k4 = rhs(hc, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + np.swapaxes(rho.conj(), -1, -2))
        tr = np.trace(rho, axis1=-2, axis2=-1).real
        drift = np.abs(tr - 1.0) > 1e-9
        if drift.any():
            rho[drift] /= tr[drift][:, None, None]
        if (k + 1) % stride == 0:
            out[(k + 1) // stride] = rho
    return out
