"""Dense operators on 1-3 qubits.

Operators are plain ``complex128`` numpy arrays of shape ``(d, d)`` with
``d`` in {2, 4, 8}. Most helpers also accept a leading batch axis.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from ._backend import kernels

ALLOWED_DIMS = (2, 4, 8)
HERMITIAN_TOL = 1e-12

I2 = np.eye(2, dtype=np.complex128)
SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (SX, SY, SZ)
KET0 = np.array([1, 0], dtype=np.complex128)
KET1 = np.array([0, 1], dtype=np.complex128)
PROJ0 = np.outer(KET0, KET0.conj())
PROJ1 = np.outer(KET1, KET1.conj())


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def _check_square(a: np.ndarray, allowed=ALLOWED_DIMS) -> int:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected a square operator, got shape {a.shape}")
    d = a.shape[-1]
    if d not in allowed:
        raise ValueError(f"operator dimension {d} not in {allowed}")
    return d


def hermitian_residue(h) -> float:
    h = np.asarray(h)
    return float(np.max(np.abs(h - np.swapaxes(h.conj(), -1, -2)), initial=0.0))


def check_hermitian(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``h`` as complex128, raising if it is not Hermitian.

    The tolerance is absolute for entries of order one and relative for
    larger operators.
    """
    h = np.asarray(h, dtype=np.complex128)
    _check_square(h)
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    res = hermitian_residue(h)
    if res > tol * scale:
        raise ValueError(f"operator is not Hermitian (max |H - H^dag| = {res:.3e})")
    return h


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.conj(a), -1, -2)


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two operators (or kets), capped at dimension 8."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim == 1 and b.ndim == 1:
        if len(a) * len(b) > 8:
            raise ValueError("tensor product exceeds dimension 8")
        return np.kron(a, b)
    da, db = _check_square(a, (2, 4)), _check_square(b, (2, 4))
    if da * db > 8:
        raise ValueError(f"tensor product dimension {da * db} exceeds 8")
    return np.kron(a, b)


def embed(op, site: int, n_qubits: int) -> np.ndarray:
    """Single-qubit ``op`` acting on ``site`` of an ``n_qubits`` register."""
    out = np.ones((1, 1), dtype=np.complex128)
    for k in range(n_qubits):
        out = np.kron(out, op if k == site else I2)
    return out


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("commutator of operators with different dimensions")
    return a @ b - b @ a


def partial_trace(rho, keep: int | Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Reduced state on the factors listed in ``keep``.

    ``dims`` gives the factor dimensions, ordered as in the tensor product.
    A leading batch axis on ``rho`` is carried through.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if rho.shape[-1] != total or rho.shape[-2] != total:
        raise ValueError(f"factor dimensions {dims} inconsistent with operator of size {rho.shape[-1]}")
    keep = [keep] if np.isscalar(keep) else list(keep)
    if not keep or any(k < 0 or k >= len(dims) for k in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid subsystem selection {keep} for {len(dims)} factors")
    keep = sorted(keep)
    nf = len(dims)
    batch = rho.shape[:-2]
    t = rho.reshape(batch + tuple(dims) + tuple(dims))
    nb = len(batch)
    letters = "abcdefghijklmnop"
    row = [letters[i] for i in range(nf)]
    col = [letters[nf + i] if i in keep else letters[i] for i in range(nf)]
    out_idx = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    spec = "..." + "".join(row) + "".join(col) + "->..." + out_idx
    red = np.einsum(spec, t)
    dk = int(np.prod([dims[i] for i in keep]))
    return red.reshape(batch + (dk, dk)) if nb else red.reshape(dk, dk)


def eigh(h) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition through the active kernel backend."""
    return kernels.eigh(check_hermitian(h))


def herm_exp(h, s: float) -> np.ndarray:
    """Unitary ``exp(-i s h)`` via eigendecomposition of Hermitian ``h``."""
    return kernels.expm_herm(check_hermitian(h), float(s))


def trace_norm(h) -> float:
    h = check_hermitian(h)
    return float(np.sum(np.abs(np.linalg.eigvalsh(h))))


def operator_norm(h) -> float:
    h = check_hermitian(h)
    return float(np.max(np.abs(np.linalg.eigvalsh(h))))


def frobenius_norm(h) -> float:
    return float(np.linalg.norm(np.asarray(h)))


def batched_norm(hs: np.ndarray, kind: str = "trace") -> np.ndarray:
    """Norm of each operator in a stack ``(N, d, d)`` of Hermitian matrices."""
    hs = np.asarray(hs)
    if kind == "frobenius":
        return np.sqrt(np.sum(np.abs(hs) ** 2, axis=(-2, -1)))
    w = np.abs(np.linalg.eigvalsh(hs))
    if kind == "trace":
        return w.sum(axis=-1)
    if kind == "operator":
        return w.max(axis=-1)
    raise ValueError(f"unknown norm {kind!r}; choose trace, operator or frobenius")


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho, axis1=-2, axis2=-1)))


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    return np.outer(psi, psi.conj())


def validate_density_matrix(rho, tol: float = 1e-9, pos_tol: float = 1e-8) -> np.ndarray:
    """Check unit trace, Hermiticity and positivity; return ``rho``."""
    rho = np.asarray(rho, dtype=np.complex128)
    _check_square(rho)
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValueError(f"density matrix trace {tr.real:.12g} differs from 1")
    if hermitian_residue(rho) > tol:
        raise ValueError("density matrix is not Hermitian")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lo < -pos_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def bloch_vector(rho) -> BlochVector:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (2, 2):
        raise ValueError(f"Bloch vector needs a single-qubit state, got shape {rho.shape}")
    comps = [np.trace(rho @ p) for p in PAULIS]
    if max(abs(c.imag) for c in comps) > 1e-10:
        raise ValueError("state is not Hermitian: Bloch components have imaginary parts")
    return BlochVector(*(float(c.real) for c in comps))


def bloch_series(rhos) -> np.ndarray:
    """Bloch components for a stack of single-qubit states, shape ``(N, 3)``."""
    rhos = np.asarray(rhos)
    return np.real(np.stack([np.einsum("...ij,ji->...", rhos, p) for p in PAULIS], axis=-1))


def from_bloch(v) -> np.ndarray:
    x, y, z = v
    return 0.5 * (I2 + x * SX + y * SY + z * SZ)
