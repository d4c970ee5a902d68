"""Time-dependent Hamiltonians for the gate protocols.

Layout convention: the computational register comes first in every tensor
product and the auxiliary qubit (when present) is the last factor.

Protocols
---------
``uncontrolled``  bare auxiliary drive, sum_k P_k (x) H_phi_k(lambda)
``cd``            bare drive plus lambda_dot times the adiabatic gauge potential
``fe``            Floquet-modulated bare drive and lambda-derivative
``ie``            register driven directly by an inverse-engineered field
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .linalg import I2, PROJ0, PROJ1, SX, SY, SZ, check_hermitian, commutator, dagger, eigh, partial_trace
from .ramps import RampProfile

THETA_F = np.pi
PROTOCOL_KINDS = ("uncontrolled", "cd", "fe", "ie")
FLOQUET_CONVENTIONS = ("first_harmonic", "literal")
GAP_TOL = 1e-10


# ---------------------------------------------------------------------------
# single auxiliary drive

def aux_drive_h(phi: float, lam, theta_f: float = THETA_F) -> np.ndarray:
    """Auxiliary drive -[cos(theta_f lam) sz + sin(theta_f lam)(cos phi sx + sin phi sy)].

    ``lam`` may be an array; the result then has shape ``lam.shape + (2, 2)``.
    """
    lam = np.asarray(lam, dtype=float)[..., None, None]
    transverse = np.cos(phi) * SX + np.sin(phi) * SY
    return -(np.cos(theta_f * lam) * SZ + np.sin(theta_f * lam) * transverse)


def aux_drive_dh(phi: float, lam, theta_f: float = THETA_F) -> np.ndarray:
    """Derivative of :func:`aux_drive_h` with respect to lambda."""
    lam = np.asarray(lam, dtype=float)[..., None, None]
    transverse = np.cos(phi) * SX + np.sin(phi) * SY
    return -theta_f * (-np.sin(theta_f * lam) * SZ + np.cos(theta_f * lam) * transverse)


# ---------------------------------------------------------------------------
# gauge potentials

@dataclass(frozen=True)
class AGPCoefficients:
    order: int
    alphas: tuple[float, ...]

    def __post_init__(self):
        if self.order < 1 or len(self.alphas) != self.order:
            raise ValueError("AGP order must be >= 1 and match the number of coefficients")


def _nested(h, dh, depth):
    # [h, [h, ... [h, dh]]] with depth commutators, depth = 1..; returns list
    out = []
    c = dh
    for _ in range(depth):
        c = commutator(h, c)
        out.append(c)
    return out


def exact_gauge_potential(h, dh) -> np.ndarray:
    """Spectral gauge potential i sum_{m != n} |m><m|dh|n><n| / (E_n - E_m).

    Accepts a leading batch axis. Raises if two levels are closer than
    ``GAP_TOL``.
    """
    h = np.asarray(h, dtype=np.complex128)
    dh = np.asarray(dh, dtype=np.complex128)
    if h.ndim == 2:
        check_hermitian(h)
        check_hermitian(dh)
        w, v = eigh(h)
    else:
        w, v = np.linalg.eigh(h)
    gaps = w[..., None, :] - w[..., :, None]  # E_n - E_m at [m, n]
    d = h.shape[-1]
    off = ~np.eye(d, dtype=bool)
    min_gap = np.min(np.abs(gaps[..., off]))
    if min_gap < GAP_TOL:
        raise ValueError(f"degenerate spectrum: smallest gap {min_gap:.3e} below {GAP_TOL:g}")
    dh_eig = dagger(v) @ dh @ v
    safe = np.where(off, gaps, 1.0)
    a_eig = np.where(off, 1j * dh_eig / safe, 0.0)
    return v @ a_eig @ dagger(v)


def nested_commutator_agp(h, dh, coeffs: AGPCoefficients | Sequence[float] | np.ndarray) -> np.ndarray:
    """Truncated gauge potential i sum_k alpha_k [h,[h,...[h, dh]]] (2k - 1 commutators).

    ``coeffs`` may also be an array of per-point coefficients of shape
    ``batch + (order,)`` matching a batched ``h``.
    """
    if isinstance(coeffs, AGPCoefficients):
        alphas = np.asarray(coeffs.alphas, dtype=float)
    else:
        alphas = np.asarray(coeffs, dtype=float)
    order = alphas.shape[-1]
    comms = _nested(np.asarray(h), np.asarray(dh), 2 * order - 1)
    out = np.zeros(np.broadcast_shapes(np.shape(h), np.shape(dh)), dtype=np.complex128)
    for k in range(order):
        out = out + alphas[..., k, None, None] * comms[2 * k]
    return 1j * out


def _variational_alphas(h, dh, order: int) -> np.ndarray:
    # S = Tr[(dh + sum_k alpha_k C_2k)^2] with C_j the j-fold nested commutator.
    # Stationarity: sum_j Tr(C_2k C_2j) alpha_j = -Tr(dh C_2k).
    if order < 1:
        raise ValueError("AGP order must be >= 1")
    h = np.asarray(h, dtype=np.complex128)
    dh = np.asarray(dh, dtype=np.complex128)
    batch = np.broadcast_shapes(h.shape, dh.shape)[:-2]
    comms = _nested(h, dh, 2 * order)
    even = np.stack([comms[2 * k + 1] for k in range(order)], axis=-3)
    m = np.real(np.einsum("...aij,...bji->...ab", even, even))
    b = np.real(np.einsum("...ij,...aji->...a", dh, even))
    alphas = np.zeros(batch + (order,))
    scale = np.real(np.einsum("...ij,...ji->...", dh, dh))
    live = scale > 0
    if not np.any(live):
        return alphas
    m_live, b_live = m[live], b[live]
    cond = np.linalg.cond(m_live)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e12):
        raise ValueError(
            f"action minimisation is singular at order {order} (condition number {np.max(cond):.3e}); "
            "the nested-commutator ansatz is degenerate for this Hamiltonian"
        )
    alphas[live] = np.linalg.solve(m_live, -b_live[..., None])[..., 0]
    return alphas


def minimize_action(h, dh, l: int = 1) -> AGPCoefficients:
    """Coefficients of the order-``l`` nested-commutator AGP minimising Tr[G^2]."""
    h = check_hermitian(h)
    dh = check_hermitian(dh)
    alphas = _variational_alphas(h, dh, l)
    return AGPCoefficients(order=l, alphas=tuple(float(a) for a in alphas))


def action(h, dh, coeffs: AGPCoefficients) -> float:
    """S = Tr[G^2] with G = dh - i[h, A]."""
    a = nested_commutator_agp(h, dh, coeffs)
    g = np.asarray(dh) - 1j * commutator(h, a)
    return float(np.real(np.trace(g @ g)))


# ---------------------------------------------------------------------------
# inverse engineering

@dataclass(frozen=True)
class IEParams:
    """Basis angles of the inverse-engineered path and their rates."""

    theta: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    theta_dot: Callable[[np.ndarray], np.ndarray]
    phi_dot: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def constant(cls, theta: float, phi: float) -> "IEParams":
        def const(v):
            return lambda t: np.full(np.shape(t), v, dtype=float)

        return cls(const(theta), const(phi), const(0.0), const(0.0))


def ie_vector(p: IEParams, t, profile: RampProfile):
    """Field components (w_x, w_y, w_z) with H = w . sigma / 2.

    Derived from H = i dU/dt U^dag for U = |m+><m+| + exp(i pi lam)|m-><m-|,
    dropping the identity part (a global phase).
    """
    t = np.asarray(t, dtype=float)
    th, ph = p.theta(t), p.phi(t)
    thd, phd = p.theta_dot(t), p.phi_dot(t)
    lam, lamd = profile.lam(t), profile.lam_dot(t)
    c = np.cos(np.pi * lam) - 1.0
    s = np.sin(np.pi * lam)
    wx = (
        c * phd * np.cos(ph) * np.cos(th) * np.sin(th)
        + (-phd * np.sin(th) * s + c * thd) * np.sin(ph)
        + (thd * np.cos(th) * s + np.pi * lamd * np.sin(th)) * np.cos(ph)
    )
    wy = (
        c * phd * np.sin(ph) * np.sin(th) * np.cos(th)
        + (phd * np.sin(th) * s - c * thd) * np.cos(ph)
        + (thd * np.cos(th) * s + np.pi * lamd * np.sin(th)) * np.sin(ph)
    )
    wz = -thd * np.sin(th) * s - c * phd * np.sin(th) ** 2 + np.pi * lamd * np.cos(th)
    return wx, wy, wz


def ie_h(p: IEParams, t, profile: RampProfile) -> np.ndarray:
    wx, wy, wz = ie_vector(p, t, profile)
    wx, wy, wz = (np.asarray(w)[..., None, None] for w in (wx, wy, wz))
    return 0.5 * (wx * SX + wy * SY + wz * SZ)


def cz_ie_h(profile: RampProfile, t) -> np.ndarray:
    """pi lam_dot / 4 (1 (x) sz + sz (x) 1 - sz (x) sz)."""
    lamd = np.asarray(profile.lam_dot(t), dtype=float)[..., None, None]
    gen = np.kron(I2, SZ) + np.kron(SZ, I2) - np.kron(SZ, SZ)
    return 0.25 * np.pi * lamd * gen


# ---------------------------------------------------------------------------
# gates

@dataclass(frozen=True, eq=False)
class GateSpec:
    """Target gate realised by auxiliary evolution (and optionally by IE).

    ``blocks`` pairs projectors on the register with the phase of the
    auxiliary drive attached to that subspace.
    """

    name: str
    blocks: tuple
    target_unitary: np.ndarray
    n_qubits: int = 1
    axis: np.ndarray | None = None
    phase_minus: float | None = None
    phase_plus: float = 0.0
    theta_f: float = THETA_F
    aux_start: int = 0
    ie_preset: IEParams | None = None

    @classmethod
    def single_qubit(cls, axis, phase_minus: float, name: str = "custom") -> "GateSpec":
        n = np.asarray(axis, dtype=float)
        if n.shape != (3,):
            raise ValueError("rotation axis must be a 3-vector")
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("rotation axis must be non-zero")
        n = n / norm
        nsig = n[0] * SX + n[1] * SY + n[2] * SZ
        p_plus, p_minus = 0.5 * (I2 + nsig), 0.5 * (I2 - nsig)
        target = p_plus + np.exp(1j * phase_minus) * p_minus
        ie = None
        if np.isclose(np.cos(phase_minus), -1.0):
            # pi rotations: U1 with fixed basis angles along n
            ie = IEParams.constant(float(np.arccos(np.clip(n[2], -1, 1))), float(np.arctan2(n[1], n[0])))
        return cls(
            name=name,
            blocks=((p_plus, 0.0), (p_minus, float(phase_minus))),
            target_unitary=target,
            axis=n,
            phase_minus=float(phase_minus),
            ie_preset=ie,
        )

    @classmethod
    def hadamard(cls) -> "GateSpec":
        return cls.single_qubit([1.0, 0.0, 1.0], np.pi, name="hadamard")

    @classmethod
    def controlled_z(cls) -> "GateSpec":
        p11 = np.kron(PROJ1, PROJ1)
        rest = np.kron(PROJ0, I2) + np.kron(PROJ1, PROJ0)
        return cls(
            name="cz",
            blocks=((rest, 0.0), (p11, np.pi)),
            target_unitary=np.diag([1, 1, 1, -1]).astype(np.complex128),
            n_qubits=2,
            axis=np.array([0.0, 0.0, 1.0]),
            phase_minus=np.pi,
        )

    @property
    def projectors(self):
        return [p for p, _ in self.blocks]


def excited_state_variant(gate: GateSpec) -> GateSpec:
    """Same gate driven from the auxiliary excited state: every block phase negated."""
    blocks = tuple((p, -phase) for p, phase in gate.blocks)
    return replace(
        gate,
        name=gate.name + "_excited",
        blocks=blocks,
        phase_minus=None if gate.phase_minus is None else -gate.phase_minus,
        phase_plus=-gate.phase_plus,
        aux_start=1 - gate.aux_start,
    )


def _block_sum(blocks, block_ops) -> np.ndarray:
    # sum_k P_k (x) h_k for batched h_k
    out = None
    for (proj, _), h in zip(blocks, block_ops):
        term = np.einsum("ij,...kl->...ikjl", proj, h)
        shape = term.shape[:-4] + (proj.shape[0] * 2, proj.shape[0] * 2)
        term = term.reshape(shape)
        out = term if out is None else out + term
    return out


def aux_total_h(gate: GateSpec, lam) -> np.ndarray:
    """sum_k P_k (x) H_phi_k(lam) on register (x) auxiliary."""
    return _block_sum(gate.blocks, [aux_drive_h(phase, lam, gate.theta_f) for _, phase in gate.blocks])


def cz_aux_h(lam) -> np.ndarray:
    return aux_total_h(GateSpec.controlled_z(), lam)


# ---------------------------------------------------------------------------
# Floquet engineering

@dataclass(frozen=True)
class FloquetParams:
    """Modulation ratio omega / omega_0 and the harmonic convention.

    ``first_harmonic`` drives the derivative term with
    sum_k beta_k sin((2k - 1) omega t); by default beta_1 = 2 omega_0 alpha_1,
    the value for which the one-period average of the rotating-frame
    Hamiltonian reproduces lambda_dot alpha_1 i[H, dH]. ``literal`` uses
    omega_0 alpha_1 sin(2 omega t).
    """

    ratio: float = 200.0
    convention: str = "first_harmonic"
    betas: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.ratio < 10:
            raise ValueError(f"Floquet ratio omega/omega_0 must be >= 10, got {self.ratio}")
        if self.convention not in FLOQUET_CONVENTIONS:
            raise ValueError(f"unknown Floquet convention {self.convention!r}")

    @staticmethod
    def omega0(tau: float) -> float:
        return 2 * np.pi / tau

    def omega(self, tau: float) -> float:
        return self.ratio * self.omega0(tau)


def floquet_h(
    phi: float,
    t,
    profile: RampProfile,
    fp: FloquetParams,
    coeffs: AGPCoefficients | np.ndarray | None = None,
    theta_f: float = THETA_F,
) -> np.ndarray:
    """Floquet-engineered drive for one block, vectorised over ``t``.

    ``coeffs`` defaults to the pointwise order-1 variational coefficients.
    """
    t = np.asarray(t, dtype=float)
    lam, lamd = profile.lam(t), profile.lam_dot(t)
    h0 = aux_drive_h(phi, lam, theta_f)
    dh = aux_drive_dh(phi, lam, theta_f)
    if coeffs is None:
        alphas = _variational_alphas(h0, dh, 1)
    elif isinstance(coeffs, AGPCoefficients):
        alphas = np.broadcast_to(np.asarray(coeffs.alphas), np.shape(t) + (coeffs.order,))
    else:
        alphas = np.asarray(coeffs)
    w0 = fp.omega0(profile.tau)
    w = fp.omega(profile.tau)
    if fp.convention == "literal":
        drive = w0 * alphas[..., 0] * np.sin(2 * w * t)
    else:
        if fp.betas is not None:
            betas = [np.full(np.shape(t), b) for b in fp.betas]
        else:
            if alphas.shape[-1] != 1:
                raise ValueError("default Fourier coefficients are only defined for order-1 AGP")
            betas = [2 * w0 * alphas[..., 0]]
        drive = sum(b * np.sin((2 * k + 1) * w * t) for k, b in enumerate(betas))
    envelope = (1 + fp.ratio * np.cos(w * t))[..., None, None]
    return envelope * h0 + (np.asarray(lamd) * drive)[..., None, None] * dh


# ---------------------------------------------------------------------------
# protocols

@dataclass(frozen=True, eq=False)
class GateProtocol:
    """A control scheme bound to a gate and a ramp, exposing H(t)."""

    kind: str
    gate: GateSpec
    profile: RampProfile
    floquet: FloquetParams | None = None
    agp_order: int = 1
    cd_method: str = "variational"
    _dims: tuple = field(init=False, repr=False)

    def __post_init__(self):
        n = self.gate.n_qubits
        dims = (2,) * n if self.kind == "ie" else (2,) * (n + 1)
        object.__setattr__(self, "_dims", dims)

    @property
    def dims(self) -> tuple:
        return self._dims

    @property
    def dim(self) -> int:
        return int(np.prod(self._dims))

    @property
    def n_sites(self) -> int:
        return len(self._dims)

    @property
    def computational_sites(self) -> tuple:
        return tuple(range(self.gate.n_qubits))

    @property
    def aux_site(self) -> int | None:
        return None if self.kind == "ie" else self.gate.n_qubits

    @property
    def driven_sites(self) -> tuple:
        return self.computational_sites if self.kind == "ie" else (self.aux_site,)

    @property
    def target(self) -> np.ndarray:
        return self.gate.target_unitary

    @property
    def tau(self) -> float:
        return self.profile.tau

    def hamiltonian(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "ie":
            if self.gate.name.startswith("cz"):
                return cz_ie_h(self.profile, t)
            return ie_h(self.gate.ie_preset, t, self.profile)
        theta_f = self.gate.theta_f
        lam = self.profile.lam(t)
        blocks = []
        for _, phase in self.gate.blocks:
            if self.kind == "fe":
                blocks.append(floquet_h(phase, t, self.profile, self.floquet, theta_f=theta_f))
                continue
            h0 = aux_drive_h(phase, lam, theta_f)
            if self.kind == "cd":
                dh = aux_drive_dh(phase, lam, theta_f)
                if self.cd_method == "exact":
                    agp = exact_gauge_potential(h0, dh)
                else:
                    alphas = _variational_alphas(h0, dh, self.agp_order)
                    agp = nested_commutator_agp(h0, dh, alphas)
                h0 = h0 + np.asarray(self.profile.lam_dot(t))[..., None, None] * agp
            blocks.append(h0)
        return _block_sum(self.gate.blocks, blocks)

    def embed(self, rho_comp) -> np.ndarray:
        """Full initial state: register state, tensored with the auxiliary start."""
        rho_comp = np.asarray(rho_comp, dtype=np.complex128)
        if self.kind == "ie":
            return rho_comp
        aux = PROJ1 if self.gate.aux_start else PROJ0
        return np.einsum("...ij,kl->...ikjl", rho_comp, aux).reshape(rho_comp.shape[:-2] + (self.dim, self.dim))

    def computational_state(self, rho) -> np.ndarray:
        if self.kind == "ie":
            return np.asarray(rho)
        return partial_trace(rho, self.computational_sites, self.dims)


def build_protocol(
    kind: str,
    gate: GateSpec,
    profile: RampProfile,
    fp: FloquetParams | None = None,
    agp_order: int = 1,
    cd_method: str = "variational",
) -> GateProtocol:
    if kind not in PROTOCOL_KINDS:
        raise ValueError(f"unknown protocol {kind!r}; choose from {'|'.join(PROTOCOL_KINDS)}")
    if kind == "fe" and fp is None:
        raise ValueError("Floquet protocol needs FloquetParams")
    if kind == "ie" and gate.ie_preset is None and not gate.name.startswith("cz"):
        raise ValueError(f"no inverse-engineering preset for gate {gate.name!r}")
    if kind == "ie" and gate.aux_start:
        raise ValueError("the excited-start variant only applies to auxiliary protocols")
    if cd_method not in ("variational", "exact"):
        raise ValueError(f"unknown CD method {cd_method!r}")
    return GateProtocol(kind, gate, profile, fp, agp_order, cd_method)
