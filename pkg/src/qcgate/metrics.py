"""Gate infidelity over probe states and the time-averaged Hamiltonian cost."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from . import linalg
from .dynamics import EvolutionSpec, propagate_many
from .hamiltonians import GateProtocol
from .ramps import RampProfile

NORMS = ("trace", "operator", "frobenius")
MIN_COST_POINTS = 2001
COST_POINTS_PER_FLOQUET_CYCLE = 100


def _single_probes():
    return (
        np.diag([2 / 3, 1 / 3]).astype(np.complex128),
        np.full((2, 2), 0.5, dtype=np.complex128),
        0.5 * linalg.I2,
    )


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Three probe states with weights summing to one."""

    states: tuple
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        if len(self.states) != len(self.weights):
            raise ValueError("one weight per probe state required")
        if abs(sum(self.weights) - 1) > 1e-12:
            raise ValueError(f"probe weights sum to {sum(self.weights)!r}, not 1")
        for rho in self.states:
            linalg.validate_density_matrix(rho)

    @classmethod
    def single_qubit(cls, weights=(1 / 3, 1 / 3, 1 / 3)) -> "ProbeSet":
        return cls(_single_probes(), tuple(weights))

    @classmethod
    def for_qubits(cls, n_qubits: int, weights=(1 / 3, 1 / 3, 1 / 3)) -> "ProbeSet":
        """Tensor powers of the single-qubit probes (rho_i (x) rho_i for two qubits)."""
        states = []
        for rho in _single_probes():
            out = rho
            for _ in range(n_qubits - 1):
                out = np.kron(out, rho)
            states.append(out)
        return cls(tuple(states), tuple(weights))

    @property
    def array(self) -> np.ndarray:
        return np.stack(self.states)


@dataclass(frozen=True)
class CostReport:
    cost: float
    tau: float
    quadrature_points: int
    norm: str = "trace"


def gate_infidelity(target, evolved, probes: ProbeSet) -> float:
    """1 - sum_i w_i Re tr[U rho_i U^dag rho_i(T)] / tr[rho_i^2].

    ``evolved[i]`` is the register state reached from probe ``i``.
    Extra leading axes on ``evolved`` (e.g. time) are broadcast, giving an
    array of infidelities.
    """
    if abs(sum(probes.weights) - 1) > 1e-12:
        raise ValueError("probe weights are not normalised")
    u = np.asarray(target, dtype=np.complex128)
    ideal = np.stack([u @ rho @ u.conj().T for rho in probes.states])
    purity0 = np.array([np.real(np.trace(rho @ rho)) for rho in probes.states])
    w = np.asarray(probes.weights)
    evolved = np.asarray(evolved)
    overlaps = np.real(np.einsum("pij,...pji->...p", ideal, evolved))
    out = 1.0 - np.sum(w * overlaps / purity0, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _probe_spec(protocol: GateProtocol, probes: ProbeSet | None) -> ProbeSet:
    return probes if probes is not None else ProbeSet.for_qubits(protocol.gate.n_qubits)


def evolve_probes(protocol: GateProtocol, spec: EvolutionSpec, probes: ProbeSet | None = None):
    """Register states from every probe at the sample times, shape (samples, 3, d, d)."""
    probes = _probe_spec(protocol, probes)
    full0 = protocol.embed(probes.array)
    traj = propagate_many(spec, full0)
    return traj, protocol.computational_state(traj.states)


def dynamical_infidelity(protocol: GateProtocol, spec: EvolutionSpec, probes: ProbeSet | None = None):
    """(times, J_T(t)) against the final target at every sample time."""
    probes = _probe_spec(protocol, probes)
    traj, register = evolve_probes(protocol, spec, probes)
    return traj.times, gate_infidelity(protocol.target, register, probes)


def final_infidelity(protocol: GateProtocol, spec: EvolutionSpec, probes: ProbeSet | None = None) -> float:
    return float(dynamical_infidelity(protocol, spec, probes)[1][-1])


def cost_points(protocol: GateProtocol, points: int | None = None) -> int:
    n = MIN_COST_POINTS if points is None else int(points)
    if protocol.kind == "fe":
        n = max(n, COST_POINTS_PER_FLOQUET_CYCLE * int(np.ceil(protocol.floquet.ratio)) + 1)
    if n < MIN_COST_POINTS:
        raise ValueError(f"cost quadrature needs at least {MIN_COST_POINTS} points")
    return n if n % 2 else n + 1


def cost(
    protocol: GateProtocol,
    profile: RampProfile | None = None,
    tau: float | None = None,
    norm: str = "trace",
    points: int | None = None,
) -> CostReport:
    """(1/tau) * integral over [0, tau] of ||H(t)||, composite Simpson rule.

    ``H`` is the full generating Hamiltonian of the protocol. ``profile``
    and ``tau`` default to the protocol's own.
    """
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}; choose from {'|'.join(NORMS)}")
    if profile is not None and profile != protocol.profile:
        raise ValueError("profile does not match the protocol's ramp")
    tau = protocol.tau if tau is None else float(tau)
    n = cost_points(protocol, points)
    t = np.linspace(0.0, tau, n)
    vals = linalg.batched_norm(protocol.hamiltonian(t), norm)
    return CostReport(float(simpson(vals, x=t) / tau), tau, n, norm)
