"""Closed and open time evolution of the protocol Hamiltonians.

Unitary evolution chains one exponential per step (fourth-order Magnus by
default, midpoint on request). With dephasing the master equation

    d rho / dt = -i[H, rho] + gamma sum_s (Z_s rho Z_s - rho)

is integrated with classic RK4, Z_s being sigma_z on each noisy site.
All Hamiltonian samples are computed up front and handed to the kernels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from ._backend import kernels as _default_kernels
from ._backend import get_kernels
from .hamiltonians import GateProtocol

N_SAMPLES = 201
MIN_STEPS_PER_TAU = 1000
MIN_STEPS_PER_FLOQUET_CYCLE = 20
INTEGRATORS = ("magnus4", "midpoint", "rk4")


class IntegrationError(RuntimeError):
    """Raised when an evolution leaves the set of density matrices."""


@dataclass(frozen=True)
class NoiseSpec:
    gamma: float
    sites: tuple = ()

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"dephasing rate must be >= 0, got {self.gamma}")

    @classmethod
    def on_driven(cls, protocol: GateProtocol, gamma: float, ie_sites: str = "all") -> "NoiseSpec":
        """Dephasing on the driven part of ``protocol``.

        ``ie_sites`` chooses, for directly driven multi-qubit registers,
        whether every qubit dephases (``all``) or only the first (``first``).
        """
        sites = protocol.driven_sites
        if ie_sites == "first":
            sites = sites[:1]
        elif ie_sites != "all":
            raise ValueError(f"unknown dephasing site selection {ie_sites!r}")
        return cls(gamma, tuple(sites))


@dataclass(frozen=True)
class EvolutionSpec:
    protocol: GateProtocol
    t_end: float | None = None
    steps_per_unit: int = MIN_STEPS_PER_TAU
    noise: NoiseSpec | None = None
    integrator: str = "magnus4"
    samples: int = N_SAMPLES
    backend: str | None = None

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}; choose from {INTEGRATORS}")
        if self.samples < 2:
            raise ValueError("need at least two output samples")

    @property
    def end(self) -> float:
        return self.protocol.tau if self.t_end is None else float(self.t_end)

    @property
    def noisy(self) -> bool:
        return self.noise is not None and self.noise.gamma > 0

    def min_steps(self) -> int:
        tau = self.protocol.tau
        span = self.end / tau
        need = MIN_STEPS_PER_TAU * span
        if self.protocol.kind == "fe":
            need = max(need, MIN_STEPS_PER_FLOQUET_CYCLE * self.protocol.floquet.ratio * span)
        return max(1, math.ceil(need - 1e-9))

    def n_steps(self) -> int:
        """Step count honouring the density floor, a multiple of ``samples - 1``."""
        if self.steps_per_unit < MIN_STEPS_PER_TAU:
            raise ValueError(
                f"step density {self.steps_per_unit} per protocol duration is below the floor "
                f"of {MIN_STEPS_PER_TAU}"
            )
        span = self.end / self.protocol.tau
        n = max(self.min_steps(), math.ceil(self.steps_per_unit * span - 1e-9))
        if self.noisy:
            # keep gamma * dt small for the explicit integrator
            n = max(n, math.ceil(20 * self.noise.gamma * self.end))
        m = self.samples - 1
        return m * math.ceil(n / m)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.end, self.samples)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (samples, d, d) or (samples, batch, d, d)
    dims: tuple
    reduced: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def reduce(self) -> dict:
        """Per-qubit reduced states, cached in ``reduced``."""
        if not self.reduced:
            for site in range(len(self.dims)):
                self.reduced[site] = linalg.partial_trace(self.states, site, self.dims)
        return self.reduced


def _kernels(spec: EvolutionSpec):
    return _default_kernels if spec.backend is None else get_kernels(spec.backend)


def _unitary_samples(spec: EvolutionSpec) -> np.ndarray:
    n = spec.n_steps()
    dt = spec.end / n
    stride = n // (spec.samples - 1)
    k = _kernels(spec)
    starts = np.arange(n) * dt
    h_of = spec.protocol.hamiltonian
    if spec.integrator == "midpoint":
        return k.chain_midpoint(h_of(starts + 0.5 * dt), dt, stride)
    c = math.sqrt(3.0) / 6.0
    return k.chain_magnus4(h_of(starts + (0.5 - c) * dt), h_of(starts + (0.5 + c) * dt), dt, stride)


def _dephasing_ops(spec: EvolutionSpec) -> np.ndarray:
    n_sites = len(spec.protocol.dims)
    if spec.noise is None or not spec.noise.sites:
        return np.zeros((0, spec.protocol.dim, spec.protocol.dim), dtype=np.complex128)
    return np.stack([linalg.embed(linalg.SZ, s, n_sites) for s in spec.noise.sites])


def _check_states(states: np.ndarray) -> None:
    tr = np.trace(states, axis1=-2, axis2=-1)
    drift = float(np.max(np.abs(tr - 1)))
    if drift > 1e-9:
        raise IntegrationError(f"trace drifted by {drift:.3e}")
    lo = float(np.min(np.linalg.eigvalsh(0.5 * (states + linalg.dagger(states)))))
    if lo < -1e-6:
        raise IntegrationError(f"positivity lost: minimum eigenvalue {lo:.3e}")


def _propagate_batch(spec: EvolutionSpec, rho0: np.ndarray) -> np.ndarray:
    """States at the sample times for a batch ``(B, d, d)`` of initial states."""
    d = spec.protocol.dim
    rho0 = np.asarray(rho0, dtype=np.complex128).reshape(-1, d, d)
    if spec.noisy or spec.integrator == "rk4":
        n = spec.n_steps()
        dt = spec.end / n
        stride = n // (spec.samples - 1)
        hs = spec.protocol.hamiltonian(np.arange(2 * n + 1) * (0.5 * dt))
        gamma = spec.noise.gamma if spec.noise is not None else 0.0
        states = _kernels(spec).rk4_lindblad(hs, _dephasing_ops(spec), gamma, rho0, dt, stride)
    else:
        us = _unitary_samples(spec)
        states = np.einsum("sij,bjk,slk->sbil", us, rho0, us.conj())
    _check_states(states)
    return states


def propagate(spec: EvolutionSpec, rho0) -> Trajectory:
    """Evolve one density matrix; the trajectory holds ``spec.samples`` states."""
    rho0 = np.asarray(rho0, dtype=np.complex128)
    if rho0.shape != (spec.protocol.dim, spec.protocol.dim):
        raise ValueError(f"initial state shape {rho0.shape} does not match protocol dimension {spec.protocol.dim}")
    linalg.validate_density_matrix(rho0)
    states = _propagate_batch(spec, rho0)[:, 0]
    return Trajectory(spec.times(), states, spec.protocol.dims)


def propagate_many(spec: EvolutionSpec, rho0s) -> Trajectory:
    """Evolve a batch of initial states; ``states`` has shape (samples, B, d, d)."""
    return Trajectory(spec.times(), _propagate_batch(spec, rho0s), spec.protocol.dims)


def propagate_unitary_operator(spec: EvolutionSpec) -> np.ndarray:
    """Full propagator U(t_end, 0)."""
    if spec.noisy:
        raise ValueError("a propagator only exists for noiseless evolution")
    if spec.integrator == "rk4":
        raise ValueError("the propagator is accumulated by the exponential integrators only")
    return _unitary_samples(spec)[-1]


def reduce_trajectory(traj: Trajectory, layout=None) -> dict:
    """Bloch vector series ``(samples, 3)`` for every qubit of ``layout``."""
    dims = tuple(traj.dims if layout is None else layout)
    if int(np.prod(dims)) != traj.states.shape[-1] or any(d != 2 for d in dims):
        raise ValueError(f"layout {dims} inconsistent with states of size {traj.states.shape[-1]}")
    if len(dims) == 1:
        return {0: linalg.bloch_series(traj.states)}
    return {s: linalg.bloch_series(linalg.partial_trace(traj.states, s, dims)) for s in range(len(dims))}
