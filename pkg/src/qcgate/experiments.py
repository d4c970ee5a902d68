"""Scenario runners producing flat sweep records.

Every grid point is an independent job. Jobs run on a thread pool whose
size comes from ``threads`` in the config or the ``QCG_THREADS``
environment variable, and results are merged back in grid order, so the
output does not depend on scheduling.
"""
from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg
from .config import ExperimentConfig
from .dynamics import EvolutionSpec, NoiseSpec, propagate
from .hamiltonians import FloquetParams, GateSpec, build_protocol, excited_state_variant
from .metrics import ProbeSet, cost, dynamical_infidelity
from .ramps import RampProfile

log = logging.getLogger(__name__)

CSV_HEADER = "scenario,protocol,ramp,param,value,infidelity,cost,runtime_seconds"
BLOCH_HEADER = "scenario,protocol,qubit,t,x,y,z"


@dataclass(frozen=True)
class SweepRecord:
    scenario: str
    protocol: str
    ramp: str
    param: str
    value: float
    infidelity: float | None = None
    cost: float | None = None
    runtime_seconds: float = 0.0
    error: str | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"parameter value must be finite, got {self.value}")
        if (self.infidelity is None) == (self.cost is None) and self.error is None:
            raise ValueError("a record carries exactly one of infidelity or cost")


@dataclass(frozen=True)
class BlochRecord:
    scenario: str
    protocol: str
    qubit: str
    t: float
    x: float
    y: float
    z: float


# ---------------------------------------------------------------------------
# helpers

def worker_count(cfg: ExperimentConfig) -> int:
    if cfg.threads > 0:
        return cfg.threads
    env = os.environ.get("QCG_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"QCG_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("QCG_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _map(fn, jobs, cfg: ExperimentConfig):
    jobs = list(jobs)
    n = min(worker_count(cfg), max(1, len(jobs)))
    if n == 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, jobs))


def _gate(cfg: ExperimentConfig) -> GateSpec:
    return GateSpec.controlled_z() if cfg.gate == "cz" else GateSpec.hadamard()


def _floquet(cfg: ExperimentConfig) -> FloquetParams:
    return FloquetParams(ratio=cfg.ratio, convention=cfg.floquet_convention)


def make_protocol(cfg: ExperimentConfig, kind: str, profile: RampProfile, gate: GateSpec | None = None):
    return build_protocol(
        kind,
        gate or _gate(cfg),
        profile,
        fp=_floquet(cfg) if kind == "fe" else None,
        agp_order=cfg.agp_order,
        cd_method=cfg.cd_method,
    )


def _spec(cfg: ExperimentConfig, protocol, t_end=None, noise=None) -> EvolutionSpec:
    return EvolutionSpec(
        protocol, t_end=t_end, steps_per_unit=cfg.steps_per_unit, noise=noise, integrator=cfg.integrator
    )


def _timed(cfg: ExperimentConfig, fn):
    start = time.perf_counter()
    out = fn()
    elapsed = time.perf_counter() - start
    return out, (elapsed if cfg.record_runtime else 0.0)


def _row(cfg, protocol, ramp, param, value, measure, what="infidelity"):
    """Run ``measure`` and wrap the outcome, recording failures instead of raising."""
    start = time.perf_counter()
    try:
        result = float(measure())
        err = None
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        result, err = float("nan"), f"{type(exc).__name__}: {exc}"
        log.warning("row failed: %s %s %s=%g: %s", protocol, ramp, param, value, err)
    elapsed = time.perf_counter() - start if cfg.record_runtime else 0.0
    kw = {what: result}
    return SweepRecord(cfg.scenario, protocol, ramp, param, float(value), runtime_seconds=elapsed, error=err, **kw)


def tau_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.logspace(np.log10(cfg.tau_min), np.log10(cfg.tau_max), cfg.tau_points)


def eps_grid(cfg: ExperimentConfig) -> np.ndarray:
    n = int(round(cfg.eps_max / cfg.eps_step))
    return np.round(np.arange(n + 1) * cfg.eps_step, 12)


def gamma_tau_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.gamma_tau_max, cfg.gamma_points)


def _input_state(name: str) -> np.ndarray:
    kets = {
        "zero": linalg.KET0,
        "one": linalg.KET1,
        "plus": (linalg.KET0 + linalg.KET1) / np.sqrt(2),
        "minus": (linalg.KET0 - linalg.KET1) / np.sqrt(2),
    }
    return linalg.ket_to_dm(kets[name])


# ---------------------------------------------------------------------------
# scenarios

def run_duration_sweep(cfg: ExperimentConfig) -> list[SweepRecord]:
    """Final infidelity for each (protocol, tau) on a log grid."""
    jobs = [(p, tau) for p in cfg.protocols for tau in tau_grid(cfg)]

    def job(item):
        kind, tau = item

        def measure():
            proto = make_protocol(cfg, kind, RampProfile(cfg.ramp, float(tau)))
            return dynamical_infidelity(proto, _spec(cfg, proto))[1][-1]

        return _row(cfg, kind, cfg.ramp, "tau", tau, measure)

    return _map(job, jobs, cfg)


def run_dynamical(cfg: ExperimentConfig) -> list[SweepRecord]:
    """J_T(t) on the sample grid for each protocol at fixed tau."""

    def job(kind):
        proto = make_protocol(cfg, kind, RampProfile(cfg.ramp, cfg.tau))
        try:
            (times, series), elapsed = _timed(cfg, lambda: dynamical_infidelity(proto, _spec(cfg, proto)))
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            return [SweepRecord(cfg.scenario, kind, cfg.ramp, "t", 0.0, float("nan"),
                                error=f"{type(exc).__name__}: {exc}")]
        per_row = elapsed / len(times)
        return [SweepRecord(cfg.scenario, kind, cfg.ramp, "t", float(t), float(j), runtime_seconds=per_row)
                for t, j in zip(times, series)]

    return [r for rows in _map(job, cfg.protocols, cfg) for r in rows]


def run_cost_sweep(cfg: ExperimentConfig) -> list[SweepRecord]:
    """Time-averaged Hamiltonian norm for each (protocol, tau)."""
    jobs = [(p, tau) for p in cfg.protocols for tau in tau_grid(cfg)]

    def job(item):
        kind, tau = item

        def measure():
            proto = make_protocol(cfg, kind, RampProfile(cfg.ramp, float(tau)))
            return cost(proto, norm=cfg.norm).cost

        return _row(cfg, kind, cfg.ramp, "tau", tau, measure, what="cost")

    return _map(job, jobs, cfg)


def timing_setup(kind: str, tau: float, signed_eps: float, semantics: str):
    """(profile, t_end) realising a fractional timekeeping error.

    ``extend`` keeps evaluating the schedule past tau, ``clamp`` freezes it at
    lambda = 1, and ``stretch`` runs the whole schedule over tau (1 + eps)
    while the gate is read out at tau.
    """
    factor = 1.0 + signed_eps
    if semantics == "extend":
        return RampProfile(kind, tau), tau * factor
    if semantics == "clamp":
        return RampProfile(kind, tau, clamp=True), tau * factor
    if semantics == "stretch":
        return RampProfile(kind, tau * factor), tau
    raise ValueError(f"unknown timing semantics {semantics!r}")


def run_timing_sweep(cfg: ExperimentConfig) -> list[SweepRecord]:
    """Final infidelity against a signed timing error, per ramp and protocol.

    ``value`` is the signed error; eps = 0 appears once per (protocol, ramp).
    """
    grid = eps_grid(cfg)
    signed = [-e for e in grid[::-1] if e > 0] + list(grid)
    jobs = [(p, r, e) for p in cfg.protocols for r in cfg.ramps for e in signed]

    def job(item):
        kind, ramp, e = item

        def measure():
            profile, t_end = timing_setup(ramp, cfg.tau, e, cfg.timing_semantics)
            proto = make_protocol(cfg, kind, profile)
            return dynamical_infidelity(proto, _spec(cfg, proto, t_end=t_end))[1][-1]

        return _row(cfg, kind, ramp, "epsilon", e, measure)

    return _map(job, jobs, cfg)


def dephasing_point(cfg: ExperimentConfig, gamma_tau: float):
    """(tau, gamma) for one grid point of the dephasing sweep."""
    if cfg.dephasing_mode == "fixed_tau" or gamma_tau == 0:
        return cfg.tau, gamma_tau / cfg.tau
    return gamma_tau / cfg.gamma, cfg.gamma


def run_dephasing_sweep(cfg: ExperimentConfig) -> list[SweepRecord]:
    """Final infidelity against gamma * tau with dephasing on the driven qubit(s)."""
    jobs = [(p, g) for p in cfg.protocols for g in gamma_tau_grid(cfg)]

    def job(item):
        kind, g = item

        def measure():
            tau, gamma = dephasing_point(cfg, float(g))
            proto = make_protocol(cfg, kind, RampProfile(cfg.ramp, tau))
            noise = NoiseSpec.on_driven(proto, gamma, cfg.ie_dephasing)
            return dynamical_infidelity(proto, _spec(cfg, proto, noise=noise))[1][-1]

        return _row(cfg, kind, cfg.ramp, "gamma_tau", g, measure)

    return _map(job, jobs, cfg)


def run_bloch(cfg: ExperimentConfig) -> list[BlochRecord]:
    """Bloch series of every tracked qubit, starting from the configured register state.

    Qubits are labelled ``register`` (IE), ``computational`` and
    ``auxiliary`` (auxiliary protocols). ``gamma_tau`` switches on dephasing.
    """
    rho_in = _input_state(cfg.input_state)
    gamma = cfg.gamma_tau / cfg.tau

    def job(kind):
        proto = make_protocol(cfg, kind, RampProfile(cfg.ramp, cfg.tau))
        noise = NoiseSpec.on_driven(proto, gamma, cfg.ie_dephasing) if gamma > 0 else None
        return propagate(_spec(cfg, proto, noise=noise), proto.embed(rho_in))

    rows = []
    for kind, traj in zip(cfg.protocols, _map(job, cfg.protocols, cfg)):
        if kind == "ie":
            labels = {0: "register"}
        else:
            labels = {0: "computational", len(traj.dims) - 1: "auxiliary"}
        for site, label in labels.items():
            reduced = traj.states if len(traj.dims) == 1 else linalg.partial_trace(traj.states, site, traj.dims)
            vecs = linalg.bloch_series(reduced)
            rows.extend(
                BlochRecord(cfg.scenario, kind, label, float(t), float(v[0]), float(v[1]), float(v[2]))
                for t, v in zip(traj.times, vecs)
            )
    return rows


@dataclass(frozen=True)
class SequenceResult:
    final_state: np.ndarray
    register_overlap: float
    aux_ground_overlap: float
    records: list


def run_sequence(cfg: ExperimentConfig) -> SequenceResult:
    """Ground-start Hadamard followed by the excited-start variant on the same auxiliary.

    Records: per-leg gate infidelity (``leg`` = 1, 2), the return deficit of
    the register (``register_return``) and of the auxiliary
    (``aux_return``).
    """
    kind = cfg.protocols[0]
    if kind in ("ie", "uncontrolled"):
        raise ValueError("the two-leg sequence needs an auxiliary control protocol (cd or fe)")
    gate = GateSpec.hadamard()
    profile = RampProfile(cfg.ramp, cfg.tau)
    leg1 = make_protocol(cfg, kind, profile, gate)
    leg2 = make_protocol(cfg, kind, profile, excited_state_variant(gate))
    rho_in = _input_state(cfg.input_state)

    def evolve():
        mid = propagate(_spec(cfg, leg1), leg1.embed(rho_in)).final
        mid = 0.5 * (mid + mid.conj().T)
        return propagate(_spec(cfg, leg2), mid).final

    final, elapsed = _timed(cfg, evolve)
    reg = linalg.partial_trace(final, 0, leg1.dims)
    aux = linalg.partial_trace(final, 1, leg1.dims)
    reg_overlap = float(np.real(np.trace(rho_in @ reg)))
    aux_overlap = float(np.real(aux[0, 0]))

    records = []
    for i, proto in enumerate((leg1, leg2), 1):
        records.append(_row(cfg, kind, cfg.ramp, "leg", i,
                            lambda p=proto: dynamical_infidelity(p, _spec(cfg, p))[1][-1]))
    records.append(SweepRecord(cfg.scenario, kind, cfg.ramp, "register_return", 2.0,
                               1.0 - reg_overlap, runtime_seconds=elapsed))
    records.append(SweepRecord(cfg.scenario, kind, cfg.ramp, "aux_return", 2.0,
                               1.0 - aux_overlap, runtime_seconds=0.0))
    return SequenceResult(final, reg_overlap, aux_overlap, records)


def run_cz(cfg: ExperimentConfig) -> list[SweepRecord]:
    """Controlled-Z: infidelity and cost per protocol at the configured tau."""
    gate = GateSpec.controlled_z()
    probes = ProbeSet.for_qubits(2)
    profile = RampProfile(cfg.ramp, cfg.tau)

    def job(kind):
        proto = make_protocol(cfg, kind, profile, gate)
        inf = _row(cfg, kind, cfg.ramp, "tau", cfg.tau,
                   lambda: dynamical_infidelity(proto, _spec(cfg, proto), probes)[1][-1])
        cst = _row(cfg, kind, cfg.ramp, "tau", cfg.tau, lambda: cost(proto, norm=cfg.norm).cost, what="cost")
        return [inf, cst]

    return [r for rows in _map(job, cfg.protocols, cfg) for r in rows]


RUNNERS = {
    "duration_sweep": run_duration_sweep,
    "dynamical": run_dynamical,
    "cost_sweep": run_cost_sweep,
    "timing_sweep": run_timing_sweep,
    "dephasing_sweep": run_dephasing_sweep,
    "bloch": run_bloch,
    "sequence": lambda cfg: run_sequence(cfg).records,
    "cz": run_cz,
}


def run(cfg: ExperimentConfig) -> list:
    log.info("running %s with protocols %s", cfg.scenario, ",".join(cfg.protocols))
    return RUNNERS[cfg.scenario](cfg)
