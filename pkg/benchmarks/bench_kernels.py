"""Compare the compiled and pure-Python kernels on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qcgate._backend import available_backends, get_kernels
from qcgate.dynamics import EvolutionSpec, NoiseSpec, propagate_many
from qcgate.hamiltonians import FloquetParams, GateSpec, build_protocol
from qcgate.metrics import ProbeSet
from qcgate.ramps import RampProfile


def workloads():
    gate = GateSpec.hadamard()
    ramp = RampProfile("linear", 1.0)
    cd = build_protocol("cd", gate, ramp)
    fe = build_protocol("fe", gate, ramp, FloquetParams())
    probes = cd.embed(ProbeSet.single_qubit().array)
    return {
        "magnus4 cd (1000 steps)": (EvolutionSpec(cd), probes),
        "magnus4 fe (4000 steps)": (EvolutionSpec(fe), probes),
        "rk4 cd dephasing (1000 steps)": (EvolutionSpec(cd, noise=NoiseSpec.on_driven(cd, 2.0)), probes),
    }


def kernel_inputs(n=4000, d=4):
    spec = EvolutionSpec(build_protocol("fe", GateSpec.hadamard(), RampProfile("linear", 1.0), FloquetParams()))
    dt = 1.0 / n
    t = np.arange(n) * dt
    c = np.sqrt(3.0) / 6.0
    h = spec.protocol.hamiltonian
    return h(t + (0.5 - c) * dt), h(t + (0.5 + c) * dt), dt


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = available_backends()
    print(f"{'workload':34s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, (spec, rho0) in workloads().items():
        row, ref = [], None
        for b in backends:
            s = EvolutionSpec(spec.protocol, noise=spec.noise, backend=b)
            states = propagate_many(s, rho0).states
            if ref is None:
                ref = states
            else:
                assert np.max(np.abs(states - ref)) < 1e-10, "backends disagree"
            row.append(best_of(lambda: propagate_many(s, rho0), args.repeat))
        line = f"{name:34s}" + "".join(f"{t * 1e3:10.1f}ms" for t in row)
        if len(row) > 1:
            line += f"{row[1] / row[0]:11.1f}x"
        print(line)

    h1, h2, dt = kernel_inputs()
    row = []
    for b in backends:
        k = get_kernels(b)
        row.append(best_of(lambda: k.chain_magnus4(h1, h2, dt, 20), args.repeat))
    line = f"{'kernel only: chain_magnus4 (4000)':34s}" + "".join(f"{t * 1e3:10.1f}ms" for t in row)
    if len(row) > 1:
        line += f"{row[1] / row[0]:11.1f}x"
    print(line)


if __name__ == "__main__":
    main()
