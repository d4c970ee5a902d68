import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from qcgate import dynamics as D
from qcgate.hamiltonians import FloquetParams, GateSpec, build_protocol
from qcgate.linalg import SZ, embed, ket_to_dm
from qcgate.ramps import RampProfile

PLUS = ket_to_dm(np.array([1, 1]) / np.sqrt(2))


def proto(kind="uncontrolled", ramp="linear", tau=1.0, ratio=200.0):
    return build_protocol(kind, GateSpec.hadamard(), RampProfile(ramp, tau), FloquetParams(ratio))


def schrodinger_reference(p, t_end):
    d = p.dim

    def rhs(t, y):
        return (-1j * p.hamiltonian(t) @ y.reshape(d, d)).ravel()

    sol = solve_ivp(rhs, (0, t_end), np.eye(d, dtype=complex).ravel(), method="DOP853", rtol=1e-12, atol=1e-12)
    return sol.y[:, -1].reshape(d, d)


@pytest.mark.parametrize("kind", ["uncontrolled", "cd", "fe"])
def test_propagator_matches_ode_solver(kind):
    p = proto(kind, "sinusoidal", 1.0, ratio=20)
    u = D.propagate_unitary_operator(D.EvolutionSpec(p, steps_per_unit=4000))
    np.testing.assert_allclose(u, schrodinger_reference(p, 1.0), atol=1e-8)


def test_magnus_fourth_order():
    p = proto("fe", ratio=50)
    ref = D.propagate_unitary_operator(D.EvolutionSpec(p, steps_per_unit=32000))
    errs = [np.abs(D.propagate_unitary_operator(D.EvolutionSpec(p, steps_per_unit=n)) - ref).max()
            for n in (1000, 2000, 4000)]
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8


def test_midpoint_second_order():
    p = proto("fe", ratio=50)
    ref = D.propagate_unitary_operator(D.EvolutionSpec(p, steps_per_unit=32000))
    errs = [np.abs(D.propagate_unitary_operator(D.EvolutionSpec(p, steps_per_unit=n, integrator="midpoint")) - ref).max()
            for n in (1000, 2000)]
    assert 3 < errs[0] / errs[1] < 5


def test_rk4_fourth_order_with_noise():
    p = proto("cd", tau=1.0)
    rho0 = p.embed(PLUS)
    noise = D.NoiseSpec.on_driven(p, 2.0)
    final = lambda n: D.propagate(D.EvolutionSpec(p, steps_per_unit=n, noise=noise), rho0).final
    ref = final(16000)
    e1, e2 = np.abs(final(1000) - ref).max(), np.abs(final(2000) - ref).max()
    assert e1 / e2 >= 8


def test_lindblad_matches_superoperator_exponential():
    # time-independent generator: exact solution by exponentiating the Liouvillian
    p = proto("cd")
    t0 = 0.0
    h = p.hamiltonian(t0)
    gamma, d = 0.7, p.dim
    z = embed(SZ, 1, 2)
    eye = np.eye(d)
    liou = -1j * (np.kron(h, eye) - np.kron(eye, h.T)) + gamma * (np.kron(z, z.T) - np.kron(eye, eye))
    rho0 = p.embed(PLUS)
    expect = (expm(liou * 0.3) @ rho0.ravel()).reshape(d, d)
    k = D._default_kernels
    n = 600
    hs = np.repeat(h[None], 2 * n + 1, axis=0)
    out = k.rk4_lindblad(hs, z[None], gamma, rho0[None], 0.3 / n, n)
    np.testing.assert_allclose(out[-1, 0], expect, atol=1e-10)


def test_pure_dephasing_decay():
    k = D._default_kernels
    n, t, gamma = 1000, 1.0, 0.5
    hs = np.zeros((2 * n + 1, 2, 2), dtype=complex)
    out = k.rk4_lindblad(hs, SZ[None], gamma, PLUS[None], t / n, n)
    assert out[-1, 0, 0, 1].real == pytest.approx(0.5 * np.exp(-2 * gamma * t), rel=1e-10)


def test_sampling_and_step_policy():
    p = proto("fe", ratio=200)
    spec = D.EvolutionSpec(p)
    assert spec.n_steps() == 4000 and spec.n_steps() % 200 == 0
    assert len(spec.times()) == 201
    assert D.EvolutionSpec(proto(), t_end=1.2).n_steps() == 1200
    assert D.EvolutionSpec(proto(), noise=D.NoiseSpec(100.0, (1,))).n_steps() == 2000
    with pytest.raises(ValueError, match="floor"):
        D.EvolutionSpec(proto(), steps_per_unit=500).n_steps()
    with pytest.raises(ValueError):
        D.EvolutionSpec(proto(), integrator="euler")


def test_trajectory_invariants():
    p = proto("cd")
    traj = D.propagate(D.EvolutionSpec(p, noise=D.NoiseSpec.on_driven(p, 1.0)), p.embed(PLUS))
    assert traj.states.shape == (201, 4, 4)
    tr = np.trace(traj.states, axis1=1, axis2=2)
    assert np.max(np.abs(tr - 1)) < 1e-9
    assert np.min(np.linalg.eigvalsh(traj.states)) >= -1e-8
    red = traj.reduce()
    assert set(red) == {0, 1} and red[0].shape == (201, 2, 2)


def test_check_states_detects_failures():
    bad = np.array([np.diag([1.1, 0.0])]).astype(complex)
    with pytest.raises(D.IntegrationError, match="trace"):
        D._check_states(bad)
    with pytest.raises(D.IntegrationError, match="positivity"):
        D._check_states(np.array([np.diag([1.5, -0.5])]).astype(complex))


def test_propagate_input_validation():
    p = proto()
    with pytest.raises(ValueError):
        D.propagate(D.EvolutionSpec(p), PLUS)
    with pytest.raises(ValueError):
        D.propagate(D.EvolutionSpec(p), np.eye(4))
    with pytest.raises(ValueError):
        D.propagate_unitary_operator(D.EvolutionSpec(p, noise=D.NoiseSpec(1.0, (1,))))
    with pytest.raises(ValueError):
        D.NoiseSpec(-1.0)


def test_noise_sites():
    cz_ie = build_protocol("ie", GateSpec.controlled_z(), RampProfile("linear", 1.0))
    assert D.NoiseSpec.on_driven(cz_ie, 1.0).sites == (0, 1)
    assert D.NoiseSpec.on_driven(cz_ie, 1.0, "first").sites == (0,)
    assert D.NoiseSpec.on_driven(proto("cd"), 1.0).sites == (1,)


def test_reduce_trajectory_bloch():
    p = proto("cd")
    traj = D.propagate(D.EvolutionSpec(p), p.embed(PLUS))
    series = D.reduce_trajectory(traj)
    assert series[0].shape == (201, 3)
    np.testing.assert_allclose(series[0][0], [1, 0, 0], atol=1e-14)
    np.testing.assert_allclose(series[0][-1], [0, 0, 1], atol=1e-7)
    with pytest.raises(ValueError):
        D.reduce_trajectory(traj, layout=(2, 2, 2))
