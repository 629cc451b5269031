import numpy as np
import pytest
from scipy.sparse.linalg import expm_multiply

from delaywave.discretize import build_mesh
from delaywave.evolve import delay_steps, simulate, simulate_method_of_steps, step
from delaywave.exceptions import AlignmentError, ParameterError
from delaywave.generator import apply_generator, assemble_generator, energy_norm_sq
from delaywave.model import InitialPreset, ModelParams, build_initial_state


@pytest.fixture
def setup():
    p = ModelParams()
    mesh = build_mesh(p, 20)
    sys = assemble_generator(p, mesh, 4)
    U0 = build_initial_state(p, mesh, InitialPreset(), 4)
    return p, mesh, sys, U0


@pytest.mark.parametrize("scheme", ["backward_euler", "crank_nicolson"])
def test_step_zero(setup, scheme):
    sys = setup[2]
    assert not np.any(step(sys, np.zeros(sys.dim), 0.1, scheme))


def test_unknown_scheme(setup):
    with pytest.raises(ParameterError):
        step(setup[2], setup[3], 0.1, "rk4")
    with pytest.raises(ParameterError):
        step(setup[2], setup[3], 0.0)


def test_step_residual(setup, rng):
    sys = setup[2]
    x = rng.standard_normal(sys.dim)
    dt = 0.05
    xn = step(sys, x, dt, "backward_euler")
    r = sys.E @ xn - dt * (sys.G @ xn) - sys.E @ x
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(sys.E @ x)
    xc = step(sys, x, dt, "crank_nicolson")
    r = sys.E @ xc - dt / 2 * (sys.G @ xc) - (sys.E @ x + dt / 2 * (sys.G @ x))
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(sys.E @ x)


def test_factorization_cached(setup):
    sys = setup[2]
    step(sys, setup[3], 0.1)
    step(sys, setup[3], 0.1)
    step(sys, setup[3], 0.05, "crank_nicolson")
    keys = [k for k in sys._cache if k[0] == "step"]
    assert sorted(keys) == [("step", "backward_euler", 0.1), ("step", "crank_nicolson", 0.05)]


def test_backward_euler_never_increases_energy(setup, rng):
    sys = setup[2]
    for _ in range(20):
        x = rng.standard_normal(sys.dim)
        assert energy_norm_sq(sys, step(sys, x, 0.02)) <= energy_norm_sq(sys, x) * (1 + 1e-12)


def test_local_error_orders(setup):
    """Against the exact flow exp(dt A) U: local error O(dt^2) for BE, O(dt^3) for CN.

    The damped block has eigenvalues near -4.5e3 on this mesh, so the
    asymptotic regime needs dt well below 1e-4.
    """
    sys, U0 = setup[2], setup[3].pack()
    A = sys.A_dense
    for scheme, expected in (("backward_euler", 4.0), ("crank_nicolson", 8.0)):
        errs = []
        for dt in (2e-5, 1e-5, 5e-6):
            exact = expm_multiply(dt * A, U0)
            errs.append(np.sqrt(energy_norm_sq(sys, step(sys, U0, dt, scheme) - exact)))
        assert errs[0] / errs[1] == pytest.approx(expected, rel=0.06)
        assert errs[1] / errs[2] == pytest.approx(expected, rel=0.04)


def test_difference_quotient_and_richardson(setup):
    sys, U0 = setup[2], setup[3].pack()
    AU = apply_generator(sys, U0)

    def dq(dt):
        return (step(sys, U0, dt) - U0) / dt

    e = [np.linalg.norm(dq(dt) - AU) for dt in (1e-5, 5e-6)]
    assert e[0] / e[1] == pytest.approx(2.0, rel=0.05)
    rich = [np.linalg.norm(2 * dq(dt / 2) - dq(dt) - AU) for dt in (1e-5, 5e-6)]
    assert rich[0] / rich[1] == pytest.approx(4.0, rel=0.05)


def test_simulate_zero(setup):
    sys = setup[2]
    tr = simulate(sys, np.zeros(sys.dim), 0.1, 1.0)
    assert len(tr) == 11
    assert not np.any(tr.rows[:, 1:])
    np.testing.assert_allclose(tr.t, np.linspace(0, 1, 11))


def test_simulate_monotone_and_balanced(setup):
    p, _, sys, U0 = setup
    tr = simulate(sys, U0, 0.01, 5.0)
    assert np.all(np.diff(tr.E) <= 1e-8 * tr.E[0])
    # discrete energy law with D at the new time level
    assert np.all(np.diff(tr.E) + 0.01 * tr.D[1:] <= 1e-8 * tr.E[0])
    np.testing.assert_allclose(tr.E, tr.E1 + tr.E2 + tr.E3, rtol=1e-14)
    assert np.all(tr.D >= 0)


def test_simulate_snapshots(setup):
    sys, U0 = setup[2], setup[3]
    tr = simulate(sys, U0, 0.1, 1.0, snapshot_every=5)
    assert [t for t, _ in tr.snapshots] == pytest.approx([0.0, 0.5, 1.0])
    np.testing.assert_array_equal(tr.snapshots[0][1].pack(), U0.pack())


@pytest.mark.parametrize("scheme, order", [("backward_euler", 1), ("crank_nicolson", 2)])
def test_self_convergence(setup, scheme, order):
    sys, U0 = setup[2], setup[3]
    T = 1.0
    E = [simulate(sys, U0, dt, T, scheme).E[-1] for dt in (0.02, 0.01, 0.005)]
    ratio = (E[0] - E[1]) / (E[1] - E[2])
    assert ratio == pytest.approx(2 ** order, rel=0.15)


def test_delay_steps():
    assert delay_steps(0.1, 0.01) == 10
    assert delay_steps(0.1, 0.005) == 20
    with pytest.raises(AlignmentError):
        delay_steps(0.1, 0.03)
    with pytest.raises(AlignmentError):
        delay_steps(0.1, 0.3)


def test_method_of_steps_zero():
    p = ModelParams()
    mesh = build_mesh(p, 20)
    tr = simulate_method_of_steps(p, mesh, InitialPreset(kind="zero", history="zero"), 0.01, 0.5)
    assert not np.any(tr.rows[:, 1:])


def test_method_of_steps_alignment():
    p = ModelParams()
    with pytest.raises(AlignmentError):
        simulate_method_of_steps(p, build_mesh(p, 20), InitialPreset(), 0.03, 0.5)


def test_method_of_steps_energy_terms():
    p = ModelParams()
    mesh = build_mesh(p, 20)
    tr = simulate_method_of_steps(p, mesh, InitialPreset(), 0.01, 0.2)
    # frozen history: E3 at t=0 is (tau |kappa2| / 2) * |v0_x|^2_(0, beta)
    sys = assemble_generator(p, mesh, 4)
    v0 = np.sin(np.pi * mesh.interior)
    assert tr.E3[0] == pytest.approx(0.5 * p.tau * abs(p.kappa2) * sys.vx_seminorm(v0), rel=1e-13)
    np.testing.assert_allclose(tr.E, tr.E1 + tr.E2 + tr.E3, rtol=1e-14)


def _route_error(p, mesh, preset, dt, nrho, T):
    sys = assemble_generator(p, mesh, nrho)
    tr = simulate(sys, build_initial_state(p, mesh, preset, nrho), dt, T, snapshot_every=1)
    ref = simulate_method_of_steps(p, mesh, preset, dt, T, snapshot_every=1)
    W = sys.M_h[sys.wave_slice(), sys.wave_slice()]
    err = 0.0
    for (_, a), (_, b) in zip(tr.snapshots, ref.snapshots):
        d = a.pack()[sys.wave_slice()] - b.pack()
        err = max(err, float(np.sqrt(d @ (W @ d))))
    return err


def test_routes_converge_to_each_other():
    p = ModelParams()
    mesh = build_mesh(p, 40)
    preset = InitialPreset(history="sine_in_time", omega=3.0)
    errs = [_route_error(p, mesh, preset, dt, nrho, 5 * p.tau)
            for dt, nrho in ((1e-2, 16), (5e-3, 32), (2.5e-3, 64))]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / errs[0] < 0.5


def test_delay_sign_matters():
    mesh_p = ModelParams()
    mesh = build_mesh(mesh_p, 20)
    preset = InitialPreset(history="sine_in_time", omega=3.0)
    plus = simulate_method_of_steps(ModelParams(kappa2=0.5), mesh, preset, 0.01, 1.0)
    minus = simulate_method_of_steps(ModelParams(kappa2=-0.5), mesh, preset, 0.01, 1.0)
    assert np.abs(plus.E - minus.E).max() > 1e-3 * plus.E[0]
