import math

import numpy as np
import pytest
from conftest import build_with
from hypothesis import given, settings
from hypothesis import strategies as st

from lsgate import evolve
from lsgate.evolve import (
    TARGET,
    GateResult,
    QuantumState,
    avg_fidelity,
    calibrate,
    entangling_phase,
    gate_process,
    loop_phase,
    optimize_frame,
    propagate,
    sdf_amplitude_seed,
    single_loop,
)
from lsgate.hamiltonian import DOWN, UP
from lsgate.pulse import make_schedule


@pytest.fixture(scope="module")
def sdf_built():
    return build_with("simulation.tier=sdf")


# --- fidelity helpers -----------------------------------------------------


def test_avg_fidelity_of_target_is_one():
    assert avg_fidelity([TARGET], TARGET) == pytest.approx(1.0, abs=1e-15)
    assert avg_fidelity([np.eye(4)], TARGET) < 1.0


def test_avg_fidelity_depolarized_qubit():
    # single-qubit depolarizing with probability p: F = 1 - p/2
    p = 0.01
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    kraus = [math.sqrt(1 - 3 * p / 4) * paulis[0]] + [math.sqrt(p / 4) * s for s in paulis[1:]]
    assert avg_fidelity(kraus, np.eye(2)) == pytest.approx(1 - p / 2, rel=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_frame_optimization_recovers_local_z(a, b):
    u = evolve._z_frame(a, b) @ TARGET
    fa, fb, f = optimize_frame([u], TARGET)
    assert f == pytest.approx(1.0, abs=1e-10)
    assert entangling_phase(u) == pytest.approx(math.pi / 2, abs=1e-12)


# --- propagation ----------------------------------------------------------


def test_zero_hamiltonian_leaves_state(sdf_built):
    b = build_with("beams.g_hz=0", "simulation.tier=sdf")
    model = b.setup.sdf(3)
    s = QuantumState.basis(model, UP, DOWN, [2])
    traj = propagate(model, s, b.schedule)
    # the echo pulses flip both ions: up,down -> down,up -> up,down
    assert np.allclose(traj.final[0], s.amplitudes, atol=1e-14)


def test_single_square_loop_matches_oscillator(sdf_built):
    sched = make_schedule(1, 45e-6, 5e-6, echo=False, shape="square")
    model = sdf_built.setup.sdf(12)
    amp = 0.97
    s = QuantumState.basis(model, UP, DOWN)
    traj = propagate(model, s, sched, tol=1e-12, amplitude=amp)
    psi = traj.final[0]
    # motion back in vacuum
    assert abs(psi[UP, DOWN, 0]) == pytest.approx(1.0, abs=1e-9)
    omega = model.omega * amp**2
    phi = 2 * math.pi * (omega * model.eta_eff / model.detuning) ** 2
    assert abs(np.angle(psi[UP, DOWN, 0]) - phi) < 1e-6
    assert traj.norm_drift < 1e-10


def test_displacement_follows_closed_form(sdf_built):
    # H = F (a e^{i(d t + phi)} + h.c.) on |up,down> gives |alpha(t)| = |F / d| |e^{i d t} - 1|
    sched = make_schedule(1, 45e-6, 5e-6, echo=False, shape="square")
    model = sdf_built.setup.sdf(14)
    s = QuantumState.basis(model, UP, DOWN)
    times = np.array([5e-6, 11e-6, 22.5e-6])
    traj = propagate(model, s, sched, tol=1e-12, sample_times=times)
    a = np.diag(np.sqrt(np.arange(1, 15)), 1)
    f = model.omega * 2 * abs(model.etas[0])
    for k, t in enumerate(times):
        v = traj.samples[k, 0, UP, DOWN]
        alpha = np.vdot(v, a @ v)
        assert abs(alpha) == pytest.approx(f / abs(model.detuning) * abs(np.exp(1j * model.detuning * t) - 1),
                                           rel=1e-6)


def test_norm_conserved_full(built):
    model = built.setup.full({"x_str": 3, "x_com": 1})
    sched = make_schedule(1, 10e-6, 1e-6, echo=False, ramp=2e-6)
    s = QuantumState.basis(model, UP, UP)
    traj = propagate(model, s, sched, tol=1e-10)
    assert traj.norm_drift < 1e-10


def test_state_shape_checked(built):
    model = built.setup.sdf(3)
    with pytest.raises(ValueError):
        evolve.propagate_batch(model, np.zeros((1, 2, 2, 5)), built.schedule)
    with pytest.raises(ValueError):
        evolve.propagate_batch(model, np.zeros((1, 2, 2, 4)), built.schedule, tol=0)


# --- calibration and gate ---------------------------------------------------


def test_calibration_seed_and_limits(sdf_built):
    model = sdf_built.setup.sdf(10)
    seed = sdf_amplitude_seed(model, math.pi / 4)
    # seed is the closed form: Omega amp^2 = d sqrt(phi / 2 pi) / eta_eff
    assert model.omega * seed**2 == pytest.approx(
        abs(model.detuning) * math.sqrt(0.125) / model.eta_eff, rel=1e-12)
    assert sdf_amplitude_seed(model, 0.0) == 0.0
    # doubling the detuning at fixed phase doubles the required Omega
    m2 = type(model)(model.spectrum, model.beams, model.scheme, 10, model.positions)
    m2.detuning = 2 * model.detuning
    assert m2.omega * sdf_amplitude_seed(m2, math.pi / 4) ** 2 == pytest.approx(
        2 * model.omega * seed**2, rel=1e-12)


def test_ideal_gate_and_calibration(sdf_built):
    model = sdf_built.setup.sdf(10)
    amp = calibrate(model, sdf_built.schedule)
    assert loop_phase(model, sdf_built.schedule, amp) == pytest.approx(math.pi / 4, abs=1e-8)
    res = gate_process(model, sdf_built.schedule, amp, frame="raw")
    assert isinstance(res, GateResult)
    assert res.fidelity_full_raw > 1 - 1e-9
    assert res.leakage < 1e-12
    assert res.phase == pytest.approx(math.pi / 2, abs=1e-8)
    assert np.allclose(res.process, TARGET, atol=1e-5)


def test_echo_cancels_static_shift_with_ideal_pulses():
    base = build_with("simulation.tier=sdf")
    shifted = build_with("simulation.tier=sdf", "scheme.qubit_shift_hz=500")
    amp = calibrate(base.setup.sdf(10), base.schedule)
    r = gate_process(shifted.setup.sdf(10), shifted.schedule, amp, frame="raw")
    assert r.error < 1e-9


def test_corrected_kraus_undoes_frame(sdf_built):
    model = sdf_built.setup.sdf(8)
    amp = calibrate(model, sdf_built.schedule)
    res = gate_process(model, sdf_built.schedule, amp, frame="optimized")
    k = res.corrected_kraus()
    assert avg_fidelity(k, TARGET) == pytest.approx(res.fidelity_full, abs=1e-10)


def test_exchange_symmetry(built):
    model = built.setup.lightshift({"x_str": 4})
    sched = single_loop(make_schedule(1, 45e-6, 5e-6, echo=False, ramp=2e-6))
    ud = QuantumState.basis(model, UP, DOWN).amplitudes
    du = QuantumState.basis(model, DOWN, UP).amplitudes
    out = evolve.propagate_batch(model, np.stack([ud, du]), sched, tol=1e-9).final
    # swapping the ions maps one input onto the other, up to the sign of the displacement
    assert np.allclose(np.abs(out[0][UP, DOWN]), np.abs(out[1][DOWN, UP]), atol=1e-7)
    assert out[0][UP, DOWN, 0] == pytest.approx(out[1][DOWN, UP, 0], abs=1e-7)


def test_thermal_weights():
    w = evolve.thermal_weights(0.1, 10)
    assert w.sum() == pytest.approx(1.0)
    assert w[0] == pytest.approx(1 / 1.1, rel=1e-3)
    assert np.all(np.diff(w) < 0)


def test_zero_drive_populations_vanish(built):
    b = build_with("beams.g_hz=0")
    model = b.setup.full({"x_str": 2, "x_com": 1})
    sched = make_schedule(1, 10e-6, 1e-6, echo=False, ramp=2e-6)
    tr = evolve.transient_populations(model, sched, ["D", "x_com"], 1.0, n_samples=50)
    for trace in tr.values():
        assert np.all(trace.raw == 0)


def test_leakage_without_beams_is_zero(built):
    model = built.setup.full({"x_str": 2})
    sched = make_schedule(1, 10e-6, 1e-6, echo=False, ramp=2e-6)
    out = evolve.leakage_experiment(model, sched, "none", n_samples=20)
    assert out["leakage"] == 0.0


@pytest.mark.slow
def test_tier_consistency(built):
    # light-shift and SDF tiers agree on the loop phase up to the exact
    # prefactor correction (mu / 2 Delta)^2 and Lamb-Dicke corrections
    sdf = built.setup.sdf(6)
    amp = calibrate(sdf, built.schedule)
    ls = built.setup.lightshift({"x_str": 6}, exact_prefactor=False)
    assert loop_phase(ls, built.schedule, amp) == pytest.approx(math.pi / 4, rel=0.02)


@pytest.mark.slow
def test_full_transient_excitation_is_percent_level(built):
    model = built.setup.full({"x_str": 2})
    sched = make_schedule(1, 10e-6, 1e-6, echo=False, ramp=2e-6)
    tr = evolve.transient_populations(model, sched, ["D"], 1.0, n_samples=400, window=None)
    peak = np.max(tr["D"].raw)
    assert 2e-3 < peak < 0.2
