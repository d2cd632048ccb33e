import math

import numpy as np
import pytest
from conftest import build_with
from hypothesis import given, settings
from hypothesis import strategies as st

from lsgate.constants import TWO_PI
from lsgate.hamiltonian import (
    DOWN,
    UP,
    BeamPair,
    DimensionError,
    LevelScheme,
    SingularityError,
    annihilation,
    displacement_factor,
    full_dimension,
    lightshift_prefactor,
)


def _hermitian_error(h):
    return np.max(np.abs(h - h.conj().T)) / max(np.max(np.abs(h)), 1e-300)


@pytest.fixture(scope="module")
def small_full(built):
    return built.setup.full({"x_str": 3, "x_com": 1})


def test_reference_dimension(built):
    assert full_dimension(4, [10, 1, 1, 1, 1, 1]) == 5632
    model = built.setup.full({"x_str": 10, "x_com": 1, "y_com": 1, "y_str": 1, "z_com": 1, "z_str": 1})
    assert model.dimension == 5632


def test_dimension_cap(built):
    with pytest.raises(DimensionError, match="exceeds"):
        built.setup.replace(max_dimension=100).full({"x_str": 10})


@pytest.mark.parametrize("t", [0.0, 3.3e-6, 2.71e-5])
def test_full_hamiltonian_hermitian(small_full, t):
    assert _hermitian_error(small_full.hamiltonian(t, 0.8)) < 1e-12


@pytest.mark.parametrize("t", [0.0, 1.1e-5])
def test_reduced_hamiltonians_hermitian(built, t):
    for model in (built.setup.lightshift({"x_str": 4, "x_com": 1}), built.setup.sdf(5)):
        assert _hermitian_error(model.hamiltonian(t, 1.0)) < 1e-12


def test_coupling_coefficients(small_full, built):
    beams, scheme = built.beams, built.scheme
    t = 1.7e-6
    coef = small_full.coefficients(t, 0.5)
    e_minus, e_plus = small_full.index("e-"), small_full.index("e+")
    for j, x in enumerate(small_full.positions):
        for bi, (b, s, k, ph) in enumerate((("A", 1, beams.k_a, beams.phase_a), ("B", -1, beams.k_b, beams.phase_b))):
            static = np.exp(-1j * (ph + k[0] * x))
            for lvl, tau, energy in ((e_minus, -1, -scheme.delta), (e_plus, 1, scheme.delta)):
                expect = 0.5 * beams.coupling(b, tau) * static * np.exp(1j * (energy - s * beams.mu / 2) * t)
                assert coef[j, bi, lvl] == pytest.approx(expect, rel=1e-12)
    # qubit levels are not driven directly
    assert np.all(coef[:, :, DOWN] == 0) and np.all(coef[:, :, UP] == 0)


def test_zero_drive_is_stationary(built):
    model = build_with("beams.g_hz=0").setup.full({"x_str": 3})
    psi = np.zeros((1, *model.shape), complex)
    psi[0, DOWN, DOWN, 0] = 1
    assert np.all(model.apply(2e-6, psi) == 0)
    h = model.hamiltonian(5e-6)
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0


def test_second_order_shift_cancels(small_full, built):
    scale = built.beams.g_a**2 / built.scheme.delta
    assert abs(small_full.second_order_shift()) < 1e-2 * scale


def test_displacement_unitary_and_matches_expm():
    from scipy.linalg import expm

    a = annihilation(8)
    d = displacement_factor(0.3, 8)
    assert np.allclose(d.conj().T @ d, np.eye(9), atol=1e-12)
    assert np.allclose(d, expm(-1j * 0.3 * (a + a.T)), atol=1e-12)


# --- light-shift tier -----------------------------------------------------


def test_prefactor_limits():
    g, delta = TWO_PI * 0.76e6, TWO_PI * 7.8e6
    assert lightshift_prefactor(g, delta, 1e-3) == pytest.approx(4 * g**2 / delta, rel=1e-12)
    mu = TWO_PI * 2.03e6
    ratio = lightshift_prefactor(g, delta, mu) / lightshift_prefactor(g, delta, mu, exact=False) - 1
    x = (mu / (2 * delta)) ** 2
    assert ratio == pytest.approx(x / (1 - x), rel=1e-12)
    assert ratio == pytest.approx(0.0172, abs=2e-4)


def test_prefactor_singularity_and_warning():
    with pytest.raises(SingularityError):
        lightshift_prefactor(1.0, 1e6, 2e6)
    with pytest.warns(UserWarning, match="adiabatic"):
        lightshift_prefactor(0.5e6, 1e6, 0.1)


def test_lightshift_zero_time_average(built):
    model = built.setup.lightshift({"x_str": 1})
    period = TWO_PI / abs(built.beams.mu)
    ts = np.linspace(0, period, 2001)
    vac = np.array([model.operator(0, t)[0, 0] for t in ts])
    assert abs(np.trapezoid(vac, ts) / period) < 1e-6


def test_lightshift_first_order_agrees_at_small_eta(built):
    exact = built.setup.lightshift({"x_str": 3}, order=None)
    lin = built.setup.lightshift({"x_str": 3}, order=1)
    t = 4.2e-6
    diff = np.max(np.abs(exact.operator(1, t) - lin.operator(1, t)))
    assert diff < 3 * exact.etas[1, 0] ** 2


# --- SDF tier -------------------------------------------------------------


def test_sdf_down_down_inert(built):
    model = built.setup.sdf(4)
    psi = np.zeros((1, *model.shape), complex)
    psi[0, DOWN, DOWN, 2] = 1
    assert np.all(model.apply(3e-6, psi) == 0)


def test_sdf_up_up_does_not_drive_stretch(built):
    model = built.setup.sdf(4)
    # phase-matched spacing: equal force phase, opposite stretch participation
    net = sum(model.etas[j] * np.exp(1j * model.phases[j]) for j in range(2))
    assert abs(net) < 1e-9 * abs(model.etas[0])


@given(st.floats(0.2, 5.0))
@settings(max_examples=20, deadline=None)
def test_sdf_force_and_area_scaling(s):
    from lsgate.evolve import GateSetup  # noqa: F401  (import check)

    b = build_with("simulation.tier=sdf")
    m1 = b.setup.sdf(3)
    m2 = type(m1)(m1.spectrum, m1.beams, m1.scheme, 3, m1.positions, omega=s * m1.omega)
    psi = np.zeros((1, *m1.shape), complex)
    psi[0, UP, DOWN, 0] = 1
    assert np.allclose(m2.apply(1e-6, psi), s * m1.apply(1e-6, psi), atol=1e-12 * s)
    assert m2.loop_phase() == pytest.approx(s**2 * m1.loop_phase(), rel=1e-12)


def test_beam_pair_validation():
    with pytest.raises(ValueError):
        BeamPair(1.0, 2.0, 0.0, np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        LevelScheme(-1.0)
    bp = BeamPair(1.0, 1.0, 0.0, np.ones(3), -np.ones(3), phase_a=0.3, phase_b=0.1)
    assert bp.delta_phi == pytest.approx(0.2)
    assert np.allclose(bp.delta_k, 2 * np.ones(3))
    assert abs(bp.coupling("B", 1)) == 1.0 and np.angle(bp.coupling("B", 1)) == pytest.approx(math.pi / 2)
