import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holosurf import holonomy as ho
from holosurf.errors import AuxiliaryNotGround, DegenerateTheta, DimensionMismatch
from holosurf.mat_core import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    StateVector,
    expm_hermitian,
    frame_twisted,
    kron,
    state_fidelity,
    time_ordered_evolve,
    unitarity_error,
)

HADAMARD = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
# cos^2(theta/2) = 1/3: area 3 pi closes both channels exactly (pi and 2 pi).
THETA_COMMENSURATE = 2 * math.acos(1 / math.sqrt(3))
angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def non_degenerate(theta):
    return not ho.is_degenerate_theta(theta, 1e-3)


# --- build_h1 / svd_T ---------------------------------------------------------

def test_h1_theta_zero_is_pure_coupling():
    h = ho.build_h1(ho.SingleQubitPulse(0.0, 0.4))
    assert np.allclose(h, 0.5 * (kron(SIGMA_X, SIGMA_X) + kron(SIGMA_Y, SIGMA_Y)))


def test_h1_theta_half_pi_is_pure_drive():
    h = ho.build_h1(ho.SingleQubitPulse(math.pi / 2, 0.4))
    drive = math.cos(0.4) * SIGMA_X + math.sin(0.4) * SIGMA_Y
    assert np.allclose(h, 0.5 * kron(drive, np.eye(2)), atol=1e-16)


@pytest.mark.parametrize("theta,beta", [(math.pi / 4, math.pi), (0.3, 1.1), (2.0, -0.7)])
def test_h1_block_structure(theta, beta):
    h = ho.build_h1(ho.SingleQubitPulse(theta, beta), j0=2.5)
    assert np.allclose(h[:2, :2], 0) and np.allclose(h[2:, 2:], 0)
    assert np.allclose(h[:2, 2:], 2.5 * ho.t_block(theta, beta))
    assert np.allclose(h[2:, :2], 2.5 * ho.t_block(theta, beta).conj().T)


def test_svd_hadamard_entries():
    svd = ho.svd_T(math.pi / 4, math.pi)
    s, c = math.sin(math.pi / 8), math.cos(math.pi / 8)
    assert np.allclose(svd.v0, [[s, -c], [-c, -s]])
    assert np.allclose(svd.d, np.diag([c * c, s * s]))
    assert np.allclose(svd.v1_dagger, [[-c, s], [s, c]])


@settings(max_examples=50, deadline=None)
@given(angles, angles)
def test_svd_reconstructs_t(theta, beta):
    svd = ho.svd_T(theta, beta)
    assert np.abs(svd.reconstruct() - ho.t_block(theta, beta)).max() <= 1e-12
    for v in (svd.v0, svd.v1_dagger * np.exp(1j * beta)):
        assert np.allclose(v @ v, np.eye(2), atol=1e-12)
        assert np.allclose(v, v.conj().T, atol=1e-12)
    assert np.allclose(np.diag(svd.d).real, [math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2])


def test_svd_theta_half_pi():
    assert np.allclose(ho.svd_T(math.pi / 2, 0.2).d, np.diag([0.5, 0.5]))


# --- u1 -----------------------------------------------------------------------

def test_u1_zero_area_is_identity():
    assert np.allclose(ho.u1_closed_form(ho.SingleQubitPulse(0.7, 0.2, 0.0)), np.eye(4))


@pytest.mark.parametrize("envelope", ["flat_top", "raised_cosine"])
@pytest.mark.parametrize("theta,beta,area", [(math.pi / 4, math.pi, 2.0), (1.1, 0.4, 7.5), (THETA_COMMENSURATE, 0.3, 3 * math.pi)])
def test_u1_matches_integrator(envelope, theta, beta, area):
    pulse = ho.SingleQubitPulse(theta, beta, area)
    u = time_ordered_evolve(ho.h1_hamiltonian(pulse, envelope, duration=2.0), 0.0, 2.0, 10_000)
    assert np.linalg.norm(u - ho.u1_closed_form(pulse)) <= 1e-8


def test_u1_half_sine_converges_to_closed_form():
    # Midpoint quadrature of a non-periodic envelope leaves an O(dt^2) area error.
    pulse = ho.SingleQubitPulse(1.1, 0.4, 7.5)
    h = ho.h1_hamiltonian(pulse, "half_sine")
    errs = [np.linalg.norm(time_ordered_evolve(h, 0.0, 1.0, n) - ho.u1_closed_form(pulse)) for n in (1000, 2000)]
    assert errs[1] <= 1e-6
    assert errs[0] / errs[1] >= 3.5


@settings(max_examples=40, deadline=None)
@given(angles.filter(non_degenerate), angles)
def test_u1_cyclic_point_gives_block_form(theta, beta):
    u = ho.u1_from_angles(theta, beta, [math.pi, 2 * math.pi])
    assert np.abs(u - ho.cyclic_block_form(theta, beta)).max() <= 1e-12


def test_commensurate_area_realizes_cyclic_form():
    u = ho.u1_closed_form(ho.SingleQubitPulse(THETA_COMMENSURATE, 0.3, 3 * math.pi))
    assert np.abs(u - ho.cyclic_block_form(THETA_COMMENSURATE, 0.3)).max() <= 1e-12


def test_condition_i_no_dynamic_phase():
    pulse = ho.SingleQubitPulse(THETA_COMMENSURATE, 0.9, 3 * math.pi)
    h = ho.build_h1(pulse)
    for k in (0, 1):
        p = np.zeros((4, 4))
        p[2 * k, 2 * k] = p[2 * k + 1, 2 * k + 1] = 1
        for t in np.linspace(0, pulse.area, 50):
            u = ho.u1_closed_form(ho.SingleQubitPulse(pulse.theta, pulse.beta, t))
            pt = u @ p @ u.conj().T
            assert np.linalg.norm(pt @ h @ pt, 2) <= 1e-10


def test_condition_ii_subspaces_return():
    u = ho.u1_closed_form(ho.SingleQubitPulse(THETA_COMMENSURATE, 0.9, 3 * math.pi))
    assert np.linalg.norm(u[:2, 2:]) <= 1e-10 and np.linalg.norm(u[2:, :2]) <= 1e-10


def test_find_cyclic_area():
    exact = ho.find_cyclic_area(THETA_COMMENSURATE, 20.0)
    assert (exact.m, exact.n) == (0, 1)
    assert exact.area == pytest.approx(3 * math.pi)
    assert exact.leakage <= 1e-12
    small = ho.find_cyclic_area(math.pi / 4, 50.0)
    large = ho.find_cyclic_area(math.pi / 4, 2000.0)
    assert large.leakage <= small.leakage
    assert large.leakage < 0.05
    with pytest.raises(DegenerateTheta):
        ho.find_cyclic_area(math.pi / 2, 100.0)
    with pytest.raises(ValueError):
        ho.find_cyclic_area(math.pi / 4, 0.1)


def test_pulse_rejects_negative_area():
    with pytest.raises(ValueError):
        ho.SingleQubitPulse(0.1, 0.1, -1.0)
    with pytest.raises(ValueError):
        ho.TwoQubitPulse(0.1, -1.0)


# --- single-qubit gates -------------------------------------------------------

def test_hadamard():
    assert np.abs(ho.single_qubit_gate(math.pi / 4, math.pi, "L0") - HADAMARD).max() <= 1e-12
    assert np.abs(ho.hadamard() - HADAMARD).max() <= 1e-12


def test_theta_zero_gives_sigma_z():
    assert np.allclose(ho.single_qubit_gate(0, 0.3, "L0"), SIGMA_Z)
    assert np.allclose(ho.single_qubit_gate(0, 0.3, "L1"), -SIGMA_Z)


@settings(max_examples=60, deadline=None)
@given(angles.filter(non_degenerate), angles, st.sampled_from(["L0", "L1"]))
def test_single_qubit_gate_is_involution(theta, beta, sub):
    v = ho.single_qubit_gate(theta, beta, sub)
    assert np.abs(v @ v - np.eye(2)).max() <= 1e-12
    assert np.allclose(v, v.conj().T)


@pytest.mark.parametrize("theta", [math.pi / 2, -math.pi / 2, 3 * math.pi / 2, math.pi / 2 + 1e-11])
def test_degenerate_theta(theta):
    with pytest.raises(DegenerateTheta):
        ho.single_qubit_gate(theta, 0.0)


def test_bad_subspace():
    with pytest.raises(ValueError):
        ho.single_qubit_gate(0.1, 0.0, "L2")


def test_rotation_examples():
    assert np.allclose(ho.rotation_x(0), np.eye(2), atol=1e-15)
    assert np.allclose(ho.rotation_x(math.pi / 2), -1j * SIGMA_X, atol=1e-15)
    assert np.allclose(ho.rotation_z(0), np.eye(2), atol=1e-15)
    assert np.allclose(ho.rotation_z(math.pi / 4), np.diag(np.exp([-1j * math.pi / 4, 1j * math.pi / 4])), atol=1e-15)


def test_rotations_random_alpha():
    for alpha in np.random.default_rng(7).uniform(-2 * math.pi, 2 * math.pi, 100):
        rx = ho.rotation_x(alpha)
        assert np.abs(rx - (math.cos(alpha) * np.eye(2) - 1j * math.sin(alpha) * SIGMA_X)).max() <= 1e-12
        assert np.abs(rx - expm_hermitian(SIGMA_X, alpha)).max() <= 1e-12
        assert np.abs(ho.hadamard() @ rx @ ho.hadamard() - expm_hermitian(SIGMA_Z, alpha)).max() <= 1e-12


def test_rotation_x_avoids_excluded_angle():
    assert np.allclose(ho.rotation_x(math.pi / 4), expm_hermitian(SIGMA_X, math.pi / 4))
    with pytest.raises(DegenerateTheta):
        ho.rotation_x(math.pi / 4, base_theta=math.pi / 4)


# --- two-qubit construction ---------------------------------------------------

def test_h2_trivial_subspaces():
    h = ho.build_h2(0.3, 0.8)
    assert np.allclose(h[:, 0], 0) and np.allclose(h[:, 7], 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_h2_s2_s3_blocks(j13, j23):
    h = ho.build_h2(j13, j23)
    expected = [[0, j23, j13], [j23, 0, 0], [j13, 0, 0]]
    assert np.allclose(h[np.ix_(ho.S2_BASIS, ho.S2_BASIS)], expected)
    assert np.allclose(h[np.ix_(ho.S3_BASIS, ho.S3_BASIS)], expected)


@settings(max_examples=30, deadline=None)
@given(angles)
def test_u_s2_closed_form(theta):
    u = ho.u_s2(theta)
    assert np.abs(expm_hermitian(ho.s2_block(theta), math.pi) - u).max() <= 1e-12
    assert u[0, 0] == -1 and np.all(u[0, 1:] == 0)


def test_u_s2_three_half_pi():
    assert np.allclose(ho.u_s2(3 * math.pi / 2)[1:, 1:], SIGMA_X, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(angles, st.floats(0, 10))
def test_u2_no_leakage_between_subspaces(theta, area):
    u = ho.u2_evolution(theta, area)
    assert unitarity_error(u) <= 1e-10
    blocks = [(0,), ho.S2_BASIS, ho.S3_BASIS, (7,)]
    for i, a in enumerate(blocks):
        for j, b in enumerate(blocks):
            if i != j:
                assert np.abs(u[np.ix_(a, b)]).max() <= 1e-10


def test_u_sz_entries():
    expected = [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]]
    assert np.abs(ho.u_sz() - expected).max() <= 1e-12
    assert np.allclose(ho.u_sz() @ ho.u_sz(), np.eye(4))
    assert np.allclose(ho.u2_gate(3 * math.pi / 2), ho.u_sz(), atol=1e-15)


@pytest.mark.parametrize("envelope", ["flat_top", "raised_cosine"])
def test_u_sz_from_three_qubit_integration(envelope):
    pulse = ho.TwoQubitPulse(3 * math.pi / 2)
    u = time_ordered_evolve(ho.h2_hamiltonian(pulse, envelope), 0.0, 1.0, 10_000)
    assert np.linalg.norm(u - ho.u2_evolution(pulse.theta, pulse.area)) <= 1e-8
    assert np.abs(ho.ground_aux_restriction(u, tol=1e-8) - ho.u_sz()).max() <= 1e-8


def test_twisted_integration_converges_to_u_sz():
    h0 = math.pi * ho.build_h2(math.cos(3 * math.pi / 4), math.sin(3 * math.pi / 4))
    p = np.diag([0, 1, 0, 0, 1, 0, 0, 0])
    errs = [np.linalg.norm(time_ordered_evolve(frame_twisted(h0, p), 0, 1, n) - ho.u2_evolution(3 * math.pi / 2)) for n in (500, 1000)]
    assert errs[0] / errs[1] >= 3.5


def test_ground_aux_restriction_rejects_leaky_gate():
    with pytest.raises(AuxiliaryNotGround):
        ho.ground_aux_restriction(ho.u2_evolution(1.0, 1.0))


# --- compositions -------------------------------------------------------------

def test_compositions_match_canonical():
    swap = ho.ground_aux_restriction(ho.compose_swap())
    assert ho.phase_aligned_distance(swap, ho.CANONICAL["SWAP"]) <= 1e-9
    assert np.abs(ho.ground_aux_restriction(ho.compose_cz()) - ho.CANONICAL["CZ"]).max() <= 1e-9
    assert np.abs(ho.ground_aux_restriction(ho.compose_cnot()) - ho.CANONICAL["CNOT"]).max() <= 1e-9


def test_swap_moves_state():
    a, b = 0.6, 0.8j
    s = StateVector.product([("M", [a, b]), ("D", [1, 0]), ("B", [1, 0])])
    out = ho.apply_with_ground_aux(ho.compose_swap(), s)
    expected = StateVector.product([("M", [1, 0]), ("D", [a, b]), ("B", [1, 0])])
    assert state_fidelity(out, expected) == pytest.approx(1.0, abs=1e-14)
    zero = StateVector.basis(["M", "D", "B"], [0, 0, 0])
    assert np.allclose(ho.apply_with_ground_aux(ho.compose_swap(), zero).amplitudes, zero.amplitudes)


def test_cnot_truth_table():
    s = StateVector.basis(["M", "D", "B"], [1, 0, 0])
    out = ho.apply_with_ground_aux(ho.compose_cnot(), s)
    assert state_fidelity(out, StateVector.basis(["M", "D", "B"], [1, 1, 0])) == pytest.approx(1.0)


def test_cnot_is_hadamard_conjugated_cz():
    h_d = kron(np.eye(2), ho.hadamard())
    assert np.allclose(h_d @ ho.CANONICAL["CZ"] @ h_d, ho.ground_aux_restriction(ho.compose_cnot()))


def test_apply_with_excited_aux():
    s = StateVector.basis(["M", "D", "B"], [0, 0, 1])
    with pytest.raises(AuxiliaryNotGround):
        ho.apply_with_ground_aux(ho.compose_cz(), s)
    with pytest.raises(DimensionMismatch):
        ho.apply_with_ground_aux(ho.compose_cz(), StateVector.basis(["M", "D"], [0, 0]))


def test_ten_step_cnot_circuit():
    steps = ho.cnot_circuit("M", "D", "B")
    assert sum(kind != "init" for kind, _ in steps) == 6
    u = ho.circuit_unitary(steps, ["M", "D", "B"])
    assert np.abs(ho.ground_aux_restriction(u) - ho.CANONICAL["CNOT"]).max() <= 1e-12
