import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holosurf import recovery as rc
from holosurf.errors import DegenerateCoefficients, DimensionMismatch
from holosurf.fidelity import f_h_usz, f_sigma_x
from holosurf.holonomy import u2_gate
from holosurf.mat_core import StateVector, kron, state_fidelity
from holosurf.noise import usz_with_area_error

LABELS = ("M", "D", "A")


def random_coeffs(rng):
    a = rng.normal(size=4) + 1j * rng.normal(size=4)
    return a / np.linalg.norm(a)


def usz_input(a):
    amp = np.zeros(8, dtype=complex)
    amp[0::2] = a
    return StateVector(amp, LABELS)


def same_up_to_phase(u, v, tol):
    return abs(abs(np.vdot(u, v)) - np.linalg.norm(u) * np.linalg.norm(v)) <= tol


# --- measurement --------------------------------------------------------------

def test_zero_delta_measures_ground():
    a = random_coeffs(np.random.default_rng(0))
    out = rc.measure_auxiliary(usz_with_area_error(0.0, usz_input(a)), "Z", seed=1)
    assert out.result == 1 and out.probability == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "a,weight",
    [
        ([0, 1, 0, 0], 0.5),
        ([0, 0, 0, 1], 1.0),
        ([0.5, 0.5, 0.5, 0.5], 0.25),
        ([0, math.sqrt(0.5), math.sqrt(0.5), 0], 0.0),
    ],
)
def test_excited_probability(a, weight):
    # P(|1>) = sin^2(delta) |psi_1|^2 with |psi_1|^2 = |a01 - a10|^2 / 2 + |a11|^2.
    final = usz_with_area_error(0.1, usz_input(np.array(a, dtype=complex)))
    plus, minus = rc.outcome_distribution(final, "Z")
    assert minus.probability == pytest.approx(math.sin(0.1) ** 2 * weight, abs=1e-14)
    assert plus.probability + minus.probability == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["Z", "X"]), st.floats(0, 0.5))
def test_outcomes_normalized_and_idempotent(seed, basis, delta):
    final = usz_with_area_error(delta, usz_input(random_coeffs(np.random.default_rng(seed))))
    outs = rc.outcome_distribution(final, basis)
    assert sum(o.probability for o in outs) == pytest.approx(1.0, abs=1e-12)
    for o in outs:
        assert 0.0 <= o.probability <= 1.0
        if o.post_state is None:
            continue
        assert np.linalg.norm(o.post_state.amplitudes) == pytest.approx(1.0, abs=1e-12)
        again = {x.result: x.probability for x in rc.outcome_distribution(o.post_state, basis)}
        assert again[o.result] == pytest.approx(1.0, abs=1e-12)


def test_x_basis_post_states():
    a = random_coeffs(np.random.default_rng(3))
    final = usz_with_area_error(0.1, usz_input(a)).amplitudes.reshape(4, 2)
    psi0, excited = final[:, 0], final[:, 1]
    for o in rc.outcome_distribution(usz_with_area_error(0.1, usz_input(a)), "X"):
        md = o.post_state.amplitudes.reshape(4, 2)
        sign = o.result
        expected = psi0 + sign * excited
        assert same_up_to_phase(md[:, 0], expected, 1e-12)
        assert np.allclose(md[:, 1], sign * md[:, 0], atol=1e-12)


def test_measure_is_seeded():
    final = usz_with_area_error(0.4, usz_input(np.array([0, 0, 0, 1], dtype=complex)))
    a = [rc.measure_auxiliary(final, "Z", seed=s).result for s in range(200)]
    b = [rc.measure_auxiliary(final, "Z", seed=s).result for s in range(200)]
    assert a == b and -1 in a


def test_bad_basis():
    with pytest.raises(ValueError):
        rc.outcome_distribution(usz_input(np.array([1, 0, 0, 0], dtype=complex)), "Y")


@pytest.mark.parametrize("basis,result", [("Z", 1), ("Z", -1), ("X", 1), ("X", -1)])
def test_reset_returns_ground(basis, result):
    flip = {("Z", 1): [1, 0], ("Z", -1): [0, 1], ("X", 1): [1, 1], ("X", -1): [1, -1]}[(basis, result)]
    prepared = StateVector.normalized(kron(np.array([0.6, 0, 0, 0.8]), np.array(flip, dtype=complex)), LABELS)
    outcome = rc.MeasurementOutcome(basis, result, 1.0, prepared)
    out = rc.reset_auxiliary(outcome)
    target = kron(np.array([0.6, 0, 0, 0.8]), np.array([1, 0]))
    assert state_fidelity(out.amplitudes, target) == pytest.approx(1.0, abs=1e-12)


# --- branches -----------------------------------------------------------------

def test_error_branch_matches_evolution():
    a = random_coeffs(np.random.default_rng(4))
    final = usz_with_area_error(0.2, usz_input(a)).amplitudes.reshape(4, 2)
    assert same_up_to_phase(final[:, 1], rc.error_branch(a), 1e-12)


def test_branch_free_of_delta():
    a = random_coeffs(np.random.default_rng(5))
    branches = [usz_with_area_error(d, usz_input(a)).amplitudes.reshape(4, 2)[:, 1] for d in (0.05, 0.2, 0.4)]
    normed = [b / np.linalg.norm(b) for b in branches]
    for b in normed[1:]:
        assert np.allclose(b, normed[0], atol=1e-12)


def test_coefficient_validation():
    with pytest.raises(DimensionMismatch):
        rc.error_branch([1, 0, 0])
    with pytest.raises(ValueError):
        rc.error_branch([1, 1, 0, 0])
    with pytest.raises(DegenerateCoefficients):
        rc.error_branch([0, math.sqrt(0.5), math.sqrt(0.5), 0])


# --- population stage ---------------------------------------------------------

@pytest.mark.parametrize("convention,theta1", [("physical", 3 * math.pi / 4), ("printed", 5 * math.pi / 4)])
def test_population_plan_structure(convention, theta1):
    plan = rc.plan_population_recovery(random_coeffs(np.random.default_rng(6)), convention)
    assert [s.kind for s in plan.steps] == ["U2", "U1", "U2", "CNOT", "U2"]
    assert plan.steps[0].params["theta"] == theta1
    assert len({s.stage for s in plan.steps}) == 5


def test_printed_intermediate_state():
    a = random_coeffs(np.random.default_rng(7))
    s = a[1] + a[2]
    norm = math.sqrt(abs(s) ** 2 + 2 * abs(a[3]) ** 2)
    plan = rc.plan_population_recovery(a, "printed")
    mid = plan.steps[0].matrix() @ rc.printed_error_branch(a)
    assert np.allclose(mid, [s / norm, 0, math.sqrt(2) * a[3] / norm, 0], atol=1e-12)


def test_physical_intermediate_state():
    a = random_coeffs(np.random.default_rng(8))
    s = a[1] - a[2]
    norm = math.sqrt(abs(s) ** 2 + 2 * abs(a[3]) ** 2)
    mid = rc.plan_population_recovery(a).steps[0].matrix() @ rc.error_branch(a)
    assert same_up_to_phase(mid, [s / norm, 0, math.sqrt(2) * a[3] / norm, 0], 1e-12)
    assert abs(mid[1]) <= 1e-12 and abs(mid[3]) <= 1e-12


@pytest.mark.parametrize("convention", rc.CONVENTIONS)
@pytest.mark.parametrize("seed", range(10))
def test_population_output(convention, seed):
    a = random_coeffs(np.random.default_rng(100 + seed))
    branch = rc.error_branch(a) if convention == "physical" else rc.printed_error_branch(a)
    out = rc.plan_population_recovery(a, convention).execute(branch)
    target = np.abs(a)[[0, 2, 1, 3]] * np.array([1, 1, 1, -1])
    assert same_up_to_phase(out, target, 1e-9)


@pytest.mark.parametrize(
    "a",
    [
        [0.5, 0.5, 0.5, -0.5],
        [math.sqrt(0.5), 0.5, -0.5, 0],
        [math.sqrt(0.5), 0.5, 0, 0.5],
    ],
    ids=["a01_eq_a10", "a11_zero", "a10_zero"],
)
def test_population_degenerate(a):
    with pytest.raises(DegenerateCoefficients):
        rc.plan_population_recovery(a)


def test_plans_are_unitary():
    plan = rc.plan_population_recovery(random_coeffs(np.random.default_rng(9)))
    u = plan.unitary()
    assert np.allclose(u @ u.conj().T, np.eye(4), atol=1e-12)
    for step in plan.steps:
        m = step.matrix()
        assert np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=1e-12)
        if step.kind == "U2":
            assert np.allclose(m, u2_gate(step.params["theta"]))


def test_plan_serializes():
    plan = rc.plan_population_recovery(random_coeffs(np.random.default_rng(10)))
    d = json.loads(json.dumps(plan.as_dict()))
    assert d["stage"] == "population" and len(d["steps"]) == 5


def test_step_validation():
    with pytest.raises(ValueError):
        rc.RecoveryStep("T", ("M",))
    with pytest.raises(ValueError):
        rc.RecoveryStep("RZ", ("M",), {"phi": math.inf})


# --- phase stage --------------------------------------------------------------

def test_zero_phases_give_identity():
    a = np.array([0.1, 0.3, 0.5, 0.8])
    a /= np.linalg.norm(a)
    ph = rc.phase_parameters(a)
    assert all(v == 0 for v in ph.values())
    assert np.allclose(rc.plan_phase_recovery(a).unitary(), np.eye(4), atol=1e-15)


@settings(max_examples=100)
@given(st.lists(st.floats(-math.pi + 1e-3, math.pi - 1e-3), min_size=4, max_size=4))
def test_phase_parameter_relations(phis):
    a = np.exp(1j * np.array(phis)) / 2
    ph = rc.phase_parameters(a)
    p00, p01, p10, p11 = phis
    assert 4 * ph["phi0"] == pytest.approx(p00 + p01 + p10 + p11, abs=1e-12)
    assert ph["m"] == pytest.approx((p11 + p01) / 2 - ph["phi0"], abs=1e-12)
    assert ph["n"] == pytest.approx((p11 - p01) / 2, abs=1e-12)
    assert ph["p"] == pytest.approx(p01 + p10 - 2 * ph["phi0"], abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_phase_recovery_output(seed):
    a = random_coeffs(np.random.default_rng(200 + seed))
    start = np.abs(a)[[0, 2, 1, 3]] * np.array([1, 1, 1, -1])
    out = rc.plan_phase_recovery(a).execute(start)
    assert same_up_to_phase(out, rc.ideal_output(a), 1e-9)


def test_phase_degenerate():
    with pytest.raises(DegenerateCoefficients):
        rc.plan_phase_recovery([0, 0.6, 0.8, 0])


# --- full recovery ------------------------------------------------------------

@pytest.mark.parametrize("convention", rc.CONVENTIONS)
def test_recovery_fidelity_random(convention):
    rng = np.random.default_rng(11)
    fids = [rc.recovery_fidelity(random_coeffs(rng), convention) for _ in range(1000)]
    assert min(fids) >= 1 - 1e-9


def test_recovery_from_evolved_branch_is_delta_independent():
    a = random_coeffs(np.random.default_rng(12))
    target = kron(rc.ideal_output(a), np.array([1, 0]))
    for delta in (0.05, 0.3):
        final = usz_with_area_error(delta, usz_input(a))
        _, minus = rc.outcome_distribution(final, "Z")
        out = rc.full_error_branch_recovery(minus.post_state, a)
        assert state_fidelity(out.amplitudes, target) == pytest.approx(1.0, abs=1e-9)


def test_full_recovery_degenerate():
    with pytest.raises(DegenerateCoefficients):
        rc.recovery_fidelity([0.6, 0.48, 0.64, 0])


# --- sigma_x reset ------------------------------------------------------------

def test_sigma_x_zero_delta():
    a = random_coeffs(np.random.default_rng(13))
    assert rc.sigma_x_reset_fidelity(0.0, a) == pytest.approx(1.0, abs=1e-12)


def test_sigma_x_dark_state():
    a = [0, math.sqrt(0.5), math.sqrt(0.5), 0]
    f = rc.sigma_x_reset_fidelity(0.1, a)
    assert f == pytest.approx(1.0, abs=1e-12)
    assert f > f_h_usz(0.1) and f >= f_sigma_x(0.1)


def test_sigma_x_both_outcomes_equal_for_bright_state():
    fp, fm = rc.sigma_x_outcome_fidelities(0.1, [0, 0, 0, 1])
    assert fp == pytest.approx(fm, abs=1e-12)
    assert fp == pytest.approx(math.cos(0.1), abs=1e-4)
