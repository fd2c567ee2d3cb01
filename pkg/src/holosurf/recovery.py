"""Auxiliary measurement and recovery of the auxiliary-excited ``U_sz`` branch."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateCoefficients, DegenerateTheta, DimensionMismatch
from .holonomy import (
    compose_cnot,
    ground_aux_restriction,
    hadamard,
    rotation_x,
    rotation_z,
    single_qubit_gate,
    u2_gate,
    u_sz,
)
from .mat_core import StateVector, apply_gate, embed, kron, project_qubit, state_fidelity
from .noise import usz_with_area_error

DEGENERACY_TOL = 1e-9
CONVENTIONS = ("physical", "printed")
REGISTER_MD = ("M", "D")
STEP_KINDS = ("U2", "U1", "RZ", "CNOT", "RX")


# --- measurement --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    """Result of measuring one qubit in the ``Z`` or ``X`` basis.

    Attributes:
        basis: ``"Z"`` or ``"X"``.
        result: Eigenvalue ``+1`` (``|0>`` or ``|+>``) or ``-1`` (``|1>`` or ``|->``).
        probability: Born probability of ``result``.
        post_state: Normalized collapsed state, measured qubit left in the eigenstate.
    """

    basis: str
    result: int
    probability: float
    post_state: Optional[StateVector]


def _check_basis(basis: str) -> None:
    if basis not in ("Z", "X"):
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")


def outcome_distribution(state: StateVector, basis: str = "Z", aux="A") -> tuple:
    """Both outcomes of a single-qubit measurement, ``+1`` first."""
    _check_basis(basis)
    rotated = apply_gate(state, hadamard(), [aux]) if basis == "X" else state
    out = []
    for value, result in ((0, 1), (1, -1)):
        prob, post = project_qubit(rotated, aux, value)
        if post is not None and basis == "X":
            post = apply_gate(post, hadamard(), [aux])
        out.append(MeasurementOutcome(basis, result, prob, post))
    return tuple(out)


def measure_auxiliary(state: StateVector, basis: str = "Z", seed=None, aux="A") -> MeasurementOutcome:
    """Sample a Born-rule measurement of ``aux`` and return the collapsed state."""
    plus, minus = outcome_distribution(state, basis, aux)
    rng = np.random.default_rng(seed)
    return plus if rng.random() < plus.probability else minus


def reset_auxiliary(outcome: MeasurementOutcome, aux="A") -> StateVector:
    """Rotate the measured auxiliary back to ``|0>`` with holonomic single-qubit gates.

    ``|+> -> |0>`` uses ``H``; ``|-> -> |0>`` uses ``Rx(pi/2) H`` (``-i X H``);
    ``|1> -> |0>`` uses ``Rx(pi/2)``.
    """
    state = outcome.post_state
    if outcome.basis == "X":
        state = apply_gate(state, hadamard(), [aux])
    if outcome.result == -1:
        state = apply_gate(state, rotation_x(math.pi / 2), [aux])
    return state


# --- coefficients -------------------------------------------------------------

def _coefficients(coeffs: Sequence[complex]) -> np.ndarray:
    a = np.asarray(coeffs, dtype=complex).reshape(-1)
    if a.shape != (4,):
        raise DimensionMismatch("expected four coefficients (a00, a01, a10, a11)")
    norm = np.linalg.norm(a)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"coefficients must be normalized (norm {norm:.12g})")
    return a


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def error_branch(coeffs: Sequence[complex]) -> np.ndarray:
    """Normalized ``(M, D)`` state left when the auxiliary is found in ``|1>``.

    Unnormalized it is ``(a01 - a10)|00> - a11|01> + a11|10>`` (times ``1/sqrt 2``).
    """
    a00, a01, a10, a11 = _coefficients(coeffs)
    v = np.array([a01 - a10, -a11, a11, 0.0], dtype=complex)
    return _normalize_branch(v)


def printed_error_branch(coeffs: Sequence[complex]) -> np.ndarray:
    """Normalized alternative branch ``(a01 + a10)|00> + a11|01> + a11|10>``."""
    a00, a01, a10, a11 = _coefficients(coeffs)
    return _normalize_branch(np.array([a01 + a10, a11, a11, 0.0], dtype=complex))


def _normalize_branch(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < DEGENERACY_TOL:
        raise DegenerateCoefficients("the auxiliary-excited branch vanishes for these coefficients")
    return v / n


def ideal_output(coeffs: Sequence[complex]) -> np.ndarray:
    """``U_sz`` applied to the input: ``a00|00> + a10|01> + a01|10> - a11|11>``."""
    return u_sz() @ _coefficients(coeffs)


# --- plans --------------------------------------------------------------------

@dataclass(frozen=True)
class RecoveryStep:
    """One gate of a recovery plan.

    Attributes:
        kind: ``U2`` (two-qubit ``U_2(theta)``), ``U1`` (``Rz(-chi/2) V(-theta, chi)``),
            ``RZ`` (``exp(-i phi Z)``), ``CNOT`` (``M`` controls ``D``) or ``RX``.
        targets: Qubit labels the gate acts on.
        params: Gate parameters.
        stage: Step label within the protocol.
    """

    kind: str
    targets: tuple
    params: dict = field(default_factory=dict)
    stage: str = ""

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise ValueError(f"unknown step kind {self.kind!r}")
        if not all(math.isfinite(v) for v in self.params.values()):
            raise ValueError("step parameters must be finite")

    def matrix(self) -> np.ndarray:
        """Gate matrix built only from holonomic constructions."""
        p = self.params
        if self.kind == "U2":
            return u2_gate(p["theta"])
        if self.kind == "U1":
            try:
                v = single_qubit_gate(-p["theta"], p["chi"], 0)
            except DegenerateTheta as exc:
                raise DegenerateCoefficients(str(exc)) from None
            return rotation_z(-p["chi"] / 2) @ v
        if self.kind == "RZ":
            return rotation_z(p["phi"])
        if self.kind == "RX":
            return rotation_x(p["alpha"])
        return ground_aux_restriction(compose_cnot())

    def as_dict(self) -> dict:
        return {"kind": self.kind, "targets": list(self.targets), "params": dict(self.params), "stage": self.stage}


@dataclass(frozen=True, eq=False)
class RecoveryPlan:
    """Ordered recovery gates on ``(M, D)`` with the coefficients they were built for."""

    stage: str
    steps: tuple
    coefficients: np.ndarray
    convention: str = "physical"

    def unitary(self, labels: Sequence = REGISTER_MD) -> np.ndarray:
        u = np.eye(2 ** len(labels), dtype=complex)
        for step in self.steps:
            u = _embed_step(step, labels) @ u
        return u

    def execute(self, state):
        """Apply the plan to a ``StateVector`` or to a 4-vector over ``(M, D)``."""
        if isinstance(state, StateVector):
            for step in self.steps:
                state = apply_gate(state, step.matrix(), list(step.targets))
            return state
        return self.unitary() @ np.asarray(state, dtype=complex)

    def as_dict(self) -> dict:
        return {
            "stage": self.stage,
            "convention": self.convention,
            "coefficients": [[c.real, c.imag] for c in self.coefficients],
            "steps": [s.as_dict() for s in self.steps],
        }


def _embed_step(step: RecoveryStep, labels: Sequence) -> np.ndarray:
    return embed(step.matrix(), list(step.targets), list(labels))


def plan_population_recovery(coeffs: Sequence[complex], convention: str = "physical") -> RecoveryPlan:
    """Five gates mapping the error branch to ``|a00||00> + |a10||01> + |a01||10> - |a11||11>``.

    ``convention="physical"`` targets :func:`error_branch`, with ``theta_1 = 3 pi / 4``
    and ``s = a01 - a10``; ``convention="printed"`` targets :func:`printed_error_branch`
    with ``theta_1 = 5 pi / 4`` and ``s = a01 + a10``.

    Raises:
        DegenerateCoefficients: if ``|s|``, ``|a11|`` or ``|a10|`` is below 1e-9.
    """
    _check_convention(convention)
    a = _coefficients(coeffs)
    a00, a01, a10, a11 = a
    s01, theta1 = (a01 - a10, 3 * math.pi / 4) if convention == "physical" else (a01 + a10, 5 * math.pi / 4)
    for name, val in (("a01 -/+ a10", s01), ("a11", a11), ("a10", a10)):
        if abs(val) < DEGENERACY_TOL:
            raise DegenerateCoefficients(f"{name} vanishes; the population plan is undefined")
    chi = cmath.phase(a11) - cmath.phase(s01)
    theta = math.acos(min(1.0, abs(a00))) + math.atan(math.sqrt(2) * abs(a11) / abs(s01))
    theta2 = math.pi + math.atan(math.sqrt(abs(a01) ** 2 + abs(a10) ** 2) / abs(a11))
    theta3 = -math.atan(abs(a01) / abs(a10))
    steps = (
        RecoveryStep("U2", REGISTER_MD, {"theta": theta1}, "population-i"),
        RecoveryStep("U1", ("M",), {"theta": theta, "chi": chi}, "population-ii"),
        RecoveryStep("U2", REGISTER_MD, {"theta": theta2}, "population-iii"),
        RecoveryStep("CNOT", REGISTER_MD, {}, "population-iv"),
        RecoveryStep("U2", REGISTER_MD, {"theta": theta3}, "population-v"),
    )
    return RecoveryPlan("population", steps, a, convention)


def phase_parameters(coeffs: Sequence[complex]) -> dict:
    """``m``, ``n``, ``p`` and ``phi0`` from the coefficient phases.

    Raises:
        DegenerateCoefficients: if any ``|a_ij|`` is below 1e-9.
    """
    a = _coefficients(coeffs)
    if np.min(np.abs(a)) < DEGENERACY_TOL:
        raise DegenerateCoefficients("phase recovery needs every coefficient to be nonzero")
    p00, p01, p10, p11 = (cmath.phase(c) for c in a)
    phi0 = (p00 + p01 + p10 + p11) / 4
    return {
        "m": (p11 + p01) / 2 - phi0,
        "n": (p11 - p01) / 2,
        "p": p01 + p10 - 2 * phi0,
        "phi0": phi0,
    }


def plan_phase_recovery(coeffs: Sequence[complex], convention: str = "physical") -> RecoveryPlan:
    """Phase gates ``R1(m) R2(n + p/2)`` then ``CNOT R2'(p/2) CNOT`` on ``(M, D)``.

    Maps ``|a00||00> + |a10||01> + |a01||10> - |a11||11>`` to the ideal ``U_sz``
    output up to the global phase ``exp(-i phi0)``.
    """
    _check_convention(convention)
    ph = phase_parameters(coeffs)
    steps = (
        RecoveryStep("RZ", ("M",), {"phi": ph["m"]}, "phase-i"),
        RecoveryStep("RZ", ("D",), {"phi": ph["n"] + ph["p"] / 2}, "phase-i"),
        RecoveryStep("CNOT", REGISTER_MD, {}, "phase-ii"),
        RecoveryStep("RZ", ("D",), {"phi": ph["p"] / 2}, "phase-ii"),
        RecoveryStep("CNOT", REGISTER_MD, {}, "phase-ii"),
    )
    return RecoveryPlan("phase", steps, _coefficients(coeffs), convention)


def full_error_branch_recovery(
    state_branch: StateVector, coeffs: Sequence[complex], convention: str = "physical", aux="A"
) -> StateVector:
    """Recover the ideal ``U_sz`` output from the branch with the auxiliary in ``|1>``.

    Runs the population and phase plans on ``(M, D)`` and flips the auxiliary
    with ``Rx(pi/2)``. The result equals ``ideal_output(coeffs)`` with ``aux`` in
    ``|0>``, up to a global phase.

    Raises:
        DegenerateCoefficients: propagated from the planners.
    """
    plans = (plan_population_recovery(coeffs, convention), plan_phase_recovery(coeffs, convention))
    state = state_branch
    for plan in plans:
        state = plan.execute(state)
    return apply_gate(state, rotation_x(math.pi / 2), [aux])


def recovery_fidelity(coeffs: Sequence[complex], convention: str = "physical") -> float:
    """End-to-end fidelity of branch recovery, phase-insensitive."""
    branch = error_branch(coeffs) if convention == "physical" else printed_error_branch(coeffs)
    start = StateVector(kron(branch, np.array([0, 1], dtype=complex)), REGISTER_MD + ("A",))
    out = full_error_branch_recovery(start, coeffs, convention)
    target = kron(ideal_output(coeffs), np.array([1, 0], dtype=complex))
    return state_fidelity(out.amplitudes, target)


# --- sigma_x auxiliary reset ------------------------------------------------

def sigma_x_outcome_fidelities(delta: float, coeffs: Sequence[complex]) -> tuple:
    """Fidelity to the ideal output after a ``sigma_x`` auxiliary measurement and reset.

    Returns ``(fidelity_plus, fidelity_minus)`` for the two outcomes.
    """
    a = _coefficients(coeffs)
    amp = np.zeros(8, dtype=complex)
    amp[0::2] = a
    final = usz_with_area_error(delta, StateVector(amp, REGISTER_MD + ("A",)))
    target = kron(ideal_output(a), np.array([1, 0], dtype=complex))
    fids = []
    for outcome in outcome_distribution(final, "X"):
        if outcome.post_state is None:
            fids.append(1.0)
            continue
        fids.append(state_fidelity(reset_auxiliary(outcome).amplitudes, target))
    return tuple(fids)


def sigma_x_reset_fidelity(delta: float, coeffs: Sequence[complex]) -> float:
    """Worse of the two ``sigma_x`` outcome fidelities."""
    return min(sigma_x_outcome_fidelities(delta, coeffs))
