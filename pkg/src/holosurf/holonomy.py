"""Closed-form holonomic gates built from XY couplings to auxiliary qubits.

Single-qubit gates use an auxiliary qubit 1 (most significant) coupled to a
target qubit 2. Two-qubit gates act on ``(M, D, A)`` where ``A`` is the
auxiliary coupled to both ``M`` and ``D``. All Hamiltonians are dimensionless
and the gates depend on the pulse envelope only through its area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import AuxiliaryNotGround, DegenerateTheta, DimensionMismatch
from .mat_core import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    StateVector,
    TimeDependentHamiltonian,
    apply_gate,
    embed,
    kron,
)

DEGENERACY_TOL = 1e-9
AUX_TOL = 1e-12

PROJ0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ1 = np.array([[0, 0], [0, 1]], dtype=complex)


# --- pulse envelopes -------------------------------------------------------
# Each maps s in [0, 1] to a non-negative shape with unit integral.

def _flat_top(s):
    return np.ones_like(np.asarray(s, dtype=float))


def _raised_cosine(s):
    return 1.0 - np.cos(2.0 * np.pi * np.asarray(s, dtype=float))


def _half_sine(s):
    return 0.5 * np.pi * np.sin(np.pi * np.asarray(s, dtype=float))


ENVELOPES: dict = {
    "flat_top": _flat_top,
    "raised_cosine": _raised_cosine,
    "half_sine": _half_sine,
}


def envelope_rate(area: float, envelope: str = "flat_top", duration: float = 1.0) -> Callable:
    """Coupling strength ``J(t)`` on ``[0, duration]`` whose integral is ``area``."""
    try:
        shape = ENVELOPES[envelope]
    except KeyError:
        raise ValueError(f"unknown envelope {envelope!r}; choose from {sorted(ENVELOPES)}") from None
    return lambda t: area * shape(np.asarray(t, dtype=float) / duration) / duration


def _scaled_hamiltonian(h: np.ndarray, area: float, envelope: str, duration: float):
    rate = envelope_rate(area, envelope, duration)
    return TimeDependentHamiltonian(
        h.shape[0],
        lambda t: float(rate(t)) * h,
        lambda ts: rate(ts)[:, None, None] * h,
    )


# --- single-qubit construction --------------------------------------------

@dataclass(frozen=True)
class SingleQubitPulse:
    """Control parameters of one single-qubit holonomic cycle.

    Attributes:
        theta: Mixing angle; ``J1 = J0 sin(theta)``, ``J12 = J0 cos(theta)``.
        beta: Drive phase on the auxiliary.
        area: Accumulated ``a_t``, the integral of ``J0``.
    """

    theta: float
    beta: float
    area: float = 0.0

    def __post_init__(self):
        if not self.area >= 0:
            raise ValueError("pulse area must be non-negative")


@dataclass(frozen=True)
class TwoQubitPulse:
    """Control parameters of the two-qubit holonomic cycle.

    Attributes:
        theta: Mixing angle; ``J23 = Omega sin(theta/2)``, ``J13 = Omega cos(theta/2)``.
        area: Integral of ``Omega``; ``pi`` closes the cycle.
    """

    theta: float
    area: float = math.pi

    def __post_init__(self):
        if not self.area >= 0:
            raise ValueError("pulse area must be non-negative")


@dataclass(frozen=True, eq=False)
class SvdTriple:
    """Singular value decomposition ``T = v0 @ d @ v1_dagger``."""

    v0: np.ndarray
    d: np.ndarray
    v1_dagger: np.ndarray

    @property
    def v1(self) -> np.ndarray:
        return self.v1_dagger.conj().T

    def reconstruct(self) -> np.ndarray:
        return self.v0 @ self.d @ self.v1_dagger


def is_degenerate_theta(theta: float, tol: float = DEGENERACY_TOL) -> bool:
    """True when ``theta`` is within ``tol`` of ``(1 + 2n) pi / 2``."""
    r = math.fmod(theta - math.pi / 2, math.pi)
    r = abs(r)
    return min(r, math.pi - r) < tol


def t_block(theta: float, beta: float) -> np.ndarray:
    """Off-diagonal block ``T`` of the single-qubit Hamiltonian at ``J0 = 1``."""
    h = 0.5 * math.sin(theta) * np.exp(-1j * beta)
    return np.array([[h, 0], [math.cos(theta), h]], dtype=complex)


def build_h1(pulse: SingleQubitPulse, j0: float = 1.0) -> np.ndarray:
    """Auxiliary-target Hamiltonian on (auxiliary, target) at coupling scale ``j0``.

    ``H = J1/2 (cos b X1 + sin b Y1) + J12/2 (X1 X2 + Y1 Y2)`` with
    ``J1 = j0 sin(theta)`` and ``J12 = j0 cos(theta)``.
    """
    j1 = j0 * math.sin(pulse.theta)
    j12 = j0 * math.cos(pulse.theta)
    eye = np.eye(2)
    drive = math.cos(pulse.beta) * SIGMA_X + math.sin(pulse.beta) * SIGMA_Y
    return 0.5 * j1 * kron(drive, eye) + 0.5 * j12 * (
        kron(SIGMA_X, SIGMA_X) + kron(SIGMA_Y, SIGMA_Y)
    )


def svd_T(theta: float, beta: float) -> SvdTriple:
    """Analytic singular value decomposition of :func:`t_block`.

    ``v0`` is Hermitian and unitary. ``v1_dagger`` carries a phase
    ``exp(-i beta)`` relative to its Hermitian representative so that the
    product reconstructs ``T`` exactly.
    """
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    ph = np.exp(1j * beta)
    v0 = np.array([[s, c / ph], [ph * c, -s]], dtype=complex)
    d = np.diag([c * c, s * s]).astype(complex)
    v1_dagger = np.array([[c, s / ph], [ph * s, -c]], dtype=complex) / ph
    return SvdTriple(v0, d, v1_dagger)


def u1_closed_form(pulse: SingleQubitPulse) -> np.ndarray:
    """Evolution of :func:`build_h1` after accumulated area ``pulse.area``."""
    c2, s2 = math.cos(pulse.theta / 2) ** 2, math.sin(pulse.theta / 2) ** 2
    return u1_from_angles(pulse.theta, pulse.beta, pulse.area * np.array([c2, s2]))


def u1_from_angles(theta: float, beta: float, angles: np.ndarray) -> np.ndarray:
    """Assemble the 4x4 block evolution with ``a_t D`` replaced by ``diag(angles)``.

    ``angles = a (cos^2(theta/2), sin^2(theta/2))`` is the evolution at area
    ``a``; other values address the two singular-value channels separately.
    """
    svd = svd_T(theta, beta)
    arg = np.asarray(angles, dtype=float)
    cos_d, sin_d = np.diag(np.cos(arg)), np.diag(np.sin(arg))
    v0, v1 = svd.v0, svd.v1
    return np.block(
        [
            [v0 @ cos_d @ v0.conj().T, -1j * v0 @ sin_d @ v1.conj().T],
            [-1j * v1 @ sin_d @ v0.conj().T, v1 @ cos_d @ v1.conj().T],
        ]
    )


def h1_hamiltonian(
    pulse: SingleQubitPulse, envelope: str = "flat_top", duration: float = 1.0
) -> TimeDependentHamiltonian:
    """Time-dependent single-qubit Hamiltonian whose ``J0`` integrates to ``pulse.area``."""
    return _scaled_hamiltonian(build_h1(pulse, 1.0), pulse.area, envelope, duration)


def _subspace_index(subspace: Union[int, str]) -> int:
    if subspace in (0, "L0"):
        return 0
    if subspace in (1, "L1"):
        return 1
    raise ValueError(f"subspace must be L0 or L1, got {subspace!r}")


def single_qubit_gate(theta: float, beta: float, subspace: Union[int, str] = 0) -> np.ndarray:
    """Gate ``V(L_k)`` applied to the target when the auxiliary is in ``|k>``.

    ``V(L_k) = (-1)^k cos(theta) Z - sin(theta) (cos(beta) X + sin(beta) Y)``.

    Raises:
        DegenerateTheta: if ``theta`` is within 1e-9 of ``(1 + 2n) pi / 2``.
    """
    if is_degenerate_theta(theta):
        raise DegenerateTheta(f"theta={theta!r} admits no cyclic evolution")
    k = _subspace_index(subspace)
    return (-1) ** k * math.cos(theta) * SIGMA_Z - math.sin(theta) * (
        math.cos(beta) * SIGMA_X + math.sin(beta) * SIGMA_Y
    )


def cyclic_block_form(theta: float, beta: float) -> np.ndarray:
    """Ideal single-qubit evolution at the cyclic point: ``|0><0| V(L0) + |1><1| V(L1)``."""
    return kron(PROJ0, single_qubit_gate(theta, beta, 0)) + kron(
        PROJ1, single_qubit_gate(theta, beta, 1)
    )


def hadamard() -> np.ndarray:
    return single_qubit_gate(math.pi / 4, math.pi, 0)


def rotation_x(alpha: float, base_theta: float | None = None) -> np.ndarray:
    """``exp(-i alpha X)`` from two cycles ``V(base + alpha, pi/2) V(base, pi/2)``.

    The default base is ``pi/4``. If ``pi/4 + alpha`` hits the excluded set the
    base ``-pi/4`` is used instead, which yields the same rotation.

    Raises:
        DegenerateTheta: if an explicitly given base leads to an excluded angle.
    """
    if base_theta is None:
        base_theta = math.pi / 4
        if is_degenerate_theta(base_theta + alpha):
            base_theta = -math.pi / 4
    second = single_qubit_gate(base_theta + alpha, math.pi / 2, 0)
    first = single_qubit_gate(base_theta, math.pi / 2, 0)
    return second @ first


def rotation_z(alpha: float) -> np.ndarray:
    """``exp(-i alpha Z)`` as ``H Rx(alpha) H``."""
    h = hadamard()
    return h @ rotation_x(alpha) @ h


@dataclass(frozen=True)
class CyclicPoint:
    """Best commensurate approximation to the single-qubit cyclic condition.

    Attributes:
        m: Odd-multiple index; ``area cos^2(theta/2) ~ (2m + 1) pi``.
        n: Even-multiple index; ``area sin^2(theta/2) ~ 2 n pi``.
        area: Chosen pulse area (least-squares fit of both conditions).
        leakage: Largest entry of the off-diagonal block of ``U1(area)``.
    """

    m: int
    n: int
    area: float
    leakage: float


def find_cyclic_area(theta: float, max_area: float) -> CyclicPoint:
    """Search ``area <= max_area`` for the smallest residual leakage.

    Raises:
        DegenerateTheta: for excluded ``theta``.
        ValueError: if no candidate fits inside the budget.
    """
    if is_degenerate_theta(theta):
        raise DegenerateTheta(f"theta={theta!r} admits no cyclic evolution")
    c2, s2 = math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2
    if c2 < DEGENERACY_TOL:
        # cos(a D) keeps a +1 entry for every area, so no cycle closes.
        raise DegenerateTheta(f"theta={theta!r} admits no cyclic evolution")
    norm = c2 * c2 + s2 * s2
    best = None
    m = 0
    while math.pi * (2 * m + 1) * c2 / norm <= max_area:
        k = 2 * m + 1
        target = k * math.pi / c2 * s2 / (2 * math.pi)
        for n in {math.floor(target), math.ceil(target)}:
            if n < 0:
                continue
            area = math.pi * (k * c2 + 2 * n * s2) / norm
            if area > max_area:
                continue
            leak = max(abs(math.sin(area * c2)), abs(math.sin(area * s2)))
            if best is None or leak < best.leakage - 1e-15:
                best = CyclicPoint(m, n, area, leak)
        m += 1
    if best is None:
        raise ValueError(f"no cyclic candidate with area <= {max_area}")
    return best


# --- two-qubit construction -----------------------------------------------

def _xy(n: int, i: int, j: int) -> np.ndarray:
    """``(X_i X_j + Y_i Y_j) / 2`` on an ``n``-qubit register."""
    ops = []
    for p in (SIGMA_X, SIGMA_Y):
        factors = [np.eye(2)] * n
        factors[i], factors[j] = p, p
        ops.append(kron(*factors))
    return 0.5 * (ops[0] + ops[1])


def build_h2(j13: float, j23: float) -> np.ndarray:
    """XY couplings of ``M`` (qubit 1) and ``D`` (qubit 2) to the auxiliary ``A`` (qubit 3)."""
    return j13 * _xy(3, 0, 2) + j23 * _xy(3, 1, 2)


def h2_hamiltonian(
    pulse: TwoQubitPulse, envelope: str = "flat_top", duration: float = 1.0
) -> TimeDependentHamiltonian:
    """Time-dependent two-qubit Hamiltonian with ``Omega`` integrating to ``pulse.area``."""
    h = build_h2(math.cos(pulse.theta / 2), math.sin(pulse.theta / 2))
    return _scaled_hamiltonian(h, pulse.area, envelope, duration)


# Index triples of the two three-dimensional invariant subspaces of build_h2.
S2_BASIS = (0b001, 0b010, 0b100)
S3_BASIS = (0b110, 0b101, 0b011)


def s2_block(theta: float) -> np.ndarray:
    """Restriction of :func:`build_h2` at unit ``Omega`` to ``S2`` (and ``S3``)."""
    s, c = math.sin(theta / 2), math.cos(theta / 2)
    return np.array([[0, s, c], [s, 0, 0], [c, 0, 0]], dtype=complex)


def s2_evolution(theta: float, area: float) -> np.ndarray:
    """``exp(-i area B)`` for ``B = s2_block(theta)``; ``B`` has spectrum ``{0, +1, -1}``."""
    b = s2_block(theta)
    return np.eye(3) - 1j * math.sin(area) * b + (math.cos(area) - 1.0) * (b @ b)


def u_s2(theta: float) -> np.ndarray:
    """Cyclic ``S2`` evolution (area ``pi``) in the basis ``(|001>; |010>, |100>)``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[-1, 0, 0], [0, c, -s], [0, -s, -c]], dtype=complex)


def u2_evolution(theta: float, area: float = math.pi) -> np.ndarray:
    """Full 8x8 evolution of :func:`build_h2` on ``(M, D, A)`` at pulse area ``area``."""
    blk = s2_evolution(theta, area)
    u = np.zeros((8, 8), dtype=complex)
    u[0, 0] = u[7, 7] = 1.0
    for basis in (S2_BASIS, S3_BASIS):
        u[np.ix_(basis, basis)] = blk
    return u


def u2_gate(theta: float) -> np.ndarray:
    """Two-qubit gate ``I_00 + U_S2q + (-I_11)`` on ``(M, D)`` with the auxiliary in ``|0>``."""
    q = u_s2(theta)[1:, 1:]
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = 1.0
    u[1:3, 1:3] = q
    u[3, 3] = -1.0
    return u


def u_sz() -> np.ndarray:
    """``|00> -> |00>``, ``|01> <-> |10>``, ``|11> -> -|11>`` (``CZ`` times ``SWAP``)."""
    return np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], dtype=complex
    )


def ground_aux_restriction(u: np.ndarray, aux_index: int = 2, n: int = 3, tol: float = AUX_TOL) -> np.ndarray:
    """Restrict ``u`` to the subspace with qubit ``aux_index`` in ``|0>``.

    Raises:
        AuxiliaryNotGround: if ``u`` moves more than ``tol`` of amplitude out of that subspace.
    """
    idx = [i for i in range(2**n) if not (i >> (n - 1 - aux_index)) & 1]
    rest = [i for i in range(2**n) if i not in idx]
    leak = np.max(np.abs(u[np.ix_(rest, idx)]))
    if leak > tol:
        raise AuxiliaryNotGround(f"auxiliary leaves |0> (leak {leak:.2e})")
    return u[np.ix_(idx, idx)]


REGISTER_MDB = ("M", "D", "B")


def compose_swap() -> np.ndarray:
    """``U_sz(B,D) U_sz(D,M) U_sz(M,B)`` on the register ``(M, D, B)``."""
    usz = u_sz()
    return (
        embed(usz, ("B", "D"), REGISTER_MDB)
        @ embed(usz, ("D", "M"), REGISTER_MDB)
        @ embed(usz, ("M", "B"), REGISTER_MDB)
    )


def compose_cz() -> np.ndarray:
    """``U_sz(M,D)`` after the three-step SWAP, on ``(M, D, B)``."""
    return embed(u_sz(), ("M", "D"), REGISTER_MDB) @ compose_swap()


def compose_cnot() -> np.ndarray:
    """``H_D CZ H_D`` on ``(M, D, B)``; ``M`` controls, ``D`` is the target."""
    h_d = embed(hadamard(), ("D",), REGISTER_MDB)
    return h_d @ compose_cz() @ h_d


def apply_with_ground_aux(gate: np.ndarray, state: StateVector, aux="B") -> StateVector:
    """Apply an 8x8 ``(M, D, B)`` gate to a state whose auxiliary must be ``|0>``.

    Raises:
        AuxiliaryNotGround: if the auxiliary carries amplitude above 1e-12.
        DimensionMismatch: if the register is not three qubits.
    """
    if state.num_qubits != 3:
        raise DimensionMismatch("expected a three-qubit register")
    t = np.moveaxis(state.tensor(), state.index(aux), 0)
    if np.max(np.abs(t[1])) > AUX_TOL:
        raise AuxiliaryNotGround(f"auxiliary {aux!r} is excited")
    return apply_gate(state, gate, [lab for lab in state.labels if lab != aux] + [aux])


CANONICAL = {
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}


def phase_aligned_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Frobenius distance after removing the best global phase."""
    ov = np.vdot(v, u)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(u - ph * v))


def cnot_circuit(control, target, helper) -> list:
    """Ten-step holonomic CNOT as ``(kind, qubits)`` steps.

    ``init`` steps prepare the implicit auxiliary of the following ``U_sz``.
    """
    return [
        ("H", (target,)),
        ("init", (control, helper)),
        ("U_sz", (control, helper)),
        ("init", (target, control)),
        ("U_sz", (target, control)),
        ("init", (helper, target)),
        ("U_sz", (helper, target)),
        ("init", (control, target)),
        ("U_sz", (control, target)),
        ("H", (target,)),
    ]


def circuit_unitary(steps: Sequence, labels: Sequence) -> np.ndarray:
    """Dense unitary of a step list (``init`` steps act as identity)."""
    gates = {"H": hadamard(), "U_sz": u_sz()}
    u = np.eye(2 ** len(labels), dtype=complex)
    for kind, qubits in steps:
        if kind == "init":
            continue
        u = embed(gates[kind], qubits, labels) @ u
    return u
