"""Error channels: coherent area errors, stochastic fluctuations, Pauli injection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import AuxiliaryNotGround, DimensionMismatch
from .holonomy import u1_from_angles, u2_evolution
from .mat_core import (
    SIGMA_X,
    SIGMA_Y,
    StateVector,
    TimeDependentHamiltonian,
    kron,
    slice_propagators,
)
from .pauli_frame import PauliString, all_paulis

USZ_THETA = 3 * math.pi / 2
AUX_TOL = 1e-12


# --- coherent area errors ----------------------------------------------------

@dataclass(frozen=True)
class AreaError:
    """Additive offset ``delta`` of a pulse area from its cyclic target."""

    delta: float

    def __post_init__(self):
        if not abs(self.delta) < math.pi / 2:
            raise ValueError("area error must satisfy |delta| < pi/2")


def usz_with_area_error(delta: float, state: StateVector) -> StateVector:
    """Run the ``U_sz`` pulse with area ``pi + delta`` on ``(M, D, A)``.

    The register order of ``state`` must be ``(M, D, A)``; ``A`` must start in ``|0>``.

    Raises:
        AuxiliaryNotGround: if ``A`` carries amplitude.
    """
    if state.num_qubits != 3:
        raise DimensionMismatch("expected a three-qubit (M, D, A) register")
    if np.max(np.abs(state.amplitudes[1::2])) > AUX_TOL:
        raise AuxiliaryNotGround("auxiliary A must start in |0>")
    return StateVector(u2_evolution(USZ_THETA, math.pi + delta) @ state.amplitudes, state.labels)


def usz_error_branches(delta: float, coeffs: Sequence[complex]) -> tuple:
    """Closed-form ``(psi0, psi1)`` with final state ``psi0|0> + i sin(delta) psi1|1>``.

    ``coeffs`` are ``(a00, a01, a10, a11)`` of the ``(M, D)`` input.
    """
    a00, a01, a10, a11 = np.asarray(coeffs, dtype=complex)
    s2, c2 = math.sin(delta / 2) ** 2, math.cos(delta / 2) ** 2
    psi0 = np.array([a00, a01 * s2 + a10 * c2, a10 * s2 + a01 * c2, -a11 * math.cos(delta)])
    psi1 = math.sqrt(0.5) * np.array([a01 - a10, -a11, a11, 0.0])
    return psi0, psi1


def usz_final_state(delta: float, coeffs: Sequence[complex], labels=("M", "D", "A")) -> StateVector:
    """Closed-form three-qubit output of the ``U_sz`` pulse with area error."""
    psi0, psi1 = usz_error_branches(delta, coeffs)
    out = np.zeros(8, dtype=complex)
    out[0::2] = psi0
    out[1::2] = 1j * math.sin(delta) * psi1
    return StateVector(out, labels)


def dynamic_iswap_with_area_error(delta: float) -> np.ndarray:
    """XY-coupling gate at area ``3 pi / 2 + delta``; ``delta = 0`` gives iSWAP."""
    s, c = math.sin(delta), math.cos(delta)
    return np.array(
        [[1, 0, 0, 0], [0, s, 1j * c, 0], [0, 1j * c, s, 0], [0, 0, 0, 1]], dtype=complex
    )


def iswap_hamiltonian() -> np.ndarray:
    """``(X X + Y Y) / 2`` on ``(M, D)`` at unit coupling."""
    return 0.5 * (kron(SIGMA_X, SIGMA_X) + kron(SIGMA_Y, SIGMA_Y))


def single_qubit_with_area_error(delta: float, theta: float, beta: float) -> np.ndarray:
    """Single-qubit evolution with area ``a_tau + delta`` around an ideal cycle.

    The cycle sets ``a_tau cos^2(theta/2) = pi`` and ``a_tau sin^2(theta/2) = 0``
    (mod ``2 pi``); the error shifts the two channels by ``delta cos^2(theta/2)``
    and ``delta sin^2(theta/2)``.
    """
    c2, s2 = math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2
    return u1_from_angles(theta, beta, np.array([math.pi + delta * c2, delta * s2]))


# --- stochastic fluctuations ------------------------------------------------

FLUCTUATION_TERMS = (
    kron(SIGMA_X, np.eye(2)),
    kron(SIGMA_Y, np.eye(2)),
    kron(SIGMA_X, SIGMA_X),
    kron(SIGMA_Y, SIGMA_Y),
)


@dataclass(frozen=True)
class FluctuationSpec:
    """Piecewise-constant stochastic perturbation of a Hamiltonian.

    Attributes:
        amplitude: Relative scale ``epsilon``; samples are uniform in ``[-eps, eps]``
            and then shifted so their drive-weighted cycle average is zero.
        mode: ``"proportional"`` (``dH = delta(t) H``) or ``"generic"`` (weighted
            ``X1``, ``Y1``, ``X1 X2``, ``Y1 Y2`` terms scaled by ``|H(t)|``).
        components: Weights of the four generic terms.
        correlation_time: Duration of each constant noise segment.
        seed: Seed for the noise samples.
    """

    amplitude: float
    mode: str = "proportional"
    components: tuple = (1.0, 1.0, 1.0, 1.0)
    correlation_time: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be non-negative")
        if self.mode not in ("proportional", "generic"):
            raise ValueError(f"unknown fluctuation mode {self.mode!r}")
        if len(self.components) != 4 or not np.all(np.isfinite(self.components)):
            raise ValueError("components must be four finite weights")
        if not self.correlation_time > 0:
            raise ValueError("correlation_time must be positive")


@dataclass(frozen=True, eq=False)
class HolonomyDiagnostics:
    """Geometric and dynamic matrices sampled at slice midpoints.

    Attributes:
        times: Sample times.
        g_matrix: ``G_kl(t) = -i <psi_k(t)| d/dt |psi_l(t)>``, shape ``(n, k, k)``.
        d_matrix: ``D_kl(t) = <psi_k(t)| H~(t) |psi_l(t)>``, shape ``(n, k, k)``.
        noise_integral: Time integral of the perturbation ``dH(t)``.
    """

    times: np.ndarray
    g_matrix: np.ndarray
    d_matrix: np.ndarray
    noise_integral: np.ndarray


def _noise_samples(spec: FluctuationSpec, segments: int) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    width = 1 if spec.mode == "proportional" else 4
    return spec.amplitude * rng.uniform(-1.0, 1.0, size=(segments, width))


def perturbed_slices(
    base: TimeDependentHamiltonian, spec: FluctuationSpec, cycle_time: float, steps: int
) -> tuple:
    """Midpoint times, unperturbed and perturbed slice Hamiltonians, and ``dH``."""
    dt = cycle_time / steps
    mids = (np.arange(steps) + 0.5) * dt
    hs = base.sample_many(mids)
    segment = np.minimum((mids / spec.correlation_time).astype(int), int(cycle_time / spec.correlation_time))
    samples = _noise_samples(spec, int(segment.max()) + 1)[segment]
    # Remove the drive-weighted mean so the perturbation averages to zero over the cycle.
    weight = np.linalg.norm(hs, ord=2, axis=(1, 2))
    if weight.sum() > 0:
        samples = samples - (weight @ samples) / weight.sum()
    if spec.mode == "proportional":
        dh = samples[:, 0, None, None] * hs
    else:
        if base.dim != 4:
            raise DimensionMismatch("generic fluctuations need a two-qubit (4x4) Hamiltonian")
        terms = np.stack(FLUCTUATION_TERMS) * np.asarray(spec.components, dtype=float)[:, None, None]
        dh = weight[:, None, None] * np.einsum("nk,kij->nij", samples, terms)
    return mids, hs, hs + dh, dh, dt


def fluctuating_evolution(
    base: TimeDependentHamiltonian,
    spec: FluctuationSpec,
    cycle_time: float = 1.0,
    steps: int = 1000,
    subspace: Sequence[int] = (0, 1),
) -> tuple:
    """Evolve ``H(t) + dH(t)`` and record ``G`` and ``D`` on a computational subspace.

    Choose ``steps >= 100 * cycle_time * |H|`` so that slice error stays small.

    Returns:
        ``(unitary, HolonomyDiagnostics)``.
    """
    mids, _, h_tilde, dh, dt = perturbed_slices(base, spec, cycle_time, steps)
    # Pade exponentials commute with each slice Hamiltonian to round-off; the
    # eigendecomposition route drifts out of the dark subspace linearly in steps.
    full = expm(-1j * dt * h_tilde)
    half = expm(-0.5j * dt * h_tilde)
    w, v = np.linalg.eigh(h_tilde)
    vh = np.conj(np.swapaxes(v, -1, -2))
    # Symmetric difference quotient of the evolving basis inside one slice.
    h_fd = dt / 4
    deriv = (v * (np.sin(w * h_fd) / h_fd)[:, None, :]) @ vh

    sub = list(subspace)
    g = np.empty((steps, len(sub), len(sub)), dtype=complex)
    d = np.empty_like(g)
    u = np.eye(base.dim, dtype=complex)
    for k in range(steps):
        basis = (half[k] @ u)[:, sub]
        d[k] = basis.conj().T @ h_tilde[k] @ basis
        g[k] = -(basis.conj().T @ deriv[k] @ basis)
        u = full[k] @ u
    diag = HolonomyDiagnostics(mids, g, d, dh.sum(axis=0) * dt)
    return u, diag


def evolve_slices(hs: np.ndarray, dt: float) -> np.ndarray:
    """Ordered product of slice exponentials, latest leftmost."""
    u = np.eye(hs.shape[-1], dtype=complex)
    for s in slice_propagators(hs, dt):
        u = s @ u
    return u


def subspace_infidelity(u_ideal: np.ndarray, u_real: np.ndarray, subspace: Sequence[int] = (0, 1)) -> float:
    """``1 - |Tr(P U_ideal^dagger U_real P)| / dim P`` for a computational subspace."""
    sub = list(subspace)
    ov = np.trace((u_ideal.conj().T @ u_real)[np.ix_(sub, sub)])
    return float(1.0 - abs(ov) / len(sub))


def fluctuation_infidelity(
    base: TimeDependentHamiltonian, spec: FluctuationSpec, cycle_time: float = 1.0, steps: int = 1000
) -> float:
    """Subspace infidelity of the perturbed evolution against the same-grid ideal one."""
    _, hs, h_tilde, _, dt = perturbed_slices(base, spec, cycle_time, steps)
    return subspace_infidelity(evolve_slices(hs, dt), evolve_slices(h_tilde, dt))


def first_order_error(u_ideal: np.ndarray, noise_integral: np.ndarray) -> np.ndarray:
    """Leading error term ``-i U (integral of dH)`` of the expansion ``U (1 - i int dH)``."""
    return -1j * u_ideal @ noise_integral


def pauli_decomposition(op: np.ndarray, tol: float = 1e-12) -> dict:
    """Coefficients ``c_P`` with ``op = sum_P c_P P`` over two-qubit Pauli letters."""
    op = np.asarray(op, dtype=complex)
    n = int(round(math.log2(op.shape[0])))
    out = {}
    for p in all_paulis(range(n)):
        label = p.label_string(range(n))
        c = np.trace(p.to_matrix(range(n)).conj().T @ op) / 2**n
        if abs(c) > tol:
            out[label] = complex(c)
    return out


# --- stochastic Pauli errors -----------------------------------------------

@dataclass(frozen=True)
class PauliNoise:
    """Depolarizing-style two-qubit Pauli noise after every gate.

    Attributes:
        p: Error probability per gate; each of the 15 non-identity two-qubit
            Paulis occurs with probability ``p / 15``.
        seed: Seed for :meth:`rng`.
    """

    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


TWO_QUBIT_ERRORS = tuple(all_paulis(("q1", "q2"), include_identity=False))


def sample_pauli_error(
    noise: PauliNoise, rng: Optional[np.random.Generator] = None, qubits: Sequence = ("q1", "q2")
) -> Optional[PauliString]:
    """Draw one gate's error: ``None`` with probability ``1 - p``, else a uniform non-identity Pauli."""
    rng = noise.rng() if rng is None else rng
    if rng.random() >= noise.p:
        return None
    letters = TWO_QUBIT_ERRORS[int(rng.integers(len(TWO_QUBIT_ERRORS)))].label_string(("q1", "q2"))
    return PauliString.from_labels(letters, tuple(qubits))


def pauli_error_stream(noise: PauliNoise, qubits: Sequence = ("q1", "q2")) -> Iterator[Optional[PauliString]]:
    """Endless deterministic stream of :func:`sample_pauli_error` draws."""
    rng = noise.rng()
    while True:
        yield sample_pauli_error(noise, rng, qubits)
