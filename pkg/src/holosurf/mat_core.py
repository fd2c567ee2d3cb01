"""Dense linear algebra, exact evolution and the time-ordered integration oracle.

Basis convention: in a register of qubits ``(q1, q2, ...)`` the basis state
``|i j k ...>`` has index ``i * 2**(n-1) + j * 2**(n-2) + ...``, i.e. the
first qubit is the most significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput, NotUnitary, UnknownQubitLabel

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}

# Slices are exponentiated in batches of this many to bound memory.
_SLICE_CHUNK = 4096


def kron(*mats: np.ndarray) -> np.ndarray:
    """Tensor product of one or more matrices, left factor most significant."""
    if not mats:
        raise ValueError("kron needs at least one matrix")
    for m in mats:
        if not np.all(np.isfinite(m)):
            raise ValueError("kron operands must be finite")
    return reduce(np.kron, (np.asarray(m, dtype=complex) for m in mats))


def is_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    return h.ndim >= 2 and h.shape[-1] == h.shape[-2] and bool(
        np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))), initial=0.0) <= tol
    )


def unitarity_error(u: np.ndarray) -> float:
    """Return ``max |U^dagger U - I|``."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    """Return ``u`` as a complex array after checking ``|U^dagger U - I|_max <= tol``.

    Raises:
        NotUnitary: if the check fails or ``u`` is not square.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NotUnitary(f"expected a square matrix, got shape {u.shape}")
    err = unitarity_error(u)
    if not err <= tol:
        raise NotUnitary(f"unitarity error {err:.3e} exceeds {tol:.1e}")
    return u


def expm_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Return ``exp(-i h t)`` for Hermitian ``h`` via eigendecomposition.

    Raises:
        NonHermitianInput: if ``h`` is not Hermitian within 1e-12.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise NonHermitianInput("expm_hermitian requires a Hermitian matrix")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """A Hermitian-matrix-valued function of dimensionless time.

    Attributes:
        dim: Hilbert-space dimension.
        sampler: Maps a time ``t`` to a ``dim x dim`` Hermitian matrix.
        batch_sampler: Optional vectorized sampler mapping an array of times
            of shape ``(n,)`` to an array of shape ``(n, dim, dim)``.
    """

    dim: int
    sampler: Callable[[float], np.ndarray]
    batch_sampler: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __call__(self, t: float) -> np.ndarray:
        h = np.asarray(self.sampler(float(t)), dtype=complex)
        if h.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"sampler returned {h.shape}, expected {(self.dim, self.dim)}")
        if not is_hermitian(h):
            raise NonHermitianInput(f"H(t) is not Hermitian at t={t}")
        return h

    def sample_many(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.batch_sampler is None:
            return np.stack([self(t) for t in ts])
        hs = np.asarray(self.batch_sampler(ts), dtype=complex)
        if hs.shape != (len(ts), self.dim, self.dim):
            raise DimensionMismatch(f"batch sampler returned {hs.shape}")
        if not is_hermitian(hs):
            raise NonHermitianInput("batch sampler returned a non-Hermitian matrix")
        return hs

    @staticmethod
    def constant(h: np.ndarray) -> "TimeDependentHamiltonian":
        h = np.asarray(h, dtype=complex)
        return TimeDependentHamiltonian(
            h.shape[0], lambda t: h, lambda ts: np.broadcast_to(h, (len(ts),) + h.shape)
        )


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """Return ``mats[n-1] @ ... @ mats[1] @ mats[0]`` by pairwise reduction."""
    while len(mats) > 1:
        odd = mats[-1] if len(mats) % 2 else None
        mats = mats[1 : len(mats) - (len(mats) % 2) : 2] @ mats[0 : len(mats) - (len(mats) % 2) : 2]
        if odd is not None:
            mats = np.concatenate([mats, odd[None]], axis=0)
    return mats[0]


def slice_propagators(hs: np.ndarray, dt: float) -> np.ndarray:
    """Exponentiate a stack of Hermitian matrices: ``exp(-i H_k dt)`` for each k."""
    w, v = np.linalg.eigh(hs)
    return (v * np.exp(-1j * w * dt)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def time_ordered_evolve(
    h: TimeDependentHamiltonian, t0: float, t1: float, steps: int
) -> np.ndarray:
    """Integrate ``i dU/dt = H(t) U`` from ``t0`` to ``t1`` with midpoint slices.

    The propagator is the product of ``exp(-i H(t_k) dt)`` over midpoints
    ``t_k``, latest slice leftmost. The scheme is second order in ``dt``.

    Raises:
        ValueError: if ``steps < 1`` or ``t1 <= t0``.
        NonHermitianInput: if the sampler returns a non-Hermitian matrix.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    dt = (t1 - t0) / steps
    mids = t0 + (np.arange(steps) + 0.5) * dt
    u = np.eye(h.dim, dtype=complex)
    for start in range(0, steps, _SLICE_CHUNK):
        chunk = mids[start : start + _SLICE_CHUNK]
        u = _ordered_product(slice_propagators(h.sample_many(chunk), dt)) @ u
    return u


def frame_twisted(h0: np.ndarray, projector: np.ndarray, duration: float = 1.0) -> TimeDependentHamiltonian:
    """Time-dependent Hamiltonian with the same propagator as constant ``h0``.

    ``H(t) = R(t) h0 R(t)^dagger - K`` with ``K = 2 pi P / duration`` and
    ``R(t) = exp(i K t)``. Since ``R(duration) = I`` the evolution over
    ``[0, duration]`` equals ``exp(-i h0 duration)``, yet the slices do not
    commute unless ``P`` commutes with ``h0``. This exposes the integrator's
    truncation error against a known exact answer.
    """
    h0 = np.asarray(h0, dtype=complex)
    p = np.asarray(projector, dtype=complex)
    w = 2 * np.pi / duration
    eye = np.eye(h0.shape[0])

    def batch(ts):
        r = eye[None] + (np.exp(1j * w * np.asarray(ts, dtype=float)) - 1)[:, None, None] * p[None]
        return r @ h0[None] @ np.conj(np.swapaxes(r, -1, -2)) - w * p[None]

    return TimeDependentHamiltonian(h0.shape[0], lambda t: batch([t])[0], batch)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state over a labelled qubit register.

    Attributes:
        amplitudes: Complex amplitudes of length ``2**len(labels)``.
        labels: Qubit names, first label is the most significant bit.
    """

    amplitudes: np.ndarray
    labels: tuple

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        labels = tuple(self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate qubit labels in {labels}")
        if amps.size != 2 ** len(labels):
            raise DimensionMismatch(f"{amps.size} amplitudes for {len(labels)} qubits")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def normalized(cls, amplitudes: Iterable[complex], labels: Sequence) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(amps / np.linalg.norm(amps), labels)

    @classmethod
    def basis(cls, labels: Sequence, bits: Sequence[int]) -> "StateVector":
        """Computational basis state with ``bits[k]`` on ``labels[k]``."""
        if len(bits) != len(labels):
            raise DimensionMismatch("one bit per label required")
        amps = np.zeros(2 ** len(labels), dtype=complex)
        amps[int("".join(str(int(b)) for b in bits) or "0", 2)] = 1.0
        return cls(amps, labels)

    @classmethod
    def product(cls, factors: Sequence[tuple]) -> "StateVector":
        """Product state from ``(label, single-qubit amplitudes)`` pairs."""
        labels = [lab for lab, _ in factors]
        vecs = [np.asarray(v, dtype=complex) for _, v in factors]
        return cls.normalized(reduce(np.kron, vecs), labels)

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownQubitLabel(label) from None

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def reorder(self, labels: Sequence) -> "StateVector":
        """Same state with the register permuted to ``labels``."""
        labels = tuple(labels)
        if sorted(map(repr, labels)) != sorted(map(repr, self.labels)):
            raise UnknownQubitLabel(f"{labels} is not a permutation of {self.labels}")
        perm = [self.index(lab) for lab in labels]
        return StateVector(np.transpose(self.tensor(), perm).reshape(-1), labels)

    def tensor_with(self, other: "StateVector") -> "StateVector":
        return StateVector(np.kron(self.amplitudes, other.amplitudes), self.labels + other.labels)


def _as_amplitudes(s) -> np.ndarray:
    return s.amplitudes if isinstance(s, StateVector) else np.asarray(s, dtype=complex).reshape(-1)


def state_fidelity(a, b) -> float:
    """Overlap modulus ``|<a|b>|`` of two normalized states, clipped to [0, 1].

    Accepts :class:`StateVector` instances or plain amplitude arrays.

    Raises:
        DimensionMismatch: if the states have different lengths.
    """
    va, vb = _as_amplitudes(a), _as_amplitudes(b)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"{va.shape} vs {vb.shape}")
    return float(min(1.0, abs(np.vdot(va, vb))))


def _check_targets(state: StateVector, gate: np.ndarray, targets: Sequence) -> list:
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"targets must be distinct: {targets}")
    axes = [state.index(t) for t in targets]
    if gate.shape != (2 ** len(targets),) * 2:
        raise DimensionMismatch(f"gate {gate.shape} does not act on {len(targets)} qubits")
    return axes


def _apply_raw(op: np.ndarray, tensor: np.ndarray, axes: list) -> np.ndarray:
    """Contract ``op`` into ``tensor`` on ``axes``; trailing batch axes are kept."""
    k = len(axes)
    t = np.tensordot(op.reshape((2,) * (2 * k)), tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(t, list(range(k)), axes)


def apply_operator(state: StateVector, op: np.ndarray, targets: Sequence) -> np.ndarray:
    """Apply any (not necessarily unitary) operator; return raw amplitudes."""
    op = np.asarray(op, dtype=complex)
    axes = _check_targets(state, op, targets)
    return _apply_raw(op, state.tensor(), axes).reshape(-1)


def apply_gate(state: StateVector, gate: np.ndarray, targets: Sequence) -> StateVector:
    """Apply a unitary on ``targets`` (in gate qubit order), identity elsewhere.

    Raises:
        DimensionMismatch: if the gate size does not match the targets.
        UnknownQubitLabel: if a target is not in the register.
    """
    return StateVector(apply_operator(state, gate, targets), state.labels)


def embed(gate: np.ndarray, targets: Sequence, labels: Sequence) -> np.ndarray:
    """Dense matrix of ``gate`` on ``targets`` inside the register ``labels``."""
    labels = tuple(labels)
    n = len(labels)
    gate = np.asarray(gate, dtype=complex)
    targets = list(targets)
    if gate.shape != (2 ** len(targets),) * 2:
        raise DimensionMismatch(f"gate {gate.shape} does not act on {len(targets)} qubits")
    try:
        axes = [labels.index(t) for t in targets]
    except ValueError:
        raise UnknownQubitLabel(f"{targets} not all in {labels}") from None
    eye = np.eye(2**n, dtype=complex).reshape((2,) * n + (2**n,))
    return _apply_raw(gate, eye, axes).reshape(2**n, 2**n)


def qubit_probability(state: StateVector, label, value: int) -> float:
    """Probability of finding ``label`` in ``|value>``."""
    t = np.moveaxis(state.tensor(), state.index(label), 0)
    return float(np.sum(np.abs(t[value]) ** 2))


def project_qubit(state: StateVector, label, value: int) -> tuple:
    """Project ``label`` onto ``|value>``.

    Returns:
        ``(probability, post_state)``; ``post_state`` is ``None`` when the
        probability is below 1e-300.
    """
    ax = state.index(label)
    t = np.moveaxis(state.tensor().copy(), ax, 0)
    t[1 - value] = 0.0
    amps = np.moveaxis(t, 0, ax).reshape(-1)
    norm2 = float(np.vdot(amps, amps).real)
    prob = min(norm2, 1.0)
    if prob < 1e-300:
        return prob, None
    return prob, StateVector(amps / np.sqrt(norm2), state.labels)


def drop_qubit(state: StateVector, label) -> StateVector:
    """Remove a qubit known to be in a computational basis state."""
    ax = state.index(label)
    t = np.moveaxis(state.tensor(), ax, 0)
    p0 = float(np.sum(np.abs(t[0]) ** 2))
    p1 = float(np.sum(np.abs(t[1]) ** 2))
    if min(p0, p1) > 1e-12:
        raise ValueError(f"qubit {label!r} is not in a basis state")
    rest = t[0] if p0 >= p1 else t[1]
    labels = state.labels[:ax] + state.labels[ax + 1 :]
    return StateVector.normalized(rest.reshape(-1), labels)
