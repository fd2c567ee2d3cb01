"""Symbolic Pauli strings and their propagation through Clifford circuits.

Phases are tracked exactly as powers of ``i`` so that symbolic results can be
compared against dense matrix conjugation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import BadStepIndex, NotClifford, UnsupportedQubit
from .holonomy import cnot_circuit, hadamard, u_sz
from .mat_core import PAULI, embed, kron

PAULI_LABELS = ("I", "X", "Y", "Z")
_PHASE_NAMES = {0: "+", 1: "+i", 2: "-", 3: "-i"}

# Single-qubit products: _MUL[(a, b)] = (power of i, c) with a b = i^power c.
_MUL = {}
for _a in PAULI_LABELS:
    _MUL[("I", _a)] = (0, _a)
    _MUL[(_a, "I")] = (0, _a)
    _MUL[(_a, _a)] = (0, "I")
for _a, _b, _c in (("X", "Y", "Z"), ("Y", "Z", "X"), ("Z", "X", "Y")):
    _MUL[(_a, _b)] = (1, _c)
    _MUL[(_b, _a)] = (3, _c)

_TO_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_FROM_BITS = {v: k for k, v in _TO_BITS.items()}


def _label_key(label):
    return (type(label).__name__, repr(label))


@dataclass(frozen=True)
class PauliString:
    """Signed Pauli operator ``i^phase * prod_q P_q`` over named qubits.

    Attributes:
        factors: Sorted ``(label, 'X' | 'Y' | 'Z')`` pairs; identities omitted.
        phase: Power of ``i`` in ``{0, 1, 2, 3}``.
    """

    factors: tuple = ()
    phase: int = 0

    def __post_init__(self):
        clean = {}
        for label, op in self.factors:
            if op not in PAULI_LABELS:
                raise ValueError(f"unknown Pauli {op!r}")
            if label in clean:
                raise ValueError(f"qubit {label!r} listed twice")
            if op != "I":
                clean[label] = op
        object.__setattr__(
            self, "factors", tuple(sorted(clean.items(), key=lambda kv: _label_key(kv[0])))
        )
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @classmethod
    def from_dict(cls, ops: Mapping, phase: int = 0) -> "PauliString":
        return cls(tuple(ops.items()), phase)

    @classmethod
    def from_labels(cls, ops: str, qubits: Sequence, phase: int = 0) -> "PauliString":
        """``from_labels("XZ", ("M", "D"))`` gives ``X(M) Z(D)``."""
        if len(ops) != len(qubits):
            raise ValueError("one Pauli letter per qubit required")
        return cls(tuple(zip(qubits, ops)), phase)

    @classmethod
    def identity(cls) -> "PauliString":
        return cls()

    def as_dict(self) -> dict:
        return dict(self.factors)

    def get(self, label) -> str:
        return self.as_dict().get(label, "I")

    @property
    def support(self) -> tuple:
        return tuple(label for label, _ in self.factors)

    @property
    def weight(self) -> int:
        return len(self.factors)

    @property
    def sign(self) -> complex:
        return 1j**self.phase

    def is_identity(self) -> bool:
        return not self.factors

    def unsigned(self) -> "PauliString":
        return PauliString(self.factors, 0)

    def restrict(self, labels: Iterable) -> "PauliString":
        keep = set(labels)
        return PauliString(tuple((q, p) for q, p in self.factors if q in keep), self.phase)

    def __mul__(self, other: "PauliString") -> "PauliString":
        ops = self.as_dict()
        phase = self.phase + other.phase
        for label, op in other.factors:
            k, c = _MUL[(ops.get(label, "I"), op)]
            phase += k
            ops[label] = c
        return PauliString(tuple(ops.items()), phase)

    def commutes_with(self, other: "PauliString") -> bool:
        mine = self.as_dict()
        anti = sum(1 for q, p in other.factors if mine.get(q, "I") not in ("I", p))
        return anti % 2 == 0

    def to_matrix(self, labels: Sequence) -> np.ndarray:
        extra = set(self.support) - set(labels)
        if extra:
            raise UnsupportedQubit(f"qubits {sorted(map(str, extra))} not in {labels}")
        ops = self.as_dict()
        return self.sign * kron(*(PAULI[ops.get(q, "I")] for q in labels))

    def label_string(self, labels: Sequence) -> str:
        """Dense letter string such as ``"XIZ"`` (phase dropped)."""
        ops = self.as_dict()
        return "".join(ops.get(q, "I") for q in labels)

    def __str__(self) -> str:
        if not self.factors:
            return f"{_PHASE_NAMES[self.phase]}I"
        body = " ".join(f"{p}({q})" for q, p in self.factors)
        return f"{_PHASE_NAMES[self.phase]}{body}"


def all_paulis(qubits: Sequence, include_identity: bool = True) -> list:
    """Every unsigned Pauli string on ``qubits`` in lexicographic ``IXYZ`` order."""
    out = [PauliString.from_labels("".join(ops), qubits) for ops in itertools.product(PAULI_LABELS, repeat=len(qubits))]
    return out if include_identity else out[1:]


# --- Clifford tables --------------------------------------------------------

@dataclass(frozen=True)
class CliffordTable:
    """Images of ``X_k`` and ``Z_k`` for a ``k``-qubit Clifford, on local slots ``0..k-1``."""

    name: str
    num_qubits: int
    x_images: tuple
    z_images: tuple

    def conjugate_local(self, p: PauliString) -> PauliString:
        """Conjugate a Pauli string whose labels are local slot indices."""
        out = PauliString((), p.phase)
        for slot, op in p.factors:
            if op in ("X", "Y"):
                out = out * self.x_images[slot]
            if op in ("Z", "Y"):
                out = out * self.z_images[slot]
            if op == "Y":
                # Y = i X Z
                out = PauliString(out.factors, out.phase + 1)
        return out

    def symplectic(self) -> np.ndarray:
        """Binary matrix ``S`` with ``new_bits = old_bits @ S (mod 2)``.

        Bits are ordered ``(x_0, z_0, x_1, z_1, ...)``.
        """
        k = self.num_qubits
        s = np.zeros((2 * k, 2 * k), dtype=np.uint8)
        for slot in range(k):
            for row, img in ((2 * slot, self.x_images[slot]), (2 * slot + 1, self.z_images[slot])):
                ops = img.as_dict()
                for j in range(k):
                    x, z = _TO_BITS[ops.get(j, "I")]
                    s[row, 2 * j], s[row, 2 * j + 1] = x, z
        return s


def _table_from_rules(name: str, k: int, rules: Mapping) -> CliffordTable:
    xs, zs = [], []
    for slot in range(k):
        for gen, store in (("X", xs), ("Z", zs)):
            ops, phase = rules[(gen, slot)]
            store.append(PauliString.from_labels(ops, range(k), phase))
    return CliffordTable(name, k, tuple(xs), tuple(zs))


def clifford_table_from_matrix(name: str, u: np.ndarray, tol: float = 1e-9) -> CliffordTable:
    """Derive a conjugation table from a dense unitary.

    Raises:
        NotClifford: if some generator does not map to a signed Pauli.
    """
    u = np.asarray(u, dtype=complex)
    k = int(round(np.log2(u.shape[0])))
    slots = tuple(range(k))
    candidates = all_paulis(slots)
    xs, zs = [], []
    for slot in slots:
        for gen, store in (("X", xs), ("Z", zs)):
            g = PauliString.from_dict({slot: gen}).to_matrix(slots)
            img = u @ g @ u.conj().T
            for cand in candidates:
                ov = np.trace(cand.to_matrix(slots).conj().T @ img) / 2**k
                if abs(abs(ov) - 1) < tol:
                    phase = int(round(np.angle(ov) / (np.pi / 2))) % 4
                    store.append(PauliString(cand.factors, phase))
                    break
            else:
                raise NotClifford(f"{name} does not map {gen}{slot} to a Pauli")
    return CliffordTable(name, k, tuple(xs), tuple(zs))


# Conjugation rules of U_sz on generators (it is CZ . SWAP, all signs +).
_USZ_RULES = {
    ("X", 0): ("ZX", 0),
    ("X", 1): ("XZ", 0),
    ("Z", 0): ("IZ", 0),
    ("Z", 1): ("ZI", 0),
}

_SQRT_X = np.array([[1, -1j], [-1j, 1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j]).astype(complex)
_ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)

CLIFFORDS: dict = {
    "I": _table_from_rules("I", 1, {("X", 0): ("X", 0), ("Z", 0): ("Z", 0)}),
    "H": _table_from_rules("H", 1, {("X", 0): ("Z", 0), ("Z", 0): ("X", 0)}),
    "U_sz": _table_from_rules("U_sz", 2, _USZ_RULES),
    "CNOT": _table_from_rules(
        "CNOT", 2,
        {("X", 0): ("XX", 0), ("Z", 0): ("ZI", 0), ("X", 1): ("IX", 0), ("Z", 1): ("ZZ", 0)},
    ),
    "CZ": _table_from_rules(
        "CZ", 2,
        {("X", 0): ("XZ", 0), ("Z", 0): ("ZI", 0), ("X", 1): ("ZX", 0), ("Z", 1): ("IZ", 0)},
    ),
    "SWAP": _table_from_rules(
        "SWAP", 2,
        {("X", 0): ("IX", 0), ("Z", 0): ("IZ", 0), ("X", 1): ("XI", 0), ("Z", 1): ("ZI", 0)},
    ),
    "S": clifford_table_from_matrix("S", _S),
    "S_DAG": clifford_table_from_matrix("S_DAG", _S.conj().T),
    "SQRT_X": clifford_table_from_matrix("SQRT_X", _SQRT_X),
    "SQRT_X_DAG": clifford_table_from_matrix("SQRT_X_DAG", _SQRT_X.conj().T),
    "ISWAP": clifford_table_from_matrix("ISWAP", _ISWAP),
}

GATE_MATRICES: dict = {
    "I": np.eye(2, dtype=complex),
    "H": hadamard(),
    "U_sz": u_sz(),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
    "S": _S,
    "S_DAG": _S.conj().T,
    "SQRT_X": _SQRT_X,
    "SQRT_X_DAG": _SQRT_X.conj().T,
    "ISWAP": _ISWAP,
}


def conjugate_clifford(p: PauliString, gate: str, targets: Sequence) -> PauliString:
    """Return ``G p G^dagger`` for a named Clifford ``G`` acting on ``targets``.

    Raises:
        NotClifford: if ``gate`` is not a known Clifford.
    """
    try:
        table = CLIFFORDS[gate]
    except KeyError:
        raise NotClifford(f"unsupported gate {gate!r}") from None
    targets = tuple(targets)
    if len(targets) != table.num_qubits:
        raise ValueError(f"{gate} acts on {table.num_qubits} qubits, got {targets}")
    ops = p.as_dict()
    local = PauliString.from_dict({i: ops.get(t, "I") for i, t in enumerate(targets)})
    image = table.conjugate_local(local)
    rest = {q: op for q, op in ops.items() if q not in targets}
    rest.update({targets[i]: op for i, op in image.factors})
    return PauliString.from_dict(rest, p.phase + image.phase)


def conjugate_usz(p: PauliString, qubits: Sequence = ("q1", "q2")) -> PauliString:
    """Return ``U_sz p U_sz`` for ``p`` supported on the two gate qubits.

    Raises:
        UnsupportedQubit: if ``p`` acts outside ``qubits``.
    """
    extra = set(p.support) - set(qubits)
    if extra:
        raise UnsupportedQubit(f"{sorted(map(str, extra))} outside {tuple(qubits)}")
    return conjugate_clifford(p, "U_sz", qubits)


def conjugate_dense(p: PauliString, gate: np.ndarray, targets: Sequence, labels: Sequence) -> np.ndarray:
    """Dense oracle: ``G P G^dagger`` as a matrix on ``labels``."""
    g = embed(gate, targets, labels)
    return g @ p.to_matrix(labels) @ g.conj().T


# --- the six-step holonomic CNOT -----------------------------------------------

@dataclass(frozen=True)
class ErrorEvent:
    """A Pauli error inserted right after gate ``step_index`` (1-based)."""

    step_index: int
    error: PauliString


CNOT_REGISTER = ("M", "B", "D")


def cnot_gate_steps(control="M", target="D", helper="B") -> list:
    """The six gates of the holonomic CNOT (initializations dropped)."""
    return [s for s in cnot_circuit(control, target, helper) if s[0] != "init"]


def propagate(error: PauliString, steps: Sequence) -> PauliString:
    """Conjugate ``error`` through ``steps`` given as ``(gate, targets)`` pairs."""
    for gate, targets in steps:
        error = conjugate_clifford(error, gate, targets)
    return error


def trace_cnot_circuit(events: Sequence[ErrorEvent], control="M", target="D", helper="B") -> PauliString:
    """Accumulated error at the end of the six-gate holonomic CNOT.

    The faulty circuit equals ``E_final * U_ideal``; later events multiply on
    the left.

    Raises:
        BadStepIndex: if an event index lies outside ``1..6``.
    """
    steps = cnot_gate_steps(control, target, helper)
    total = PauliString.identity()
    for ev in sorted(events, key=lambda e: e.step_index):
        if not 1 <= ev.step_index <= len(steps):
            raise BadStepIndex(f"step {ev.step_index} outside 1..{len(steps)}")
    for ev in sorted(events, key=lambda e: e.step_index):
        total = propagate(ev.error, steps[ev.step_index :]) * total
    return total


def steps_unitary(steps: Sequence, labels: Sequence) -> np.ndarray:
    u = np.eye(2 ** len(labels), dtype=complex)
    for gate, targets in steps:
        u = embed(GATE_MATRICES[gate], targets, labels) @ u
    return u


def faulty_circuit_unitary(events: Sequence[ErrorEvent], steps: Sequence, labels: Sequence) -> np.ndarray:
    """Dense oracle: the circuit with each error matrix inserted after its gate."""
    u = np.eye(2 ** len(labels), dtype=complex)
    for k, (gate, targets) in enumerate(steps, start=1):
        u = embed(GATE_MATRICES[gate], targets, labels) @ u
        for ev in events:
            if ev.step_index == k:
                u = ev.error.to_matrix(labels) @ u
    return u


# --- stabilizer-unit spreading ---------------------------------------------

DATA_ORDER = ("a", "b", "c", "d")


@dataclass(frozen=True)
class SpreadRow:
    """One row of the spreading table: accumulated error factors per qubit.

    Each entry is a tuple of data-qubit names ``i`` standing for the product
    ``sigma(i_1) sigma(i_2) ...`` of auxiliary-induced errors, latest first.
    """

    operation: str
    entries: tuple

    def as_dict(self) -> dict:
        return dict(self.entries)


def format_factors(factors: tuple) -> str:
    return "I" if not factors else "".join(f"s({i})" for i in factors)


def stabilizer_spread_table(data: Sequence = DATA_ORDER) -> list:
    """Accumulated auxiliary-induced errors after each CNOT(M, i) of a unit.

    The error ``sigma(i)`` from helper ``B_i`` lands on ``M`` and on data ``i``;
    errors already on ``M`` spread to data ``i`` through the CNOT.
    """
    rows = []
    on_m: tuple = ()
    on_data = {q: () for q in data}
    for q in data:
        on_m = (q,) + on_m
        on_data[q] = on_m
        entries = (("M", on_m),) + tuple((d, on_data[d]) for d in data)
        rows.append(SpreadRow(f"CNOT(M,{q})", entries))
    return rows


def unit_cnot_steps(data: Sequence = DATA_ORDER, measure="M") -> list:
    """Six-gate holonomic CNOTs from ``M`` to each data qubit, helper ``B_i``."""
    out = []
    for q in data:
        out.append(cnot_gate_steps(measure, q, f"B_{q}"))
    return out


def propagate_unit_errors(aux_errors: Sequence[PauliString], data: Sequence = DATA_ORDER) -> PauliString:
    """Exact final error after a unit with one (M, B_i) error after step 2 of each CNOT.

    ``aux_errors[k]`` uses labels ``"M"`` and ``"B"``; the ``B`` factor is
    relabelled to the helper ``B_i`` of the k-th CNOT.
    """
    blocks = unit_cnot_steps(data)
    total = PauliString.identity()
    for k, (q, err) in enumerate(zip(data, aux_errors)):
        local = PauliString.from_dict({("M" if lab == "M" else f"B_{q}"): op for lab, op in err.factors}, err.phase)
        remaining = blocks[k][2:] + [s for blk in blocks[k + 1 :] for s in blk]
        total = propagate(local, remaining) * total
    return total


def spread_pattern(
    aux_errors: Sequence[PauliString], data: Sequence = DATA_ORDER, table: Optional[list] = None
) -> dict:
    """Data-qubit errors predicted by the spreading table.

    ``sigma(i)`` is the helper (``"B"``) factor of the i-th auxiliary-induced
    two-qubit error; data ``i`` ends with the product listed in the last row
    of :func:`stabilizer_spread_table`.
    """
    sigma = {q: err.get("B") for q, err in zip(data, aux_errors)}
    final = (table or stabilizer_spread_table(data))[-1].as_dict()
    out = {}
    for q in data:
        letter = "I"
        for j in final[q]:
            letter = _MUL[(letter, sigma[j])][1]
        out[q] = letter
    return out


def is_undetectable(pattern: Mapping, data: Sequence = DATA_ORDER) -> bool:
    """Same non-identity Pauli on every data qubit of the unit."""
    ops = {pattern[q] for q in data}
    return len(ops) == 1 and "I" not in ops


def undetectable_error_count(data: Sequence = DATA_ORDER) -> tuple:
    """Enumerate all 15^4 auxiliary-induced error combinations of one unit.

    Each CNOT contributes one non-identity Pauli on ``(M, B)``; a combination
    is undetectable when :func:`spread_pattern` puts the same non-identity
    Pauli on all data qubits.

    Returns:
        ``(count, total, Fraction(count, total))``.
    """
    errors = all_paulis(("M", "B"), include_identity=False)
    table = stabilizer_spread_table(data)
    count = sum(
        is_undetectable(spread_pattern(combo, data, table), data)
        for combo in itertools.product(errors, repeat=len(data))
    )
    total = len(errors) ** len(data)
    return count, total, Fraction(count, total)


def exact_undetectable_count(data: Sequence = DATA_ORDER) -> tuple:
    """Same enumeration with exact Clifford propagation instead of the table rule.

    Every helper error is propagated through the remaining gates of the unit;
    the final data-qubit Paulis are tested with :func:`is_undetectable`.
    """
    errors = all_paulis(("M", "B"), include_identity=False)
    singles = [
        [propagate_unit_errors(
            [PauliString() if j != k else e for j in range(len(data))], data
        ).unsigned() for e in errors]
        for k in range(len(data))
    ]
    count = 0
    for combo in itertools.product(*singles):
        total = PauliString.identity()
        for p in combo:
            total = p * total
        count += is_undetectable({q: total.get(q) for q in data}, data)
    total_n = len(errors) ** len(data)
    return count, total_n, Fraction(count, total_n)
