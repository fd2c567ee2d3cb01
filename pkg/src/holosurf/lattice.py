"""Planar surface-code layout, syndrome circuits and error-spread experiments."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import InvalidDistance, TooLargeForStateVector
from .holonomy import cnot_circuit, u2_evolution
from .mat_core import PAULI, SIGMA_X, StateVector, apply_gate, project_qubit
from .noise import USZ_THETA, AreaError, PauliNoise
from .pauli_frame import CLIFFORDS, GATE_MATRICES, PauliString, conjugate_clifford

ROLES = ("data", "measure_X", "measure_Z", "aux_inline", "aux_B")
DIRECTIONS = {"N": (-1, 0), "W": (0, -1), "E": (0, 1), "S": (1, 0)}
DEFAULT_DATA_ORDER = ("N", "W", "E", "S")
VARIANTS = ("plain", "holonomic", "dynamic")
MAX_STATE_VECTOR_QUBITS = 14
BLOCK_SHOTS = 4096
MAX_P = 0.1
# Dynamic CNOT(c -> t): two iSWAPs dressed with single-qubit Cliffords.
DYNAMIC_CNOT = (
    ("S", "t"),
    ("ISWAP", "ct"),
    ("SQRT_X", "c"),
    ("ISWAP", "ct"),
    ("S", "t"),
    ("S_DAG", "c"),
    ("SQRT_X", "t"),
)


# --- layout -------------------------------------------------------------------

@dataclass(frozen=True)
class Site:
    """A physical qubit: label, integer position and role."""

    label: str
    position: tuple
    role: str


@dataclass(frozen=True)
class StabilizerUnit:
    """One stabilizer measurement unit.

    Attributes:
        label: Unit name, equal to its measurement qubit label.
        kind: ``"X"`` or ``"Z"``.
        measure_qubit: Label of the measurement qubit.
        slots: Data qubit per CNOT slot in the canonical direction order; ``None``
            where the unit sits on a boundary.
        aux_qubits: ``aux_inline`` label per slot (``None`` when absent).
        helper_qubits: ``aux_B`` label per slot (``None`` when absent).
    """

    label: str
    kind: str
    measure_qubit: str
    slots: tuple
    aux_qubits: tuple
    helper_qubits: tuple

    @property
    def data_qubits(self) -> tuple:
        return tuple(q for q in self.slots if q is not None)

    def operator(self) -> PauliString:
        """The stabilizer ``Z...Z`` or ``X...X`` on the unit's data qubits."""
        return PauliString.from_dict({q: self.kind for q in self.data_qubits})


@dataclass(frozen=True, eq=False)
class LatticeLayout:
    """Sites, XY-coupling adjacency and stabilizer units of a distance-``d`` patch."""

    distance: int
    sites: tuple
    adjacency: tuple
    units: tuple
    data_order: tuple = DEFAULT_DATA_ORDER

    def labels(self, role: Optional[str] = None) -> tuple:
        return tuple(s.label for s in self.sites if role is None or s.role == role)

    @property
    def data_qubits(self) -> tuple:
        return self.labels("data")

    def site(self, label: str) -> Site:
        return self._by_label()[label]

    def unit(self, label: str) -> StabilizerUnit:
        for u in self.units:
            if u.label == label:
                return u
        raise KeyError(label)

    def _by_label(self) -> dict:
        return {s.label: s for s in self.sites}

    def as_dict(self) -> dict:
        return {
            "distance": self.distance,
            "data_order": list(self.data_order),
            "sites": [{"label": s.label, "position": list(s.position), "role": s.role} for s in self.sites],
            "adjacency": [list(p) for p in self.adjacency],
            "units": [
                {
                    "label": u.label,
                    "kind": u.kind,
                    "measure_qubit": u.measure_qubit,
                    "slots": list(u.slots),
                    "aux_qubits": list(u.aux_qubits),
                    "helper_qubits": list(u.helper_qubits),
                }
                for u in self.units
            ],
        }


def _bond_sites(m: tuple, q: tuple) -> tuple:
    """Positions (scaled by 4) of the inline auxiliary and the helper of one bond."""
    mid = (2 * (m[0] + q[0]), 2 * (m[1] + q[1]))
    offset = (0, 1) if m[0] != q[0] else (1, 0)
    return mid, (mid[0] + offset[0], mid[1] + offset[1])


def build_lattice(d: int, data_order: Sequence[str] = DEFAULT_DATA_ORDER) -> LatticeLayout:
    """Planar distance-``d`` layout on a ``(2d - 1) x (2d - 1)`` grid.

    Data qubits sit where ``r + c`` is even, ``Z`` units at even ``r`` and odd
    ``c``, ``X`` units at odd ``r`` and even ``c``. Every (measurement, data) bond
    holds one inline auxiliary at its midpoint and one helper next to it.
    Positions are the grid coordinates scaled by 4.

    Raises:
        InvalidDistance: if ``d < 2``.
        ValueError: if ``data_order`` is not a permutation of ``N, W, E, S``.
    """
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise InvalidDistance(f"distance must be an integer >= 2, got {d!r}")
    if sorted(data_order) != sorted(DIRECTIONS):
        raise ValueError(f"data_order must be a permutation of {tuple(DIRECTIONS)}")
    n = 2 * d - 1
    sites, adjacency, units = [], [], []

    def name(prefix, r, c):
        return f"{prefix}{r}_{c}"

    for r in range(n):
        for c in range(n):
            if (r + c) % 2 == 0:
                sites.append(Site(name("d", r, c), (4 * r, 4 * c), "data"))
    for r in range(n):
        for c in range(n):
            if (r + c) % 2 == 0:
                continue
            kind = "Z" if r % 2 == 0 else "X"
            m = name("m", r, c)
            sites.append(Site(m, (4 * r, 4 * c), f"measure_{kind}"))
            slots, auxes, helpers = [], [], []
            for direction in data_order:
                dr, dc = DIRECTIONS[direction]
                rr, cc = r + dr, c + dc
                if not (0 <= rr < n and 0 <= cc < n):
                    slots.append(None)
                    auxes.append(None)
                    helpers.append(None)
                    continue
                q = name("d", rr, cc)
                a_pos, b_pos = _bond_sites((r, c), (rr, cc))
                a, b = f"a{r}_{c}{direction}", f"b{r}_{c}{direction}"
                sites.append(Site(a, a_pos, "aux_inline"))
                sites.append(Site(b, b_pos, "aux_B"))
                adjacency.extend([(a, m), (a, q), (a, b)])
                slots.append(q)
                auxes.append(a)
                helpers.append(b)
            units.append(StabilizerUnit(m, kind, m, tuple(slots), tuple(auxes), tuple(helpers)))
    # Z units first; the stable sort keeps row-major order inside each group.
    units.sort(key=lambda u: u.kind != "Z")
    return LatticeLayout(d, tuple(sites), tuple(adjacency), tuple(units), tuple(data_order))


# --- circuits -----------------------------------------------------------------

class Step(NamedTuple):
    """One circuit step.

    ``gate`` is a Clifford name, ``"init"`` (auxiliary preparation), ``"reset"``
    or ``"measure"``; ``tag`` marks the helper-coupling ``U_sz`` with ``"aux"``.
    """

    gate: str
    targets: tuple
    unit: str = ""
    tag: str = ""
    cnot: int = -1


def cnot_expansion(
    control: str, target: str, helper: Optional[str], variant: str = "plain", unit: str = "", cnot: int = -1
) -> list:
    """Steps realizing ``CNOT(control -> target)`` in the requested variant."""
    if variant == "plain":
        return [Step("CNOT", (control, target), unit, "", cnot)]
    if variant == "holonomic":
        out = []
        for k, (kind, qubits) in enumerate(cnot_circuit(control, target, helper)):
            tag = "aux" if kind == "U_sz" and k == 2 else ""
            out.append(Step(kind, tuple(qubits), unit, tag, cnot))
        return out
    if variant == "dynamic":
        role = {"c": control, "t": target}
        return [Step(g, tuple(role[ch] for ch in q), unit, "", cnot) for g, q in DYNAMIC_CNOT]
    raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


def _unit_cnot(unit: StabilizerUnit, q: str) -> tuple:
    m = unit.measure_qubit
    return (q, m) if unit.kind == "Z" else (m, q)


def syndrome_circuit(unit: StabilizerUnit, variant: str = "plain", helpers: Optional[dict] = None) -> list:
    """Reset, basis change (``X`` units), four CNOTs, basis change, measurement.

    ``Z`` units use ``CNOT(data -> M)``; ``X`` units use ``H_M CNOT(M -> data) H_M``.
    ``helpers`` optionally renames the per-slot helper qubits.
    """
    m = unit.measure_qubit
    steps = [Step("reset", (m,), unit.label)]
    if unit.kind == "X":
        steps.append(Step("H", (m,), unit.label))
    for k, (q, b) in enumerate(zip(unit.slots, unit.helper_qubits)):
        if q is None:
            continue
        c, t = _unit_cnot(unit, q)
        steps.extend(cnot_expansion(c, t, (helpers or {}).get(b, b), variant, unit.label, k))
    if unit.kind == "X":
        steps.append(Step("H", (m,), unit.label))
    steps.append(Step("measure", (m,), unit.label))
    return steps


def round_schedule(
    layout: LatticeLayout,
    variant: str = "plain",
    units: Optional[Sequence[str]] = None,
    shared_helpers: bool = False,
) -> list:
    """One syndrome round: all ``Z`` units slot by slot, then all ``X`` units.

    Within a group every unit performs its slot-``k`` CNOT before any unit moves
    to slot ``k + 1``, so same-direction CNOTs run in parallel.
    """
    chosen = [u for u in layout.units if units is None or u.label in units]
    steps = []
    count = 0
    for kind in ("Z", "X"):
        group = [u for u in chosen if u.kind == kind]
        for u in group:
            steps.append(Step("reset", (u.measure_qubit,), u.label))
            if kind == "X":
                steps.append(Step("H", (u.measure_qubit,), u.label))
        for slot in range(len(layout.data_order)):
            for u in group:
                q = u.slots[slot]
                if q is None:
                    continue
                helper = f"b_{u.label}" if shared_helpers else u.helper_qubits[slot]
                c, t = _unit_cnot(u, q)
                steps.extend(cnot_expansion(c, t, helper, variant, u.label, count))
                count += 1
        for u in group:
            if kind == "X":
                steps.append(Step("H", (u.measure_qubit,), u.label))
            steps.append(Step("measure", (u.measure_qubit,), u.label))
    return steps


def schedule_qubits(layout: LatticeLayout, steps: Sequence[Step]) -> tuple:
    """Qubits touched by ``steps``, data first, in first-use order otherwise."""
    seen = list(layout.data_qubits)
    for s in steps:
        if s.gate == "init":
            continue
        for q in s.targets:
            if q not in seen:
                seen.append(q)
    return tuple(seen)


def noisy_steps(steps: Sequence[Step], aux_only: bool = False) -> list:
    """Indices of steps followed by a Pauli error."""
    if aux_only:
        return [i for i, s in enumerate(steps) if s.tag == "aux"]
    return [i for i, s in enumerate(steps) if s.gate in CLIFFORDS]


# --- symbolic propagation -----------------------------------------------------

class Injection(NamedTuple):
    """A Pauli error inserted right after step ``after`` (``-1``: before the first step)."""

    after: int
    error: PauliString


def propagate_schedule(steps: Sequence[Step], injections: Sequence[Injection]) -> PauliString:
    """Accumulated error at the end of ``steps`` (resets and measurements excluded)."""
    total = PauliString.identity()
    for inj in sorted(injections, key=lambda i: i.after):
        err = inj.error
        for s in steps[inj.after + 1 :]:
            if s.gate in CLIFFORDS:
                err = conjugate_clifford(err, s.gate, s.targets)
        total = err * total
    return total


def cnot_boundaries(steps: Sequence[Step]) -> list:
    """Index of the last step of each CNOT, in CNOT order.

    Injecting after these indices places an error between whole CNOTs, which
    is the same position for every circuit variant.
    """
    last = {}
    for i, s in enumerate(steps):
        if s.cnot >= 0:
            last[s.cnot] = i
    return [last[k] for k in sorted(last)]


# --- vectorized Pauli frame ------------------------------------------------

@lru_cache(maxsize=None)
def _symplectic(gate: str) -> np.ndarray:
    return CLIFFORDS[gate].symplectic().astype(np.int64)


class FrameSimulator:
    """Pauli frames of many shots as ``(shots, 2 n)`` bits ``(x_0, z_0, x_1, z_1, ...)``."""

    def __init__(self, labels: Sequence[str], shots: int):
        self.labels = tuple(labels)
        self.index = {q: i for i, q in enumerate(self.labels)}
        self.bits = np.zeros((shots, 2 * len(self.labels)), dtype=np.int64)

    def _cols(self, targets: Sequence[str]) -> list:
        return [c for q in targets for c in (2 * self.index[q], 2 * self.index[q] + 1)]

    def apply(self, gate: str, targets: Sequence[str]) -> None:
        cols = self._cols(targets)
        self.bits[:, cols] = (self.bits[:, cols] @ _symplectic(gate)) & 1

    def inject(self, targets: Sequence[str], letters: np.ndarray) -> None:
        """XOR per-shot Pauli letters (0..3 for I, X, Y, Z) onto ``targets``."""
        for j, q in enumerate(targets):
            col = 2 * self.index[q]
            l = letters[:, j]
            self.bits[:, col] ^= ((l == 1) | (l == 2)).astype(np.int64)
            self.bits[:, col + 1] ^= ((l == 2) | (l == 3)).astype(np.int64)

    def x_bit(self, q: str) -> np.ndarray:
        return self.bits[:, 2 * self.index[q]].copy()

    def clear(self, q: str) -> None:
        i = self.index[q]
        self.bits[:, 2 * i : 2 * i + 2] = 0

    def letters(self, qubits: Sequence[str]) -> np.ndarray:
        """Per-shot letters ``0..3`` (I, X, Y, Z) on ``qubits``."""
        cols = np.array([self.index[q] for q in qubits], dtype=int)
        x, z = self.bits[:, 2 * cols], self.bits[:, 2 * cols + 1]
        return np.where(x == 1, np.where(z == 1, 2, 1), np.where(z == 1, 3, 0))


def _sample_letters(rng: np.random.Generator, p: float, shots: int, k: int) -> np.ndarray:
    """Per-shot Pauli letters on ``k`` qubits: identity with prob ``1 - p``, else uniform non-identity."""
    hit = rng.random(shots) < p
    code = rng.integers(1, 4**k, size=shots) * hit
    return np.stack([(code >> (2 * (k - 1 - j))) & 3 for j in range(k)], axis=1)


def _run_frame(steps, labels, shots, rounds, p, aux_only, rng, injections=()):
    sim = FrameSimulator(labels, shots)
    noisy = set(noisy_steps(steps, aux_only))
    extra = {}
    for inj in injections:
        extra.setdefault(inj.after, []).append(inj.error)
    flips = []
    for r in range(rounds):
        injected = extra if r == 0 else {}
        for err in injected.get(-1, []):
            _inject_pauli(sim, err)
        record = {}
        for i, s in enumerate(steps):
            if s.gate == "reset":
                sim.clear(s.targets[0])
            elif s.gate == "measure":
                record[s.unit] = sim.x_bit(s.targets[0])
            elif s.gate in CLIFFORDS:
                sim.apply(s.gate, s.targets)
                if i in noisy and p > 0:
                    sim.inject(s.targets, _sample_letters(rng, p, shots, len(s.targets)))
            for err in injected.get(i, []):
                _inject_pauli(sim, err)
        flips.append(record)
    return sim, flips


def _inject_pauli(sim: FrameSimulator, err: PauliString) -> None:
    code = {"I": 0, "X": 1, "Y": 2, "Z": 3}
    qubits = [q for q, _ in err.factors]
    letters = np.array([[code[op] for _, op in err.factors]] * sim.bits.shape[0], dtype=np.int64)
    sim.inject(qubits, letters)


# --- syndrome cycles ----------------------------------------------------------

@dataclass(frozen=True)
class SyndromeRecord:
    """Measurement outcomes (``+1`` or ``-1``) of one round, keyed by unit label."""

    round: int
    outcomes: dict

    def __post_init__(self):
        if any(v not in (-1, 1) for v in self.outcomes.values()):
            raise ValueError("syndrome outcomes must be +1 or -1")

    def as_dict(self) -> dict:
        return {"round": self.round, "outcomes": dict(sorted(self.outcomes.items()))}


def run_cycle(
    layout: LatticeLayout,
    error_model: Union[PauliNoise, AreaError, None] = None,
    representation: str = "pauli_frame",
    seed: int = 0,
    variant: str = "holonomic",
    units: Optional[Sequence[str]] = None,
    injections: Sequence[Injection] = (),
    round_index: int = 0,
) -> SyndromeRecord:
    """One syndrome round starting from the ``+1`` eigenstate of every stabilizer.

    ``pauli_frame`` handles any distance with Pauli noise. ``state_vector``
    simulates data, measurement and one shared helper per unit (plus one explicit
    auxiliary for :class:`AreaError`), and supports up to 14 qubits.

    Raises:
        TooLargeForStateVector: if the state-vector register exceeds 14 qubits.
        ValueError: for an unknown representation or an area error in the frame picture.
    """
    if representation == "pauli_frame":
        if isinstance(error_model, AreaError):
            raise ValueError("coherent area errors need the state_vector representation")
        p = error_model.p if isinstance(error_model, PauliNoise) else 0.0
        steps = round_schedule(layout, variant, units)
        rng = np.random.default_rng(seed)
        _, flips = _run_frame(steps, schedule_qubits(layout, steps), 1, 1, p, False, rng, injections)
        return SyndromeRecord(round_index, {u: 1 - 2 * int(f[0]) for u, f in flips[0].items()})
    if representation == "state_vector":
        return _run_state_vector(layout, error_model, seed, variant, units, injections, round_index)
    raise ValueError("representation must be 'pauli_frame' or 'state_vector'")


def stabilizer_ground_state(layout: LatticeLayout, labels: Sequence[str]) -> StateVector:
    """``+1`` eigenstate of all stabilizers on the data; every other qubit in ``|0>``."""
    state = StateVector.basis(labels, [0] * len(labels))
    for u in layout.units:
        if u.kind != "X":
            continue
        x = state.amplitudes
        flipped = state
        for q in u.data_qubits:
            flipped = apply_gate(flipped, SIGMA_X, [q])
        state = StateVector.normalized(0.5 * (x + flipped.amplitudes), labels)
    return state


def state_vector_qubits(layout: LatticeLayout, steps: Sequence[Step], area_error: bool) -> tuple:
    labels = schedule_qubits(layout, steps)
    return labels + (("A",) if area_error else ())


def _apply_pauli_letters(state: StateVector, targets, letters) -> StateVector:
    for q, l in zip(targets, letters):
        if l:
            state = apply_gate(state, PAULI["IXYZ"[int(l)]], [q])
    return state


def _run_state_vector(layout, error_model, seed, variant, units, injections, round_index):
    steps = round_schedule(layout, variant, units, shared_helpers=True)
    area = isinstance(error_model, AreaError)
    labels = state_vector_qubits(layout, steps, area)
    if len(labels) > MAX_STATE_VECTOR_QUBITS:
        raise TooLargeForStateVector(
            f"{len(labels)} qubits exceed the state-vector limit of {MAX_STATE_VECTOR_QUBITS}"
        )
    rng = np.random.default_rng(seed)
    p = error_model.p if isinstance(error_model, PauliNoise) else 0.0
    noisy = set(noisy_steps(steps))
    lossy_usz = u2_evolution(USZ_THETA, math.pi + error_model.delta) if area else None
    extra = {}
    for inj in injections:
        extra.setdefault(inj.after, []).append(inj.error)
    state = stabilizer_ground_state(layout, labels)
    for err in extra.get(-1, []):
        state = apply_gate(state, err.to_matrix([q for q, _ in err.factors]), [q for q, _ in err.factors])
    outcomes = {}
    for i, s in enumerate(steps):
        if s.gate == "reset":
            state = _reset(state, s.targets[0], rng)
        elif s.gate == "measure":
            value, state = _measure(state, s.targets[0], rng)
            outcomes[s.unit] = 1 - 2 * value
        elif s.gate == "U_sz" and area:
            state = apply_gate(state, lossy_usz, list(s.targets) + ["A"])
            state = _reset(state, "A", rng)
        elif s.gate in CLIFFORDS:
            state = apply_gate(state, GATE_MATRICES[s.gate], list(s.targets))
            if i in noisy and p > 0:
                letters = _sample_letters(rng, p, 1, len(s.targets))[0]
                state = _apply_pauli_letters(state, s.targets, letters)
        for err in extra.get(i, []):
            qs = [q for q, _ in err.factors]
            state = apply_gate(state, err.to_matrix(qs), qs)
    return SyndromeRecord(round_index, outcomes)


def _measure(state: StateVector, q: str, rng: np.random.Generator) -> tuple:
    p0, post0 = project_qubit(state, q, 0)
    if rng.random() < p0:
        return 0, post0
    _, post1 = project_qubit(state, q, 1)
    return 1, post1


def _reset(state: StateVector, q: str, rng: np.random.Generator) -> StateVector:
    """Measure ``q`` in ``Z`` and flip it back to ``|0>`` when found in ``|1>``."""
    value, state = _measure(state, q, rng)
    return apply_gate(state, SIGMA_X, [q]) if value else state


# --- Monte Carlo spread -------------------------------------------------------

@dataclass(frozen=True)
class SpreadResult:
    """Aggregated frame statistics of one circuit variant.

    Attributes:
        variant: ``"holonomic"`` or ``"dynamic"``.
        shots: Number of shots.
        weight_histogram: Residual data-error weight -> shot count (sorted by weight).
        detected: Shots with at least one ``-1`` syndrome outcome.
        undetectable_high_weight: Shots whose residual data error commutes with
            every stabilizer and has weight ``>= d``.
        uniform_unit_patterns: Shots where some unit's data qubits all carry the
            same non-identity Pauli.
    """

    variant: str
    shots: int
    weight_histogram: dict
    detected: int
    undetectable_high_weight: int
    uniform_unit_patterns: int

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "shots": self.shots,
            "weight_histogram": {str(k): v for k, v in sorted(self.weight_histogram.items())},
            "detected": self.detected,
            "undetectable_high_weight": self.undetectable_high_weight,
            "uniform_unit_patterns": self.uniform_unit_patterns,
        }


@dataclass(frozen=True)
class SpreadReport:
    """Holonomic result and the matching dynamic-circuit comparison."""

    p: float
    rounds: int
    holonomic: SpreadResult
    dynamic: Optional[SpreadResult]

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "rounds": self.rounds,
            "holonomic": self.holonomic.as_dict(),
            "dynamic": None if self.dynamic is None else self.dynamic.as_dict(),
        }


def _block_task(args):
    layout_d, data_order, variant, units, p, rounds, shots, aux_only, seed, block = args
    layout = build_lattice(layout_d, data_order)
    steps = round_schedule(layout, variant, units)
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    sim, flips = _run_frame(steps, schedule_qubits(layout, steps), shots, rounds, p, aux_only, rng)
    data = layout.data_qubits
    letters = sim.letters(data)
    weight = np.count_nonzero(letters, axis=1)
    detected = np.zeros(shots, dtype=bool)
    for record in flips:
        for f in record.values():
            detected |= f.astype(bool)
    # Residual error commutes with a stabilizer iff it has an even number of anticommuting sites.
    commutes = np.ones(shots, dtype=bool)
    idx = {q: i for i, q in enumerate(data)}
    chosen = [u for u in layout.units if units is None or u.label in units]
    for u in layout.units:
        cols = [idx[q] for q in u.data_qubits]
        bad = (letters[:, cols] != 0) & (letters[:, cols] != (1 if u.kind == "X" else 3))
        commutes &= bad.sum(axis=1) % 2 == 0
    uniform = np.zeros(shots, dtype=bool)
    for u in chosen:
        cols = [idx[q] for q in u.data_qubits]
        sub = letters[:, cols]
        uniform |= (sub[:, 0] != 0) & np.all(sub == sub[:, :1], axis=1)
    hist = Counter(weight.tolist())
    undetectable = commutes & (weight >= layout.distance)
    return dict(hist), int(detected.sum()), int(undetectable.sum()), int(uniform.sum())


def _blocks(shots: int) -> list:
    sizes = [BLOCK_SHOTS] * (shots // BLOCK_SHOTS)
    if shots % BLOCK_SHOTS:
        sizes.append(shots % BLOCK_SHOTS)
    return sizes


def spread_experiment(
    layout: LatticeLayout,
    p: float,
    rounds: int,
    shots: int,
    seed: int,
    variant: str = "holonomic",
    units: Optional[Sequence[str]] = None,
    aux_only: bool = False,
    workers: int = 1,
) -> SpreadResult:
    """Frame Monte Carlo of one variant.

    Shots are split into fixed blocks of :data:`BLOCK_SHOTS`; block ``k`` draws
    from ``SeedSequence([seed, k])``, so results do not depend on ``workers``.
    """
    if not 0.0 <= p <= MAX_P:
        raise ValueError(f"p must lie in [0, {MAX_P}]")
    if shots < 1 or rounds < 1:
        raise ValueError("shots and rounds must be positive")
    units = None if units is None else tuple(units)
    tasks = [
        (layout.distance, layout.data_order, variant, units, p, rounds, n, aux_only, seed, k)
        for k, n in enumerate(_blocks(shots))
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_task, tasks))
    else:
        parts = [_block_task(t) for t in tasks]
    hist = Counter()
    for h, *_ in parts:
        hist.update(h)
    return SpreadResult(
        variant,
        shots,
        dict(sorted(hist.items())),
        sum(x[1] for x in parts),
        sum(x[2] for x in parts),
        sum(x[3] for x in parts),
    )


def monte_carlo_spread(
    layout: LatticeLayout,
    p: float,
    rounds: int = 1,
    shots: int = 1000,
    seed: int = 0,
    units: Optional[Sequence[str]] = None,
    aux_only: bool = False,
    workers: int = 1,
) -> SpreadReport:
    """Holonomic-circuit spread statistics plus the dynamic 7-step comparison.

    With ``aux_only`` only the helper-coupling ``U_sz`` of each holonomic CNOT is
    noisy; the dynamic circuit has no such gate and its comparison is omitted.
    """
    holo = spread_experiment(layout, p, rounds, shots, seed, "holonomic", units, aux_only, workers)
    dyn = None if aux_only else spread_experiment(layout, p, rounds, shots, seed, "dynamic", units, False, workers)
    return SpreadReport(p, rounds, holo, dyn)


def aux_only_uniform_probability(layout: LatticeLayout, unit: str, p: float) -> float:
    """Exact probability that aux-only noise leaves a uniform pattern on ``unit``.

    Each helper-coupling ``U_sz`` of the unit's holonomic CNOTs suffers one of
    the 15 non-identity Paulis with probability ``p / 15``. All ``16^k`` error
    combinations are propagated through the exact circuit.
    """
    steps = round_schedule(layout, "holonomic", [unit])
    u = layout.unit(unit)
    positions = noisy_steps(steps, aux_only=True)
    data = u.data_qubits
    codes = np.arange(16)
    bits = []
    for i in positions:
        a, b = steps[i].targets
        row = []
        for k in codes:
            err = PauliString.from_dict({a: "IXYZ"[k >> 2], b: "IXYZ"[k & 3]})
            final = propagate_schedule(steps, [Injection(i, err)])
            row.append([_TO_BITS[final.get(q)] for q in data])
        bits.append(np.array(row, dtype=np.int64).reshape(16, -1))
    weights = np.where(codes == 0, 1.0 - p, p / 15.0)
    acc = np.zeros((1, bits[0].shape[1]), dtype=np.int64)
    prob = np.ones(1)
    for slot in bits:
        acc = (acc[:, None, :] ^ slot[None, :, :]).reshape(-1, slot.shape[1])
        prob = (prob[:, None] * weights[None, :]).reshape(-1)
    x, z = acc[:, 0::2], acc[:, 1::2]
    letters = x + 2 * z
    uniform = (letters[:, 0] != 0) & np.all(letters == letters[:, :1], axis=1)
    return float(prob[uniform].sum())


_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


# --- frame / state-vector agreement ----------------------------------------

def unit_injection_agreement(unit: StabilizerUnit, variant: str = "holonomic", seed: int = 0) -> tuple:
    """Compare frame propagation with state-vector simulation for single injections.

    Every non-identity Pauli is injected after every gate of the unit's
    syndrome circuit (measurement excluded), on that gate's qubits. The frame
    prediction ``E`` is checked against running the faulty circuit on a random
    data state: the output must equal ``E U |psi>``.

    Returns:
        ``(minimum fidelity, number of injections)``.
    """
    steps = [s for s in syndrome_circuit(unit, variant) if s.gate in CLIFFORDS]
    labels = list(dict.fromkeys([*unit.data_qubits, unit.measure_qubit, *(q for s in steps for q in s.targets)]))
    rng = np.random.default_rng(seed)
    data_amps = rng.normal(size=2 ** len(unit.data_qubits)) + 1j * rng.normal(size=2 ** len(unit.data_qubits))
    rest = np.zeros(2 ** (len(labels) - len(unit.data_qubits)), dtype=complex)
    rest[0] = 1.0
    psi = StateVector.normalized(np.kron(data_amps, rest), labels)

    def run(injection: Optional[Injection]) -> StateVector:
        state = psi
        for i, s in enumerate(steps):
            state = apply_gate(state, GATE_MATRICES[s.gate], list(s.targets))
            if injection is not None and injection.after == i:
                qs = [q for q, _ in injection.error.factors]
                state = apply_gate(state, injection.error.to_matrix(qs), qs)
        return state

    ideal = run(None)
    worst, count = 1.0, 0
    for i, s in enumerate(steps):
        k = len(s.targets)
        for code in range(1, 4**k):
            ops = {q: "IXYZ"[(code >> (2 * (k - 1 - j))) & 3] for j, q in enumerate(s.targets)}
            inj = Injection(i, PauliString.from_dict(ops))
            predicted = propagate_schedule(steps, [inj])
            expected = ideal.amplitudes
            if not predicted.is_identity():
                qs = [q for q, _ in predicted.factors]
                expected = apply_gate(ideal, predicted.to_matrix(qs), qs).amplitudes
            overlap = abs(np.vdot(expected, run(inj).amplitudes))
            worst = min(worst, float(overlap))
            count += 1
    return worst, count
