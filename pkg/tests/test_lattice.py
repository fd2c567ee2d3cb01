import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holosurf import lattice as lt
from holosurf.errors import InvalidDistance, TooLargeForStateVector
from holosurf.noise import AreaError, PauliNoise
from holosurf.pauli_frame import DATA_ORDER, PauliString, spread_pattern


@pytest.fixture(scope="module")
def lay2():
    return lt.build_lattice(2)


@pytest.fixture(scope="module")
def lay3():
    return lt.build_lattice(3)


# --- layout -------------------------------------------------------------------

@pytest.mark.parametrize("d,n_data,n_units", [(2, 5, 4), (3, 13, 12), (4, 25, 24), (5, 41, 40)])
def test_layout_counts(d, n_data, n_units):
    lay = lt.build_lattice(d)
    assert len(lay.data_qubits) == n_data
    assert len(lay.units) == n_units
    assert sum(u.kind == "Z" for u in lay.units) == sum(u.kind == "X" for u in lay.units)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_units_commute_and_share_even(d):
    lay = lt.build_lattice(d)
    for u, v in itertools.combinations(lay.units, 2):
        if u.kind != v.kind:
            assert len(set(u.data_qubits) & set(v.data_qubits)) in (0, 2)
        assert u.operator().commutes_with(v.operator())


@pytest.mark.parametrize("d", [2, 3, 4])
def test_aux_per_unit(d):
    lay = lt.build_lattice(d)
    for u in lay.units:
        n_aux = sum(a is not None for a in u.aux_qubits)
        assert n_aux == len(u.data_qubits)
        assert n_aux in (3, 4)
        assert sum(h is not None for h in u.helper_qubits) == n_aux
    interior = [u for u in lay.units if len(u.data_qubits) == 4]
    assert len(interior) == 2 * (d - 1) * (d - 2)


def test_one_inline_aux_per_bond(lay3):
    roles = {s.label: s.role for s in lay3.sites}
    neighbours = {}
    for a, b in lay3.adjacency:
        for x, y in ((a, b), (b, a)):
            neighbours.setdefault(x, set()).add(y)
    for u in lay3.units:
        for q in u.data_qubits:
            between = [
                a for a in neighbours[q]
                if roles[a] == "aux_inline" and u.measure_qubit in neighbours[a]
            ]
            assert len(between) == 1


def test_layout_is_nearest_neighbour(lay3):
    pos = {s.label: s.position for s in lay3.sites}
    assert len(set(pos.values())) == len(pos)
    assert max(math.dist(pos[a], pos[b]) for a, b in lay3.adjacency) <= 2.0


def test_layout_roles_and_lookup(lay3):
    assert set(s.role for s in lay3.sites) == set(lt.ROLES)
    assert lay3.unit("m1_2").kind == "X"
    assert lay3.site("d0_0").role == "data"
    with pytest.raises(KeyError):
        lay3.unit("nope")
    d = lay3.as_dict()
    assert d["distance"] == 3 and len(d["units"]) == 12


@pytest.mark.parametrize("d", [0, 1, 2.5, "3"])
def test_invalid_distance(d):
    with pytest.raises(InvalidDistance):
        lt.build_lattice(d)


def test_invalid_data_order():
    with pytest.raises(ValueError):
        lt.build_lattice(3, ("N", "N", "E", "S"))


# --- circuits -----------------------------------------------------------------

@pytest.mark.parametrize("variant,per_cnot", [("plain", 1), ("holonomic", 10), ("dynamic", 7)])
def test_syndrome_circuit_lengths(lay3, variant, per_cnot):
    for u in lay3.units:
        steps = lt.syndrome_circuit(u, variant)
        n = len(u.data_qubits)
        extra = 4 if u.kind == "X" else 2
        assert len(steps) == n * per_cnot + extra
        assert steps[0].gate == "reset" and steps[-1].gate == "measure"


def test_holonomic_expansion_structure():
    steps = lt.cnot_expansion("c", "t", "b", "holonomic")
    gates = [s.gate for s in steps]
    assert gates.count("U_sz") == 4 and gates.count("init") == 4 and gates.count("H") == 2
    assert [s.tag for s in steps].count("aux") == 1
    with pytest.raises(ValueError):
        lt.cnot_expansion("c", "t", "b", "other")


def test_x_unit_is_hadamard_conjugated_z_unit(lay3):
    x_unit = lay3.unit("m1_2")
    z_like = lt.StabilizerUnit("z", "Z", x_unit.measure_qubit, x_unit.slots, x_unit.aux_qubits, x_unit.helper_qubits)
    xs = [s for s in lt.syndrome_circuit(x_unit) if s.gate not in ("reset", "measure")]
    zs = [s for s in lt.syndrome_circuit(z_like) if s.gate not in ("reset", "measure")]
    assert xs[0].gate == xs[-1].gate == "H"
    # H_M CNOT(M -> q) H_M equals H_q CNOT(q -> M) H_q on every Pauli.
    labels = (x_unit.measure_qubit,) + x_unit.data_qubits
    for err in (PauliString.from_dict({lab: op}) for lab in labels for op in "XZ"):
        a = lt.propagate_schedule(xs, [lt.Injection(-1, err)])
        hs = [lt.Step("H", (q,)) for q in x_unit.data_qubits]
        b = lt.propagate_schedule(hs + zs + hs, [lt.Injection(-1, err)])
        assert a == b


@pytest.mark.parametrize("variant", lt.VARIANTS)
def test_plain_holonomic_dynamic_same_paths(lay3, variant):
    # Errors injected between whole CNOTs propagate identically in every variant.
    ref = lt.round_schedule(lay3, "plain", ["m1_2", "m2_1"])
    steps = lt.round_schedule(lay3, variant, ["m1_2", "m2_1"])
    ref_b, b = lt.cnot_boundaries(ref), lt.cnot_boundaries(steps)
    assert len(ref_b) == len(b) == 8
    helpers = set(lay3.labels("aux_B"))
    for k in range(8):
        for q, op in (("d2_2", "X"), ("m1_2", "Z"), ("d1_1", "Y")):
            err = PauliString.from_dict({q: op})
            got = lt.propagate_schedule(steps, [lt.Injection(b[k], err)])
            want = lt.propagate_schedule(ref, [lt.Injection(ref_b[k], err)])
            # Helpers start in |0>, so leftover Z factors on them act trivially.
            assert all(got.get(h) in ("I", "Z") for h in helpers)
            assert got.restrict(set(got.support) - helpers) == want


def test_helper_chain_matches_spread_table(lay3):
    # X unit m1_2: M controls every CNOT, as in the spreading table.
    u = lay3.unit("m1_2")
    steps = lt.round_schedule(lay3, "holonomic", [u.label])
    aux = lt.noisy_steps(steps, aux_only=True)
    helpers = [steps[i].targets[1] for i in aux]
    for pattern in itertools.product("IX", repeat=4):
        injections = [lt.Injection(i, PauliString.from_dict({b: a})) for i, b, a in zip(aux, helpers, pattern)]
        final = lt.propagate_schedule(steps, injections)
        predicted = spread_pattern([PauliString.from_dict({"B": a}) for a in pattern])
        for name, q in zip(DATA_ORDER, u.data_qubits):
            assert final.get(q) == predicted[name]


# --- syndrome cycles ----------------------------------------------------------

@pytest.mark.parametrize("representation", ["pauli_frame", "state_vector"])
@pytest.mark.parametrize("variant", lt.VARIANTS)
def test_zero_noise_all_plus(lay2, representation, variant):
    rec = lt.run_cycle(lay2, PauliNoise(0.0), representation, seed=3, variant=variant)
    assert set(rec.outcomes) == {u.label for u in lay2.units}
    assert all(v == 1 for v in rec.outcomes.values())


def test_zero_noise_frame_d5():
    lay = lt.build_lattice(5)
    for r in range(3):
        rec = lt.run_cycle(lay, None, "pauli_frame", seed=r, round_index=r)
        assert rec.round == r and all(v == 1 for v in rec.outcomes.values())


@pytest.mark.parametrize("representation", ["pauli_frame", "state_vector"])
@pytest.mark.parametrize("q", ["d0_0", "d1_1", "d2_2"])
@pytest.mark.parametrize("op", ["X", "Y", "Z"])
def test_single_data_error_flips_neighbours(lay2, representation, q, op):
    inj = [lt.Injection(-1, PauliString.from_dict({q: op}))]
    rec = lt.run_cycle(lay2, None, representation, seed=0, variant="holonomic", injections=inj)
    for u in lay2.units:
        anti = q in u.data_qubits and op != u.kind
        assert rec.outcomes[u.label] == (-1 if anti else 1), (u.label, q, op)


def test_area_error_state_vector_runs(lay2):
    rec = lt.run_cycle(lay2, AreaError(0.05), "state_vector", seed=1)
    assert set(rec.outcomes.values()) <= {-1, 1}
    with pytest.raises(ValueError):
        lt.run_cycle(lay2, AreaError(0.05), "pauli_frame")


def test_state_vector_too_large(lay3):
    with pytest.raises(TooLargeForStateVector):
        lt.run_cycle(lay3, None, "state_vector")


def test_unknown_representation(lay2):
    with pytest.raises(ValueError):
        lt.run_cycle(lay2, None, "tableau")


def test_syndrome_record_validation():
    with pytest.raises(ValueError):
        lt.SyndromeRecord(0, {"m": 0})
    assert lt.SyndromeRecord(1, {"b": 1, "a": -1}).as_dict() == {"round": 1, "outcomes": {"a": -1, "b": 1}}


def test_run_cycle_deterministic(lay3):
    a = [lt.run_cycle(lay3, PauliNoise(0.05), seed=s).outcomes for s in range(5)]
    b = [lt.run_cycle(lay3, PauliNoise(0.05), seed=s).outcomes for s in range(5)]
    assert a == b


# --- frame / state agreement ------------------------------------------------

@pytest.mark.parametrize("variant,count", [("plain", 66), ("holonomic", 270), ("dynamic", 186)])
def test_unit_injection_agreement(lay3, variant, count):
    worst, n = lt.unit_injection_agreement(lay3.unit("m1_2"), variant)
    assert n == count
    assert worst == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("label", ["m0_1", "m2_1", "m1_0"])
def test_unit_injection_agreement_boundary(lay3, label):
    worst, _ = lt.unit_injection_agreement(lay3.unit(label), "holonomic", seed=4)
    assert worst == pytest.approx(1.0, abs=1e-10)


# --- Monte Carlo --------------------------------------------------------------

def test_zero_p_no_errors(lay3):
    rep = lt.monte_carlo_spread(lay3, 0.0, rounds=2, shots=500, seed=1)
    for res in (rep.holonomic, rep.dynamic):
        assert res.weight_histogram == {0: 500}
        assert res.detected == res.undetectable_high_weight == res.uniform_unit_patterns == 0


def test_aux_only_matches_exact_enumeration(lay3):
    p, shots = 0.05, 20_000
    exact = lt.aux_only_uniform_probability(lay3, "m1_2", p)
    assert exact == pytest.approx(0.012136, abs=1e-6)
    rep = lt.monte_carlo_spread(lay3, p, shots=shots, seed=7, units=["m1_2"], aux_only=True)
    assert rep.dynamic is None
    sigma = math.sqrt(exact * (1 - exact) / shots)
    assert abs(rep.holonomic.uniform_unit_patterns / shots - exact) <= 3 * sigma


def test_exact_probability_zero_p(lay3):
    assert lt.aux_only_uniform_probability(lay3, "m1_2", 0.0) == 0.0


def test_workers_do_not_change_results(lay2):
    a = lt.monte_carlo_spread(lay2, 0.02, shots=5000, seed=3, workers=1)
    b = lt.monte_carlo_spread(lay2, 0.02, shots=5000, seed=3, workers=2)
    assert a.as_dict() == b.as_dict()


def test_seed_changes_results(lay2):
    a = lt.spread_experiment(lay2, 0.05, 1, 2000, seed=1)
    b = lt.spread_experiment(lay2, 0.05, 1, 2000, seed=2)
    assert a.as_dict() != b.as_dict()
    assert sum(a.weight_histogram.values()) == 2000


def test_spread_validation(lay2):
    with pytest.raises(ValueError):
        lt.spread_experiment(lay2, 0.2, 1, 10, 0)
    with pytest.raises(ValueError):
        lt.spread_experiment(lay2, 0.01, 1, 0, 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 3))
def test_frame_sampler_letters(seed, k, shots_exp):
    rng = np.random.default_rng(seed)
    letters = lt._sample_letters(rng, 1.0, 10**shots_exp, k)
    assert letters.shape == (10**shots_exp, k)
    assert np.all(letters.max(axis=1) > 0)
    assert letters.min() >= 0 and letters.max() <= 3
