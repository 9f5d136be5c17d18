import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from stoqwalk import compiler as cc
from stoqwalk.errors import CapacityError, InstanceParseError
from stoqwalk.graph import is_bad
from stoqwalk.instance import check_valid, hamiltonian_matrix, to_dict
from stoqwalk.spectral import frustration, ground_energy


def verifier(n, n_w, n_0, n_plus, gates):
    W = n + n_w + n_0 + n_plus
    return cc.StoqVerifier(n, n_w, n_0, n_plus,
                           cc.ReversibleCircuit(W, [cc.Gate(g[0], tuple(g[1:])) for g in gates]))


def basis(dim, i):
    v = np.zeros(dim)
    v[i] = 1.0
    return v


def test_gate_actions():
    assert cc.Gate("NOT", (0,)).apply_local("0") == "1"
    assert cc.Gate("CNOT", (0, 1)).apply_local("10") == "11"
    assert cc.Gate("CNOT", (0, 1)).apply_local("01") == "01"
    assert cc.Gate("TOFFOLI", (0, 1, 2)).apply_local("111") == "110"
    assert cc.Gate("TOFFOLI", (0, 1, 2)).apply_local("101") == "101"


def test_gate_validation():
    with pytest.raises(ValueError):
        cc.Gate("CNOT", (1, 1))
    with pytest.raises(ValueError):
        cc.Gate("SWAP", (0, 1))
    with pytest.raises(ValueError):
        cc.ReversibleCircuit(2, [cc.Gate("NOT", (2,))])
    with pytest.raises(ValueError):
        verifier(1, 0, 0, 0, []).__class__(1, 1, 0, 0, cc.ReversibleCircuit(1))


def test_permutation_uses_first_wire_as_msb():
    c = cc.ReversibleCircuit(3, [cc.Gate("CNOT", (0, 2))])
    assert list(c.permutation()) == [0, 1, 2, 3, 5, 4, 7, 6]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_permutation_is_a_bijection(seed):
    v = cc.random_verifier(np.random.default_rng(seed), max_wires=8, max_gates=8)
    perm = v.circuit.permutation()
    assert sorted(perm) == list(range(2 ** v.wires))


def test_plus_output_accepts_with_certainty():
    v = verifier(0, 0, 0, 2, [("CNOT", 0, 1), ("NOT", 1)])
    assert cc.acceptance_probability(v, "", np.ones(1)) == pytest.approx(1.0, abs=1e-15)


def test_zero_output_accepts_with_half():
    v = verifier(0, 0, 1, 0, [])
    assert cc.acceptance_probability(v, "", np.ones(1)) == pytest.approx(0.5, abs=1e-15)


def test_witness_controlled_acceptance():
    # swap the witness off wire 0, then let it swap the |+> wire onto wire 0
    v = verifier(0, 1, 1, 1, [("CNOT", 0, 1), ("CNOT", 1, 0), ("CNOT", 0, 1),
                              ("TOFFOLI", 1, 0, 2), ("TOFFOLI", 1, 2, 0), ("TOFFOLI", 1, 0, 2)])
    accs = [cc.acceptance_probability(v, "", basis(2, w)) for w in (0, 1)]
    assert accs == pytest.approx([0.5, 1.0])
    best, w = cc.optimal_acceptance(v, "")
    assert best == pytest.approx(1.0)
    np.testing.assert_allclose(w, [0.0, 1.0], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_optimal_acceptance_dominates_every_witness(seed):
    rng = np.random.default_rng(seed)
    v = cc.random_verifier(rng, max_wires=7, max_gates=8)
    x = "".join(rng.choice(["0", "1"], size=v.n))
    best, w = cc.optimal_acceptance(v, x)
    assert cc.acceptance_probability(v, x, w) == pytest.approx(best, abs=1e-10)
    for _ in range(5):
        wit = rng.standard_normal(2 ** v.n_w)
        wit /= np.linalg.norm(wit)
        assert cc.acceptance_probability(v, x, wit) <= best + 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_nonnegative_witness_floor(seed):
    rng = np.random.default_rng(seed)
    v = cc.random_verifier(rng, max_wires=8, max_gates=8)
    x = "".join(rng.choice(["0", "1"], size=v.n))
    assert cc.check_nonneg_floor(v, x, trials=10, seed=seed) >= 0.5 - 1e-9


def test_signed_witness_can_go_below_half():
    # a phase-free circuit still dips below 1/2 when the witness has mixed signs
    v = verifier(0, 1, 0, 0, [])
    minus = np.array([1.0, -1.0]) / np.sqrt(2)
    assert cc.acceptance_probability(v, "", minus) == pytest.approx(0.0, abs=1e-15)


def test_simulation_cap():
    v = verifier(0, 0, 21, 0, [])
    with pytest.raises(CapacityError):
        cc.acceptance_probability(v, "", np.ones(1))


def test_input_checks():
    v = verifier(2, 0, 1, 0, [])
    with pytest.raises(ValueError):
        cc.acceptance_probability(v, "0", np.ones(1))
    with pytest.raises(ValueError):
        cc.acceptance_probability(verifier(0, 1, 0, 0, []), "", np.ones(2))


# -- MA embedding -----------------------------------------------------------------

@pytest.mark.parametrize("accept", [True, False])
def test_ma_embedding_constants(accept):
    gates = [cc.Gate("NOT", (2,))] if accept else [cc.Gate("CNOT", (0, 1))]
    v = cc.ma_to_stoqma(cc.ReversibleCircuit(3, gates), cc.MALayout(1, 1, 1, 0, 2))
    assert (v.n, v.n_w, v.n_0, v.n_plus) == (1, 1, 2, 1)
    for x in "01":
        for w in range(2):
            assert cc.acceptance_probability(v, x, basis(2, w)) == pytest.approx(
                1.0 if accept else 0.5, abs=1e-12)


def test_ma_embedding_follows_the_decision():
    # the MA circuit copies x AND w into the output wire
    ma = cc.ReversibleCircuit(3, [cc.Gate("TOFFOLI", (0, 1, 2))])
    v = cc.ma_to_stoqma(ma, cc.MALayout(1, 1, 1, 0, 2))
    got = {(x, w): cc.acceptance_probability(v, x, basis(2, w)) for x in "01" for w in (0, 1)}
    assert got == pytest.approx({("0", 0): 0.5, ("0", 1): 0.5, ("1", 0): 0.5, ("1", 1): 1.0})
    assert cc.optimal_acceptance(v, "1")[0] == pytest.approx(1.0)


def test_ma_layout_mismatch():
    with pytest.raises(ValueError):
        cc.ma_to_stoqma(cc.ReversibleCircuit(3), cc.MALayout(1, 1, 0, 0, 0))


# -- compilation ----------------------------------------------------------------------

def test_compiled_layout_and_locality():
    v = verifier(1, 1, 1, 1, [("CNOT", 0, 2), ("TOFFOLI", 1, 2, 0), ("NOT", 3)])
    h = cc.kitaev_compile(v, "1")
    check_valid(h)
    assert h.n == 4 + 3
    # clock validity 2, input 1, zero 1, plus 1, gates 3, output 1
    assert h.m == 9
    assert h.k == 6  # the Toffoli is an interior gate: 3 clock + 3 data


def test_interior_toffoli_reaches_locality_six():
    v = verifier(0, 0, 3, 0, [("NOT", 0), ("TOFFOLI", 0, 1, 2), ("NOT", 0)])
    assert cc.kitaev_compile(v).k == 6


def test_valid_clock_strings_are_good():
    v = verifier(0, 0, 2, 0, [("NOT", 0), ("CNOT", 0, 1), ("NOT", 1)])
    h = cc.kitaev_compile(v)
    for t, data in enumerate(["00", "10", "11", "10"]):
        assert not is_bad(h, data + "1" * t + "0" * (3 - t))
    assert is_bad(h, "00" + "010")  # invalid clock
    assert is_bad(h, "10" + "000")  # wrong ancilla at time 0


def test_history_state_path():
    v = verifier(0, 0, 2, 0, [("NOT", 0), ("CNOT", 0, 1)])
    eta = cc.history_state(v, "", np.ones(1))
    L = 2
    want = np.zeros(2 ** 4)
    for data, t in (("00", 0), ("10", 1), ("11", 2)):
        want[int(data + "1" * t + "0" * (L - t), 2)] = 1 / np.sqrt(3)
    np.testing.assert_allclose(eta, want)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_history_state_energy_is_exact(seed):
    rng = np.random.default_rng(seed)
    while True:
        v = cc.random_verifier(rng, max_wires=5, max_gates=5)
        if v.wires + v.L <= 10:
            break
    x = "".join(rng.choice(["0", "1"], size=v.n))
    w = cc.random_nonneg_state(2 ** v.n_w, rng)
    h = cc.kitaev_compile(v, x)
    eta = cc.history_state(v, x, w)
    acc = cc.acceptance_probability(v, x, w)
    assert frustration(h, eta) == pytest.approx((1 - acc) / (h.m * (v.L + 1)), abs=1e-12)


def test_zero_energy_iff_certain_acceptance():
    accept = verifier(0, 0, 0, 2, [("CNOT", 0, 1), ("NOT", 1)])
    h = cc.kitaev_compile(accept)
    assert ground_energy(h).ground_energy == pytest.approx(0.0, abs=1e-9)
    half = verifier(0, 0, 1, 1, [("CNOT", 1, 0)])
    assert cc.optimal_acceptance(half, "")[0] == pytest.approx(0.5)
    assert ground_energy(cc.kitaev_compile(half)).ground_energy > 1e-6


def test_compiled_matrix_matches_oracle():
    v = verifier(1, 1, 0, 1, [("CNOT", 0, 1), ("TOFFOLI", 0, 2, 1)])
    h = cc.kitaev_compile(v, "1")
    np.testing.assert_allclose(hamiltonian_matrix(h), oracle.hamiltonian(to_dict(h)), atol=1e-12)


def test_compile_needs_gates():
    with pytest.raises(ValueError):
        cc.kitaev_compile(verifier(0, 0, 1, 0, []))


# -- circuit files ------------------------------------------------------------------------

def test_circuit_file_round_trip(tmp_path):
    v = verifier(1, 1, 1, 1, [("CNOT", 0, 2), ("TOFFOLI", 1, 2, 0), ("NOT", 3)])
    path = tmp_path / "v.json"
    cc.dump_verifier(v, path)
    assert cc.load_verifier(path) == v
    data = json.loads(path.read_text())
    assert data["gates"][1] == ["TOFFOLI", 1, 2, 0]


@pytest.mark.parametrize("data, path", [
    ({"wires": 1, "registers": {"n": 1, "n_w": 0, "n_0": 0, "n_plus": 0}, "gates": [], "x": 1}, "$"),
    ({"wires": 1, "registers": {"n": 1, "n_w": 0, "n_0": 0}, "gates": []}, "$.registers"),
    ({"wires": 2, "registers": {"n": 2, "n_w": 0, "n_0": 0, "n_plus": 0},
      "gates": [["CNOT", 0]]}, "$.gates[0]"),
    ({"wires": 2, "registers": {"n": 2, "n_w": 0, "n_0": 0, "n_plus": 0},
      "gates": [["CNOT", 0, 0]]}, "$.gates[0]"),
    ({"wires": 3, "registers": {"n": 2, "n_w": 0, "n_0": 0, "n_plus": 0}, "gates": []}, "$"),
])
def test_circuit_schema_errors(data, path):
    with pytest.raises(InstanceParseError) as info:
        cc.verifier_from_dict(data)
    assert info.value.path == path


def test_circuit_syntax_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"wires": 1,\n"gates": [,]}')
    with pytest.raises(InstanceParseError) as info:
        cc.load_verifier(p)
    assert info.value.line == 2


@pytest.mark.parametrize("L", [1, 2, 4])
def test_zero_output_history_energy_against_oracle(L):
    # output wire is a |0> ancilla and the gates act elsewhere: only the output term fires,
    # with weight 1/2 on the final clock time, whose amplitude squared is 1/(L+1)
    v = verifier(0, 0, 2, 0, [("NOT", 1)] * L)
    h = cc.kitaev_compile(v)
    eta = cc.history_state(v, "", np.ones(1))
    energy = float(eta @ oracle.hamiltonian(to_dict(h)) @ eta)
    assert energy == pytest.approx(0.5 / (h.m * (L + 1)), abs=1e-12)
    assert energy <= (1 - cc.acceptance_probability(v, "", np.ones(1))) / h.m + 1e-9
